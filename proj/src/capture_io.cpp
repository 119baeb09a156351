#include "recon/capture_io.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <iterator>

namespace recon {
namespace {

constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4;
constexpr std::uint32_t kMagicMicrosSwapped = 0xD4C3B2A1;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;

constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRaw = 101;
constexpr std::uint32_t kLinkLinuxSll = 113;
constexpr std::uint32_t kLinkIpv4 = 228;

constexpr std::size_t kEthernetLen = 14;
constexpr std::size_t kIpv4Len = 20;
constexpr std::size_t kTcpBaseLen = 20;
constexpr std::size_t kUdpLen = 8;
constexpr std::size_t kIcmpLen = 8;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool swapped) : bytes_(bytes), swapped_(swapped) {}

  std::uint32_t u32(std::size_t at) const {
    std::uint32_t v = std::uint32_t{bytes_[at]} | std::uint32_t{bytes_[at + 1]} << 8 |
                      std::uint32_t{bytes_[at + 2]} << 16 | std::uint32_t{bytes_[at + 3]} << 24;
    if (swapped_) v = __builtin_bswap32(v);
    return v;
  }
  std::uint16_t u16(std::size_t at) const {
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[at] | bytes_[at + 1] << 8);
    if (swapped_) v = __builtin_bswap16(v);
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swapped_;
};

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] << 8 | b[at + 1]);
}
std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} << 24 | std::uint32_t{b[at + 1]} << 16 |
         std::uint32_t{b[at + 2]} << 8 | std::uint32_t{b[at + 3]};
}

// Parses an IPv4 datagram starting at `ip`. Returns false for anything the
// pipeline does not model (fragments, other transports, short captures).
bool parse_ipv4(std::span<const std::uint8_t> frame, std::size_t ip, std::uint32_t orig_len,
                PacketRecord& out) {
  if (frame.size() < ip + kIpv4Len) return false;
  if ((frame[ip] >> 4) != 4) return false;
  const std::size_t ihl = std::size_t{frame[ip] & 0x0Fu} * 4;
  if (ihl < kIpv4Len || frame.size() < ip + ihl) return false;
  const std::uint16_t total_len = be16(frame, ip + 2);
  const std::uint16_t frag = be16(frame, ip + 6);
  if ((frag & 0x1FFF) != 0 || (frag & 0x2000) != 0) return false;
  if (total_len < ihl) return false;

  out.ttl = frame[ip + 8];
  out.src_ip = Ipv4{be32(frame, ip + 12)};
  out.dst_ip = Ipv4{be32(frame, ip + 16)};
  out.wire_len = orig_len;

  const std::size_t l4 = ip + ihl;
  const std::size_t l4_total = total_len - ihl;
  switch (frame[ip + 9]) {
    case static_cast<std::uint8_t>(Protocol::kTcp): {
      if (frame.size() < l4 + kTcpBaseLen || l4_total < kTcpBaseLen) return false;
      const std::size_t data_offset = static_cast<std::size_t>(frame[l4 + 12] >> 4) * 4;
      if (data_offset < kTcpBaseLen || frame.size() < l4 + data_offset || l4_total < data_offset)
        return false;
      out.proto = Protocol::kTcp;
      out.src_port = be16(frame, l4);
      out.dst_port = be16(frame, l4 + 2);
      out.seq = be32(frame, l4 + 4);
      out.tcp_flags = frame[l4 + 13] & 0x3F;
      out.window = be16(frame, l4 + 14);
      out.payload_len = static_cast<std::uint32_t>(l4_total - data_offset);
      for (std::size_t at = l4 + kTcpBaseLen; at < l4 + data_offset;) {
        const std::uint8_t kind = frame[at];
        if (kind == 0) break;
        if (kind == 1) {
          ++at;
          continue;
        }
        if (at + 1 >= l4 + data_offset) break;
        const std::uint8_t len = frame[at + 1];
        if (len < 2 || at + len > l4 + data_offset) break;
        if (kind == kTcpOptionMss && len == 4) {
          out.tcp_options.push_back({kind, be16(frame, at + 2)});
        } else if (kind == kTcpOptionWindowScale && len == 3) {
          out.tcp_options.push_back({kind, frame[at + 2]});
        }
        at += len;
      }
      return true;
    }
    case static_cast<std::uint8_t>(Protocol::kUdp):
      if (frame.size() < l4 + kUdpLen || l4_total < kUdpLen) return false;
      out.proto = Protocol::kUdp;
      out.src_port = be16(frame, l4);
      out.dst_port = be16(frame, l4 + 2);
      out.payload_len = static_cast<std::uint32_t>(l4_total - kUdpLen);
      return true;
    case static_cast<std::uint8_t>(Protocol::kIcmp):
      if (frame.size() < l4 + kIcmpLen || l4_total < kIcmpLen) return false;
      out.proto = Protocol::kIcmp;
      out.icmp_type = frame[l4];
      out.payload_len = static_cast<std::uint32_t>(l4_total - kIcmpLen);
      return true;
    default:
      return false;
  }
}

void put_be16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v >> 8);
  b[at + 1] = static_cast<std::uint8_t>(v);
}
void put_be32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

class Writer {
 public:
  explicit Writer(Endianness e) : big_(e == Endianness::kBig) {}

  void u32(std::vector<std::uint8_t>& out, std::uint32_t v) const {
    for (int i = 0; i < 4; ++i) {
      const int shift = big_ ? 24 - 8 * i : 8 * i;
      out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }
  void u16(std::vector<std::uint8_t>& out, std::uint16_t v) const {
    for (int i = 0; i < 2; ++i) {
      const int shift = big_ ? 8 - 8 * i : 8 * i;
      out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

 private:
  bool big_;
};

std::uint32_t checksum_add(std::span<const std::uint8_t> data, std::uint32_t sum) {
  for (std::size_t i = 0; i + 1 < data.size(); i += 2) sum += std::uint32_t(data[i] << 8 | data[i + 1]);
  if (data.size() % 2) sum += std::uint32_t(data.back() << 8);
  return sum;
}
std::uint16_t checksum_fold(std::uint32_t sum) {
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

std::size_t tcp_options_len(const PacketRecord& p) {
  std::size_t n = 0;
  for (const auto& o : p.tcp_options) n += o.kind == kTcpOptionMss ? 4 : 3;
  return (n + 3) / 4 * 4;
}

std::size_t transport_header_len(const PacketRecord& p) {
  switch (p.proto) {
    case Protocol::kTcp:
      return kTcpBaseLen + tcp_options_len(p);
    case Protocol::kUdp:
      return kUdpLen;
    case Protocol::kIcmp:
      return kIcmpLen;
  }
  return 0;
}

std::array<std::uint8_t, 6> mac_for(Ipv4 ip) {
  return {0x02, 0x00, static_cast<std::uint8_t>(ip.value >> 24), static_cast<std::uint8_t>(ip.value >> 16),
          static_cast<std::uint8_t>(ip.value >> 8), static_cast<std::uint8_t>(ip.value)};
}

std::vector<std::uint8_t> build_frame(const PacketRecord& p) {
  std::vector<std::uint8_t> f(p.wire_len, 0);
  const auto dst_mac = mac_for(p.dst_ip);
  const auto src_mac = mac_for(p.src_ip);
  std::copy(dst_mac.begin(), dst_mac.end(), f.begin());
  std::copy(src_mac.begin(), src_mac.end(), f.begin() + 6);
  put_be16(f, 12, 0x0800);

  const std::size_t ip = kEthernetLen;
  const std::size_t l4_len = transport_header_len(p) + p.payload_len;
  const std::size_t total = kIpv4Len + l4_len;
  f[ip] = 0x45;
  put_be16(f, ip + 2, static_cast<std::uint16_t>(total));
  put_be16(f, ip + 6, 0x4000);  // DF
  f[ip + 8] = p.ttl;
  f[ip + 9] = static_cast<std::uint8_t>(p.proto);
  put_be32(f, ip + 12, p.src_ip.value);
  put_be32(f, ip + 16, p.dst_ip.value);
  put_be16(f, ip + 10, checksum_fold(checksum_add({f.data() + ip, kIpv4Len}, 0)));

  const std::size_t l4 = ip + kIpv4Len;
  std::size_t check_at = 0;
  switch (p.proto) {
    case Protocol::kTcp: {
      put_be16(f, l4, p.src_port);
      put_be16(f, l4 + 2, p.dst_port);
      put_be32(f, l4 + 4, p.seq);
      f[l4 + 12] = static_cast<std::uint8_t>((transport_header_len(p) / 4) << 4);
      f[l4 + 13] = p.tcp_flags;
      put_be16(f, l4 + 14, p.window);
      std::size_t at = l4 + kTcpBaseLen;
      for (const auto& o : p.tcp_options) {
        f[at] = o.kind;
        if (o.kind == kTcpOptionMss) {
          f[at + 1] = 4;
          put_be16(f, at + 2, static_cast<std::uint16_t>(o.value));
          at += 4;
        } else {
          f[at + 1] = 3;
          f[at + 2] = static_cast<std::uint8_t>(o.value);
          at += 3;
        }
      }
      check_at = l4 + 16;
      break;
    }
    case Protocol::kUdp:
      put_be16(f, l4, p.src_port);
      put_be16(f, l4 + 2, p.dst_port);
      put_be16(f, l4 + 4, static_cast<std::uint16_t>(l4_len));
      check_at = l4 + 6;
      break;
    case Protocol::kIcmp:
      f[l4] = p.icmp_type;
      check_at = l4 + 2;
      break;
  }
  std::uint32_t sum = 0;
  if (p.proto != Protocol::kIcmp) {
    std::array<std::uint8_t, 12> pseudo{};
    for (int i = 0; i < 4; ++i) {
      pseudo[i] = static_cast<std::uint8_t>(p.src_ip.value >> (24 - 8 * i));
      pseudo[4 + i] = static_cast<std::uint8_t>(p.dst_ip.value >> (24 - 8 * i));
    }
    pseudo[9] = static_cast<std::uint8_t>(p.proto);
    pseudo[10] = static_cast<std::uint8_t>(l4_len >> 8);
    pseudo[11] = static_cast<std::uint8_t>(l4_len);
    sum = checksum_add(pseudo, 0);
  }
  put_be16(f, check_at, checksum_fold(checksum_add({f.data() + l4, l4_len}, sum)));
  return f;
}

}  // namespace

std::string_view to_string(Protocol proto) {
  switch (proto) {
    case Protocol::kTcp:
      return "tcp";
    case Protocol::kUdp:
      return "udp";
    case Protocol::kIcmp:
      return "icmp";
  }
  return "?";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "tcp" || name == "6") return Protocol::kTcp;
  if (name == "udp" || name == "17") return Protocol::kUdp;
  if (name == "icmp" || name == "1") return Protocol::kIcmp;
  throw Error(ErrorCode::kInvalidArgument, "unknown protocol '" + std::string(name) + "'");
}

std::uint32_t PacketRecord::option(std::uint8_t kind, std::uint32_t fallback) const {
  for (const auto& o : tcp_options)
    if (o.kind == kind) return o.value;
  return fallback;
}

std::uint32_t header_bytes(const PacketRecord& p) {
  return static_cast<std::uint32_t>(kEthernetLen + kIpv4Len + transport_header_len(p));
}

bool is_valid(const PacketRecord& p) {
  if (p.payload_len > p.wire_len) return false;
  if (std::uint64_t{header_bytes(p)} + p.payload_len > p.wire_len) return false;
  if (kIpv4Len + transport_header_len(p) + p.payload_len > 0xFFFF) return false;
  if (p.proto != Protocol::kTcp) {
    if (p.tcp_flags != 0 || p.seq != 0 || p.window != 0 || !p.tcp_options.empty()) return false;
  }
  if (p.proto == Protocol::kIcmp && (p.src_port != 0 || p.dst_port != 0)) return false;
  if (p.proto != Protocol::kIcmp && p.icmp_type != 0) return false;
  if ((p.tcp_flags & 0xC0) != 0) return false;
  for (const auto& o : p.tcp_options) {
    if (o.kind == kTcpOptionMss && o.value > 0xFFFF) return false;
    if (o.kind == kTcpOptionWindowScale && o.value > 0xFF) return false;
    if (o.kind != kTcpOptionMss && o.kind != kTcpOptionWindowScale) return false;
  }
  return true;
}

PcapReadResult read_pcap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGlobalHeaderLen) throw Error(ErrorCode::kTruncated, "pcap global header is incomplete");
  const std::uint32_t magic_le = Reader(bytes, false).u32(0);
  bool swapped;
  if (magic_le == kMagicMicros) {
    swapped = false;
  } else if (magic_le == kMagicMicrosSwapped) {
    swapped = true;
  } else {
    throw Error(ErrorCode::kBadMagic, "not a classic pcap file");
  }
  const Reader r(bytes, swapped);
  const std::uint32_t link = r.u32(20);

  PcapReadResult result;
  std::size_t at = kGlobalHeaderLen;
  while (at < bytes.size()) {
    if (bytes.size() - at < kRecordHeaderLen)
      throw Error(ErrorCode::kTruncated, "record header at offset " + std::to_string(at));
    const std::uint32_t ts_sec = r.u32(at);
    const std::uint32_t ts_usec = r.u32(at + 4);
    const std::uint32_t incl_len = r.u32(at + 8);
    const std::uint32_t orig_len = r.u32(at + 12);
    at += kRecordHeaderLen;
    if (bytes.size() - at < incl_len)
      throw Error(ErrorCode::kTruncated, "record at offset " + std::to_string(at - kRecordHeaderLen) +
                                             " promises " + std::to_string(incl_len) + " bytes");
    const auto frame = bytes.subspan(at, incl_len);
    at += incl_len;

    std::size_t ip = 0;
    bool ipv4 = false;
    switch (link) {
      case kLinkEthernet:
        ipv4 = frame.size() >= kEthernetLen && be16(frame, 12) == 0x0800;
        ip = kEthernetLen;
        break;
      case kLinkLinuxSll:
        ipv4 = frame.size() >= 16 && be16(frame, 14) == 0x0800;
        ip = 16;
        break;
      case kLinkRaw:
      case kLinkIpv4:
        ipv4 = true;
        break;
      default:
        break;
    }
    PacketRecord p;
    p.ts = Timestamp::from_parts(ts_sec, ts_usec);
    if (ipv4 && parse_ipv4(frame, ip, orig_len, p)) {
      result.packets.push_back(std::move(p));
    } else {
      ++result.skipped;
    }
  }
  return result;
}

PcapReadResult read_pcap(std::istream& in) {
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_pcap(bytes);
}

std::vector<std::uint8_t> write_pcap(std::span<const PacketRecord> packets, Endianness endianness) {
  const Writer w(endianness);
  std::vector<std::uint8_t> out;
  out.reserve(kGlobalHeaderLen + packets.size() * 96);
  w.u32(out, kMagicMicros);
  w.u16(out, 2);
  w.u16(out, 4);
  w.u32(out, 0);  // thiszone
  w.u32(out, 0);  // sigfigs
  w.u32(out, 65535);
  w.u32(out, kLinkEthernet);
  for (const auto& p : packets) {
    if (!is_valid(p)) throw Error(ErrorCode::kInvalidArgument, "packet violates record invariants");
    w.u32(out, static_cast<std::uint32_t>(p.ts.sec()));
    w.u32(out, static_cast<std::uint32_t>(p.ts.usec()));
    w.u32(out, p.wire_len);
    w.u32(out, p.wire_len);
    const auto frame = build_frame(p);
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

std::vector<CaptureSegment> segment(std::span<const PacketRecord> packets, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "segment size must be >= 1");
  std::vector<CaptureSegment> out;
  for (std::size_t begin = 0; begin < packets.size(); begin += n) {
    const std::size_t len = std::min(n, packets.size() - begin);
    const auto part = packets.subspan(begin, len);
    out.push_back({std::vector<PacketRecord>(part.begin(), part.end()), out.size()});
  }
  return out;
}

}  // namespace recon
