#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "recon/common.hpp"

namespace recon {

enum class Protocol : std::uint8_t { kIcmp = 1, kTcp = 6, kUdp = 17 };

std::string_view to_string(Protocol proto);
Protocol parse_protocol(std::string_view name);

namespace tcp_flags {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcp_flags

inline constexpr std::uint8_t kIcmpEchoReply = 0;
inline constexpr std::uint8_t kIcmpEchoRequest = 8;

inline constexpr std::uint8_t kTcpOptionMss = 2;
inline constexpr std::uint8_t kTcpOptionWindowScale = 3;

struct TcpOption {
  std::uint8_t kind = 0;
  std::uint32_t value = 0;

  bool operator==(const TcpOption&) const = default;
};

// One captured IPv4 frame, reduced to the header fields the pipeline uses.
struct PacketRecord {
  Timestamp ts;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol proto = Protocol::kTcp;
  std::uint8_t tcp_flags = 0;
  std::uint8_t icmp_type = 0;
  std::uint8_t ttl = 64;
  std::uint32_t wire_len = 0;     // full frame length, link header included
  std::uint32_t payload_len = 0;  // transport payload bytes
  std::uint32_t seq = 0;
  std::uint16_t window = 0;
  std::vector<TcpOption> tcp_options;  // MSS and window scale only

  bool operator==(const PacketRecord&) const = default;

  bool has_flags(std::uint8_t mask) const { return (tcp_flags & mask) == mask; }
  std::uint32_t option(std::uint8_t kind, std::uint32_t fallback = 0) const;
};

// Bytes of Ethernet + IPv4 + transport headers write_pcap emits for p.
std::uint32_t header_bytes(const PacketRecord& p);
bool is_valid(const PacketRecord& p);

struct PcapReadResult {
  std::vector<PacketRecord> packets;
  std::size_t skipped = 0;  // non-IPv4, unsupported link type or transport
};

PcapReadResult read_pcap(std::span<const std::uint8_t> bytes);
PcapReadResult read_pcap(std::istream& in);

enum class Endianness { kLittle, kBig };

// Classic pcap, link type Ethernet. MAC addresses are derived from the IP
// so the output is a pure function of the input.
std::vector<std::uint8_t> write_pcap(std::span<const PacketRecord> packets,
                                     Endianness endianness = Endianness::kLittle);

struct CaptureSegment {
  std::vector<PacketRecord> packets;
  std::size_t index = 0;
};

std::vector<CaptureSegment> segment(std::span<const PacketRecord> packets, std::size_t n);

}  // namespace recon
