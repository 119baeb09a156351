#include "recon/flow_features.hpp"

#include <algorithm>
#include <unordered_map>

namespace recon {
namespace {

struct Endpoint {
  Ipv4 ip;
  std::uint16_t port;
  auto operator<=>(const Endpoint&) const = default;
};

struct CanonicalKey {
  Endpoint low;
  Endpoint high;
  Protocol proto;
  bool operator==(const CanonicalKey&) const = default;
};

struct CanonicalKeyHash {
  std::size_t operator()(const CanonicalKey& k) const noexcept {
    std::uint64_t h = std::uint64_t{k.low.ip.value} << 32 | k.high.ip.value;
    h ^= (std::uint64_t{k.low.port} << 24 | std::uint64_t{k.high.port} << 8 | static_cast<std::uint8_t>(k.proto)) *
         0x9E3779B97F4A7C15ull;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

CanonicalKey canonical(const PacketRecord& p) {
  const Endpoint src{p.src_ip, p.src_port};
  const Endpoint dst{p.dst_ip, p.dst_port};
  return src < dst ? CanonicalKey{src, dst, p.proto} : CanonicalKey{dst, src, p.proto};
}

enum class Liveness { kOpen, kClosing, kClosed };

struct ActiveFlow {
  std::size_t index;
  Liveness liveness = Liveness::kOpen;
  bool fin_a2b = false;
  bool fin_b2a = false;
};

void account(FlowRecord& flow, DirectionStats& dir, const PacketRecord& p, bool forward) {
  if (dir.packets == 0) {
    dir.first_ttl = p.ttl;
    if (p.proto == Protocol::kTcp) dir.seq_base = p.seq;
  } else {
    dir.max_idle_us = std::max(dir.max_idle_us, p.ts.us - dir.last_ts.us);
  }
  ++dir.packets;
  dir.bytes += p.wire_len;
  dir.last_ts = p.ts;
  flow.end_ts = p.ts;

  if (p.proto != Protocol::kTcp) return;
  if (p.payload_len > 0) {
    dir.min_segment = dir.min_segment == 0 ? p.payload_len : std::min(dir.min_segment, p.payload_len);
    dir.max_segment = std::max(dir.max_segment, p.payload_len);
  }
  if (p.has_flags(tcp_flags::kFin)) ++dir.fin_packets;
  if (p.has_flags(tcp_flags::kRst)) ++dir.rst_packets;

  const bool syn = p.has_flags(tcp_flags::kSyn);
  const bool ack = p.has_flags(tcp_flags::kAck);
  if (syn) {
    dir.mss = p.option(kTcpOptionMss, dir.mss);
    dir.window_scale = p.option(kTcpOptionWindowScale, dir.window_scale);
  }
  if (forward && syn && !ack) flow.syn_a2b = true;
  if (!forward && syn && ack && flow.syn_a2b) flow.synack_b2a = true;
  if (forward && ack && !syn && flow.synack_b2a) flow.established = true;
}

}  // namespace

std::string_view to_string(FlowState state) {
  switch (state) {
    case FlowState::kCon:
      return "CON";
    case FlowState::kReq:
      return "REQ";
    case FlowState::kRst:
      return "RST";
    case FlowState::kFin:
      return "FIN";
    case FlowState::kInt:
      return "INT";
  }
  return "?";
}

FlowState flow_state(const FlowRecord& flow) {
  if (flow.key.proto == Protocol::kTcp) {
    if (flow.a2b.rst_packets + flow.b2a.rst_packets > 0) return FlowState::kRst;
    if (flow.a2b.fin_packets > 0 && flow.b2a.fin_packets > 0) return FlowState::kFin;
    if (flow.established) return FlowState::kCon;
    return FlowState::kReq;
  }
  if (flow.b2a.packets > 0) return FlowState::kCon;
  // An unanswered echo request is still a request; other one-way datagrams
  // have no handshake to speak of.
  if (flow.key.proto == Protocol::kIcmp && flow.first_icmp_type == kIcmpEchoRequest) return FlowState::kReq;
  return FlowState::kInt;
}

FlowAssembly assemble_flows_indexed(std::span<const PacketRecord> packets, FlowTimeouts timeouts) {
  const std::int64_t tcp_timeout = seconds_to_us(timeouts.tcp_idle_s);
  const std::int64_t other_timeout = seconds_to_us(timeouts.other_idle_s);

  FlowAssembly out;
  out.packet_flow.reserve(packets.size());
  std::unordered_map<CanonicalKey, ActiveFlow, CanonicalKeyHash> active;

  for (std::size_t i = 0; i < packets.size(); ++i) {
    const PacketRecord& p = packets[i];
    if (i > 0 && p.ts < packets[i - 1].ts)
      throw Error(ErrorCode::kInvalidArgument, "packets must be time-ordered (index " + std::to_string(i) + ")");

    const CanonicalKey ck = canonical(p);
    auto it = active.find(ck);
    bool open_new = it == active.end();
    if (!open_new) {
      const FlowRecord& f = out.flows[it->second.index];
      const std::int64_t timeout = p.proto == Protocol::kTcp ? tcp_timeout : other_timeout;
      const bool pure_ack = p.tcp_flags == tcp_flags::kAck && p.payload_len == 0;
      if (p.ts.us - f.end_ts.us > timeout) {
        open_new = true;
      } else if (it->second.liveness == Liveness::kClosed) {
        open_new = true;
      } else if (it->second.liveness == Liveness::kClosing && !pure_ack) {
        open_new = true;
      }
    }
    if (open_new) {
      FlowRecord f;
      f.key = FlowKey{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.proto};
      f.start_ts = p.ts;
      f.end_ts = p.ts;
      f.first_icmp_type = p.icmp_type;
      out.flows.push_back(std::move(f));
      it = active.insert_or_assign(ck, ActiveFlow{out.flows.size() - 1}).first;
    }

    ActiveFlow& af = it->second;
    FlowRecord& flow = out.flows[af.index];
    const bool forward = p.src_ip == flow.key.initiator_ip && p.src_port == flow.key.initiator_port;
    account(flow, forward ? flow.a2b : flow.b2a, p, forward);
    out.packet_flow.push_back(af.index);

    if (p.proto == Protocol::kTcp) {
      if (af.liveness == Liveness::kClosing) {
        af.liveness = Liveness::kClosed;  // the final ACK
      } else if (p.has_flags(tcp_flags::kRst)) {
        af.liveness = Liveness::kClosed;
      } else if (p.has_flags(tcp_flags::kFin)) {
        (forward ? af.fin_a2b : af.fin_b2a) = true;
        if (af.fin_a2b && af.fin_b2a) af.liveness = Liveness::kClosing;
      }
    }
  }
  for (auto& f : out.flows) f.state = flow_state(f);
  return out;
}

std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, FlowTimeouts timeouts) {
  return assemble_flows_indexed(packets, timeouts).flows;
}

FlowFeatureVector extract_flow_features(const FlowRecord& flow) {
  FlowFeatureVector v;
  const auto& a = flow.a2b;
  const auto& b = flow.b2a;
  v.state = flow_state(flow);
  v.proto = flow.key.proto;
  v.s_ttl = a.first_ttl;
  v.d_ttl = b.packets > 0 ? b.first_ttl : 0.0;
  v.dport = flow.key.responder_port;
  v.dur = static_cast<double>(flow.end_ts.us - flow.start_ts.us) * 1e-6;
  v.src_pkts = static_cast<double>(a.packets);
  v.dst_pkts = static_cast<double>(b.packets);
  v.src_bytes = static_cast<double>(a.bytes);
  v.dst_bytes = static_cast<double>(b.bytes);
  v.s_mean_pkt_sz = a.packets > 0 ? v.src_bytes / v.src_pkts : 0.0;
  v.d_mean_pkt_sz = b.packets > 0 ? v.dst_bytes / v.dst_pkts : 0.0;
  const double total = v.src_bytes + v.dst_bytes;
  v.pc_ratio = total > 0 ? (v.src_bytes - v.dst_bytes) / total : 0.0;

  if (flow.key.proto == Protocol::kTcp) {
    v.mss_requested_a2b = a.mss;
    if (b.seq_base) v.dst_tcp_base = *b.seq_base;
    v.min_segm_size_a2b = a.min_segment;
    v.max_segm_size_a2b = a.max_segment;
    v.idletime_max_a2b = static_cast<double>(a.max_idle_us) * 1e-6;
    v.fin_pkts_a2b = a.fin_packets;
    v.adv_wind_scale_a2b = a.window_scale;
  }
  return v;
}

}  // namespace recon
