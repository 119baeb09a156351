#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "recon/capture_io.hpp"

namespace recon {

// Initiator ("a") is the endpoint that sent the flow's first packet.
struct FlowKey {
  Ipv4 initiator_ip;
  Ipv4 responder_ip;
  std::uint16_t initiator_port = 0;
  std::uint16_t responder_port = 0;
  Protocol proto = Protocol::kTcp;

  auto operator<=>(const FlowKey&) const = default;
};

enum class FlowState { kCon, kReq, kRst, kFin, kInt };

std::string_view to_string(FlowState state);

struct DirectionStats {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;  // wire bytes
  std::uint8_t first_ttl = 0;
  std::optional<std::uint32_t> seq_base;
  std::uint32_t mss = 0;           // from the SYN's MSS option, 0 when absent
  std::uint32_t window_scale = 0;  // from the SYN's window-scale option
  std::uint32_t min_segment = 0;   // over data-carrying segments; 0 when none
  std::uint32_t max_segment = 0;
  std::int64_t max_idle_us = 0;  // largest gap between consecutive packets
  std::uint32_t fin_packets = 0;
  std::uint32_t rst_packets = 0;
  Timestamp last_ts;

  bool operator==(const DirectionStats&) const = default;
};

struct FlowRecord {
  FlowKey key;
  Timestamp start_ts;
  Timestamp end_ts;
  DirectionStats a2b;
  DirectionStats b2a;
  bool syn_a2b = false;
  bool synack_b2a = false;
  bool established = false;  // TCP three-way handshake completed
  FlowState state = FlowState::kReq;
  std::uint8_t first_icmp_type = 0;

  bool operator==(const FlowRecord&) const = default;

  std::uint64_t total_packets() const { return a2b.packets + b2a.packets; }
};

struct FlowTimeouts {
  double tcp_idle_s = 60.0;
  double other_idle_s = 30.0;
};

// Groups time-ordered packets into bidirectional flows. A flow closes on an
// RST, after FINs from both sides (the final pure ACK still attaches), or
// when the idle gap exceeds the protocol's timeout. Output is ordered by
// flow start (ties by first-packet order).
std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, FlowTimeouts timeouts = {});

// Same as assemble_flows, also returning the flow index of every packet.
struct FlowAssembly {
  std::vector<FlowRecord> flows;
  std::vector<std::size_t> packet_flow;
};
FlowAssembly assemble_flows_indexed(std::span<const PacketRecord> packets, FlowTimeouts timeouts = {});

FlowState flow_state(const FlowRecord& flow);

// Per-flow features. TCP-only fields are nullopt (structurally missing) for
// UDP/ICMP flows; DstTCPBase is also missing when the responder never spoke.
struct FlowFeatureVector {
  std::optional<double> mss_requested_a2b;
  std::optional<double> dst_tcp_base;
  std::optional<double> min_segm_size_a2b;
  std::optional<double> max_segm_size_a2b;
  std::optional<double> idletime_max_a2b;  // seconds
  std::optional<double> fin_pkts_a2b;
  std::optional<double> adv_wind_scale_a2b;
  double pc_ratio = 0.0;
  FlowState state = FlowState::kReq;
  Protocol proto = Protocol::kTcp;
  double s_ttl = 0.0;
  double d_ttl = 0.0;
  double dport = 0.0;
  double dur = 0.0;  // seconds
  double s_mean_pkt_sz = 0.0;
  double d_mean_pkt_sz = 0.0;
  double src_pkts = 0.0;
  double dst_pkts = 0.0;
  double src_bytes = 0.0;
  double dst_bytes = 0.0;

  bool operator==(const FlowFeatureVector&) const = default;
};

FlowFeatureVector extract_flow_features(const FlowRecord& flow);

}  // namespace recon
