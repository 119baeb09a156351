#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "recon/capture_io.hpp"
#include "recon/flow_features.hpp"

namespace recon {

// nmap-documented probe signatures. kNone covers everything else.
enum class ProbeSignal : std::uint8_t { kIcmpEcho, kSyn, kSynAck, kNull, kFin, kXmas, kFinAck, kNone };

inline constexpr std::size_t kProbeSignalCount = 7;  // excluding kNone

std::string_view to_string(ProbeSignal s);
// Column name used in feature tables, e.g. "syn_count".
std::string_view counter_name(ProbeSignal s);

ProbeSignal classify_probe_signal(const PacketRecord& p);

struct TemporalFeatureRow {
  Timestamp start_ts;
  Ipv4 src_ip;
  std::array<std::uint32_t, kProbeSignalCount> counts{};

  std::uint32_t count(ProbeSignal s) const { return counts[static_cast<std::size_t>(s)]; }
  bool operator==(const TemporalFeatureRow&) const = default;
};

enum class WindowAnchor {
  kForward,   // [t0, t0 + w)
  kTrailing,  // (t0 - w, t0]
};

struct TemporalConfig {
  double window_s = 2.0;
  WindowAnchor anchor = WindowAnchor::kForward;
};

// One row per flow: signal counts over packets sent by the flow's initiator
// inside the window anchored at the flow start.
std::vector<TemporalFeatureRow> count_signals_windowed(std::span<const PacketRecord> packets,
                                                       std::span<const FlowRecord> flows,
                                                       TemporalConfig config = {});

}  // namespace recon
