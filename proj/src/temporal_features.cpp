#include "recon/temporal_features.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace recon {

std::string_view to_string(ProbeSignal s) {
  switch (s) {
    case ProbeSignal::kIcmpEcho: return "ICMP";
    case ProbeSignal::kSyn: return "SYN";
    case ProbeSignal::kSynAck: return "SYNACK";
    case ProbeSignal::kNull: return "NULL";
    case ProbeSignal::kFin: return "FIN";
    case ProbeSignal::kXmas: return "XMAS";
    case ProbeSignal::kFinAck: return "FINACK";
    case ProbeSignal::kNone: return "NONE";
  }
  return "?";
}

std::string_view counter_name(ProbeSignal s) {
  switch (s) {
    case ProbeSignal::kIcmpEcho: return "icmp_count";
    case ProbeSignal::kSyn: return "syn_count";
    case ProbeSignal::kSynAck: return "synack_count";
    case ProbeSignal::kNull: return "null_count";
    case ProbeSignal::kFin: return "fin_count";
    case ProbeSignal::kXmas: return "xmas_count";
    case ProbeSignal::kFinAck: return "finack_count";
    case ProbeSignal::kNone: return "none_count";
  }
  return "?";
}

ProbeSignal classify_probe_signal(const PacketRecord& p) {
  if (p.proto == Protocol::kIcmp) {
    return p.icmp_type == kIcmpEchoRequest ? ProbeSignal::kIcmpEcho : ProbeSignal::kNone;
  }
  if (p.proto != Protocol::kTcp) return ProbeSignal::kNone;
  using namespace tcp_flags;
  switch (p.tcp_flags) {
    case kSyn: return ProbeSignal::kSyn;
    case kSyn | kAck: return ProbeSignal::kSynAck;
    case 0: return ProbeSignal::kNull;
    case kFin: return ProbeSignal::kFin;
    case kPsh | kUrg | kFin: return ProbeSignal::kXmas;
    case kFin | kAck: return ProbeSignal::kFinAck;
    default: return ProbeSignal::kNone;
  }
}

std::vector<TemporalFeatureRow> count_signals_windowed(std::span<const PacketRecord> packets,
                                                       std::span<const FlowRecord> flows,
                                                       TemporalConfig config) {
  if (!(config.window_s > 0)) throw Error(ErrorCode::kInvalidArgument, "window must be > 0");
  const std::int64_t window = seconds_to_us(config.window_s);

  // Per-source, time-sorted list of signal-bearing packets.
  struct Hit {
    std::int64_t ts;
    std::uint8_t signal;
  };
  std::unordered_map<std::uint32_t, std::vector<Hit>> hits;
  for (const auto& p : packets) {
    const ProbeSignal s = classify_probe_signal(p);
    if (s == ProbeSignal::kNone) continue;
    hits[p.src_ip.value].push_back({p.ts.us, static_cast<std::uint8_t>(s)});
  }
  for (auto& [ip, list] : hits) {
    std::stable_sort(list.begin(), list.end(), [](const Hit& a, const Hit& b) { return a.ts < b.ts; });
  }

  // Flows of the same source are swept in start order with two pointers
  // [lo, hi) into that source's hit list, maintaining running counts.
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> flows_by_source;
  for (std::size_t f = 0; f < flows.size(); ++f) flows_by_source[flows[f].key.initiator_ip.value].push_back(f);

  std::vector<TemporalFeatureRow> rows(flows.size());
  for (auto& [ip, order] : flows_by_source) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return flows[a].start_ts < flows[b].start_ts; });
    const auto found = hits.find(ip);
    static const std::vector<Hit> kEmpty;
    const auto& list = found == hits.end() ? kEmpty : found->second;

    std::array<std::uint32_t, kProbeSignalCount> running{};
    std::size_t lo = 0, hi = 0;
    for (const std::size_t f : order) {
      const std::int64_t t0 = flows[f].start_ts.us;
      // Forward: include ts in [t0, t0 + w). Trailing: include ts in (t0 - w, t0].
      const auto inside_upper = [&](std::int64_t ts) {
        return config.anchor == WindowAnchor::kForward ? ts < t0 + window : ts <= t0;
      };
      const auto below_lower = [&](std::int64_t ts) {
        return config.anchor == WindowAnchor::kForward ? ts < t0 : ts <= t0 - window;
      };
      while (hi < list.size() && inside_upper(list[hi].ts)) ++running[list[hi++].signal];
      while (lo < hi && below_lower(list[lo].ts)) --running[list[lo++].signal];

      TemporalFeatureRow& row = rows[f];
      row.start_ts = flows[f].start_ts;
      row.src_ip = flows[f].key.initiator_ip;
      row.counts = running;
    }
  }
  return rows;
}

}  // namespace recon
