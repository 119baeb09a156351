#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "recon/capture_io.hpp"
#include "recon/feature_table.hpp"
#include "json.hpp"
#include "recon/flow_features.hpp"

namespace recon {

using Json = nlohmann::ordered_json;

enum class ScanType { kSyn, kFin, kNull, kXmas, kPingSweep, kConnect };
std::string_view to_string(ScanType t);
ScanType parse_scan_type(std::string_view s);

struct ScanBurst {
  ScanType type = ScanType::kSyn;
  Ipv4 source_ip;
  Ipv4 target_first, target_last;  // inclusive
  std::uint16_t port_first = 1, port_last = 1024;  // inclusive; unused by ping sweeps
  double gap_s = 0.01;      // between consecutive probes
  double start_s = 0.0;     // offset from the scenario epoch
  double open_fraction = 0.1;
  double alive_fraction = 1.0;  // ping sweeps: share of targets that answer

  std::size_t probe_count() const;
  void validate() const;  // throws kInvalidArgument
};

struct BenignProfile {
  double mean_duration_s = 6.06;
  double mean_bytes = 41385.0;
  double mean_packets = 62.0;
};

// Address plan for benign sessions: clients 10.0.x.y talk to servers 10.1.0.z.
struct BenignNetwork {
  std::size_t n_clients = 200;
  std::size_t n_servers = 20;
  double span_s = 600.0;  // session starts are uniform over [0, span)
};

struct ScenarioConfig {
  std::size_t n_benign_flows = 4500;
  std::vector<ScanBurst> bursts;
  BenignProfile profile;
  BenignNetwork network;
  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
};

struct GroundTruthEntry {
  RowKey key;
  bool probing = false;
};

struct GroundTruth {
  std::vector<GroundTruthEntry> entries;

  // Verdict per flow; throws kCoverageMismatch when a flow has no entry.
  std::vector<int> labels_for(std::span<const FlowRecord> flows) const;
  std::vector<int> labels_for(std::span<const RowKey> rows) const;
};

struct GeneratedTraffic {
  std::vector<PacketRecord> packets;  // globally time-ordered
  GroundTruth truth;
};

// All timestamps are offsets from this epoch.
inline constexpr std::int64_t kScenarioEpochSec = 1'600'000'000;

GeneratedTraffic gen_benign(const BenignProfile& profile, std::size_t n, std::uint64_t seed,
                            const BenignNetwork& network = {});
GeneratedTraffic gen_probe(const ScanBurst& burst, std::uint64_t seed);
GeneratedTraffic gen_dataset(const ScenarioConfig& scenario);

struct ScanMix {
  double syn = 0.30, connect = 0.10, fin = 0.15, xmas = 0.15, null = 0.10, ping_sweep = 0.20;
};

// total_flows * probe_fraction probe flows (rounded), split over scan types
// by `mix` with largest-remainder rounding, in bursts of at most 100 probes.
ScenarioConfig default_scenario(std::size_t total_flows, double probe_fraction, std::uint64_t seed,
                                const ScanMix& mix = {});

// Columns start_ts,src_ip,src_port,dst_ip,dst_port,proto,label (probing|benign).
void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out);
GroundTruth read_ground_truth_csv(std::istream& in);

}  // namespace recon
