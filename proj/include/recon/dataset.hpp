#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "recon/feature_table.hpp"
#include "recon/temporal_features.hpp"

namespace recon {

// ---------------------------------------------------------------------------
// Feature-set construction

// Argus-style per-flow columns (all protocols).
FeatureTable build_flow_set(std::span<const FlowRecord> flows);
// Tcptrace-style session columns; rows for TCP flows only.
FeatureTable build_session_set(std::span<const FlowRecord> flows);
// Windowed probe-signal counters; one row per flow.
FeatureTable build_temporal_set(std::span<const FlowRecord> flows, std::span<const TemporalFeatureRow> rows);

enum class Coverage {
  kAll,      // a key absent from this set drops the row
  kTcpOnly,  // non-TCP keys absent from this set get structural-missing cells
};

struct JoinPart {
  const FeatureTable* table;
  Coverage coverage;
};

// Inner join of `anchor` with every part on RowKey, in anchor row order.
FeatureTable merge_feature_sets(const FeatureTable& anchor, std::span<const JoinPart> parts);
FeatureTable merge_feature_sets(const FeatureTable& flow_set, const FeatureTable& session_set,
                                const FeatureTable& temporal_set);

// ---------------------------------------------------------------------------
// Preprocessing

enum class DropReason { kRepeating, kNoVariation, kEmpty };
std::string_view to_string(DropReason r);

struct DropReport {
  struct Entry {
    std::string column;
    DropReason reason;
    std::string duplicate_of;  // kRepeating only
  };
  std::vector<Entry> dropped;
};

struct DropConfig {
  double max_missing_fraction = 0.9;
};

struct DropResult {
  FeatureTable table;
  DropReport report;
};

// Removes columns missing in more than the configured fraction of rows,
// columns with no variation, and columns identical to an earlier one.
// Structural-missing cells count as a distinct value when judging variation
// and identity; plausible-missing cells are ignored.
DropResult drop_uninformative(const FeatureTable& table, DropConfig config = {});

// Each categorical column with v observed values becomes v binary columns
// `<col>_<value>` (values in lexicographic order), placed where the source
// column was. Missing cells give all-zero groups with the mask preserved.
FeatureTable one_hot_encode(const FeatureTable& table);

enum class NumericFill { kMean, kMedian };

struct ImputePolicy {
  NumericFill numeric = NumericFill::kMean;
  double structural_sentinel = -1.0;
};

// Fill values learned from training rows only.
struct ImputeStats {
  std::vector<std::string> columns;
  std::vector<double> fill;     // per column; NaN where no value was observed
  ImputePolicy policy;
};

ImputeStats fit_impute(const FeatureTable& train, ImputePolicy policy = {});
FeatureTable apply_impute(const FeatureTable& table, const ImputeStats& stats);
// Fits on `table` itself and applies.
FeatureTable impute(const FeatureTable& table, ImputePolicy policy = {});

// ---------------------------------------------------------------------------
// Labels

enum class LabelSource { kRuleEngine, kSignatureIds, kExpertGroundTruth };
std::string_view to_string(LabelSource s);

struct LabelSet {
  LabelSource source;
  std::vector<int> verdicts;  // empty = source not available
};

struct ConflictReport {
  std::size_t rows = 0;
  std::size_t disagreements = 0;
  std::vector<std::pair<LabelSource, std::size_t>> positives;
};

struct CombinedLabels {
  std::vector<int> labels;
  ConflictReport report;
};

// Logical OR over the available sources.
CombinedLabels combine_labels(std::span<const LabelSet> sets);

// ---------------------------------------------------------------------------
// Split

struct SplitConfig {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct SplitResult {
  FeatureTable train, val, test;
  std::vector<std::size_t> train_rows, val_rows, test_rows;
};

SplitResult split(const FeatureTable& table, SplitConfig config);

// ---------------------------------------------------------------------------
// Persistence

// Header cells are `name|kind|origin|group|levels` for features (plain names
// are accepted on input and typed by inference), index columns
// start_ts,src_ip,dst_ip,src_port,dst_port,proto, optional `label`, and one
// `<name>__missing` sidecar (P/S) per column that has missing cells.
void to_csv(const FeatureTable& table, std::ostream& out);
std::string to_csv(const FeatureTable& table);
FeatureTable from_csv(std::istream& in);
FeatureTable from_csv_text(std::string_view text);

// UNSW-NB15 CSV (headered, or the raw 49-column release without header).
// label = 1 iff attack_cat is Reconnaissance.
FeatureTable load_unsw_csv(std::istream& in);

}  // namespace recon
