#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "recon/flow_features.hpp"
#include "recon/temporal_features.hpp"

namespace recon {

// Positive class = probing.
struct ConfusionMatrix {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

// Degenerate denominators: precision with tp+fp=0 is 1 when fn=0 else 0;
// recall with tp+fn=0 is 1; far with fp+tn=0 is 0; f1 with P+R=0 is 0.
struct Metrics {
  double precision = 0, recall = 0, f1 = 0, accuracy = 0, far = 0;
};

Metrics metrics(const ConfusionMatrix& m);

struct RocPoint {
  double fpr, tpr, threshold;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0;
};

// Thresholds sweep the distinct scores in descending order; a row is
// positive at threshold t when score >= t. The first point has threshold +inf.
RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores);

struct EvalReport {
  ConfusionMatrix matrix;
  Metrics metrics;
  double threshold = 0.5;
  std::optional<RocCurve> roc;
};

// Labels are score >= threshold. ROC is attached when both classes occur.
EvalReport evaluate(std::span<const int> y_true, std::span<const double> scores, double threshold = 0.5);
EvalReport evaluate_labels(std::span<const int> y_true, std::span<const int> y_pred);

nlohmann::ordered_json to_json(const ConfusionMatrix& m);
nlohmann::ordered_json to_json(const Metrics& m);
nlohmann::ordered_json to_json(const EvalReport& r);
void write_roc_csv(const RocCurve& roc, std::ostream& out);

// ---------------------------------------------------------------------------
// Misuse baseline

enum class RuleOp { kGe, kGt, kEq, kIn };

// Value compared against a named field: number, or string for categorical
// fields (proto, state). `in` takes a list.
using RuleValue = std::variant<double, std::string>;

struct RuleCondition {
  std::string field;
  RuleOp op = RuleOp::kGe;
  std::vector<RuleValue> values;  // exactly one unless op == kIn
};

// Conjunction of conditions.
struct MisuseRule {
  std::string id;
  std::vector<RuleCondition> conditions;
};

// Fields a rule may reference.
std::span<const std::string_view> misuse_fields();

// Accepts a JSON array of {id, field, op, value} or {id, all: [{field, op, value}, ...]}.
std::vector<MisuseRule> parse_rules(const nlohmann::json& doc);  // throws kBadRule
nlohmann::ordered_json rules_to_json(std::span<const MisuseRule> rules);

// nmap-style signatures: SYN-rate, connect-rate, ICMP sweep and XMAS/FIN
// packet patterns. Deliberately has no NULL-scan rule.
std::vector<MisuseRule> default_rules();

struct MisuseResult {
  std::vector<int> verdicts;
  std::vector<std::pair<std::string, std::size_t>> rule_hits;  // in rule order
};

bool rule_matches(const MisuseRule& rule, const FlowFeatureVector& flow, const TemporalFeatureRow& temporal);

MisuseResult misuse_detect(std::span<const FlowRecord> flows, std::span<const TemporalFeatureRow> temporal,
                           std::span<const MisuseRule> rules);

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonReport {
  EvalReport anomaly;
  EvalReport misuse;
  double recall_delta = 0;  // anomaly - misuse
  double f1_delta = 0;
  double precision_delta = 0;
  std::vector<std::size_t> disagreements;  // rows whose verdicts differ
};

ComparisonReport compare(std::span<const int> y_true, std::span<const int> anomaly_pred,
                         std::span<const int> misuse_pred);

nlohmann::ordered_json to_json(const ComparisonReport& r);

}  // namespace recon
