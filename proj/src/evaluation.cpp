#include "recon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "recon/common.hpp"
#include "recon/feature_table.hpp"

namespace recon {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::kLengthMismatch, "confusion: " + std::to_string(y_true.size()) + " labels vs " +
                                                std::to_string(y_pred.size()) + " predictions");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1))
      throw Error(ErrorCode::kInvalidArgument, "confusion: labels must be 0 or 1");
    if (t && p) ++m.tp;
    else if (!t && p) ++m.fp;
    else if (t && !p) ++m.fn;
    else ++m.tn;
  }
  return m;
}

Metrics metrics(const ConfusionMatrix& m) {
  if (m.tp < 0 || m.fp < 0 || m.fn < 0 || m.tn < 0)
    throw Error(ErrorCode::kInvalidArgument, "confusion counts must be non-negative");
  if (m.total() == 0) throw Error(ErrorCode::kInvalidArgument, "metrics of an empty confusion matrix");
  const auto d = [](std::int64_t v) { return static_cast<double>(v); };
  Metrics out;
  if (m.tp + m.fp == 0) out.precision = m.fn == 0 ? 1.0 : 0.0;
  else out.precision = d(m.tp) / d(m.tp + m.fp);
  out.recall = m.tp + m.fn == 0 ? 1.0 : d(m.tp) / d(m.tp + m.fn);
  const double pr = out.precision + out.recall;
  out.f1 = pr == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / pr;
  out.accuracy = d(m.tp + m.tn) / d(m.total());
  out.far = m.fp + m.tn == 0 ? 0.0 : d(m.fp) / d(m.fp + m.tn);
  return out;
}

RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size())
    throw Error(ErrorCode::kLengthMismatch, "roc_auc: labels and scores differ in length");
  std::int64_t pos = 0, neg = 0;
  for (int y : y_true) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "roc_auc: labels must be 0 or 1");
    (y ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kOneClassOnly, "roc_auc needs both classes");
  for (double s : scores)
    if (std::isnan(s)) throw Error(ErrorCode::kInvalidArgument, "roc_auc: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Twice the area in units of (pos * neg); exact in integer arithmetic.
  std::int64_t area2 = 0;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::int64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (y_true[order[i]] ? dtp : dfp) += 1;
    area2 += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

EvalReport evaluate(std::span<const int> y_true, std::span<const double> scores, double threshold) {
  if (y_true.size() != scores.size())
    throw Error(ErrorCode::kLengthMismatch, "evaluate: " + std::to_string(y_true.size()) + " labels vs " +
                                                std::to_string(scores.size()) + " scores");
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
  EvalReport r = evaluate_labels(y_true, pred);
  r.threshold = threshold;
  const bool both = std::find(y_true.begin(), y_true.end(), 0) != y_true.end() &&
                    std::find(y_true.begin(), y_true.end(), 1) != y_true.end();
  if (both) r.roc = roc_auc(y_true, scores);
  return r;
}

EvalReport evaluate_labels(std::span<const int> y_true, std::span<const int> y_pred) {
  EvalReport r;
  r.matrix = confusion(y_true, y_pred);
  r.metrics = metrics(r.matrix);
  return r;
}

nlohmann::ordered_json to_json(const ConfusionMatrix& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

nlohmann::ordered_json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"accuracy", m.accuracy}, {"far", m.far}};
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["matrix"] = to_json(r.matrix);
  j["metrics"] = to_json(r.metrics);
  j["threshold"] = r.threshold;
  if (r.roc) {
    j["auc"] = r.roc->auc;
    auto& pts = j["roc"] = nlohmann::ordered_json::array();
    for (const auto& p : r.roc->points) {
      nlohmann::ordered_json t = std::isinf(p.threshold) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p.threshold);
      pts.push_back({p.fpr, p.tpr, t});
    }
  }
  return j;
}

void write_roc_csv(const RocCurve& roc, std::ostream& out) {
  out << "fpr,tpr,threshold\r\n";
  for (const auto& p : roc.points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << "\r\n";
}

ComparisonReport compare(std::span<const int> y_true, std::span<const int> anomaly_pred,
                         std::span<const int> misuse_pred) {
  if (anomaly_pred.size() != y_true.size() || misuse_pred.size() != y_true.size())
    throw Error(ErrorCode::kRowSetMismatch, "compare: anomaly, misuse and truth cover different row sets");
  ComparisonReport r;
  r.anomaly = evaluate_labels(y_true, anomaly_pred);
  r.misuse = evaluate_labels(y_true, misuse_pred);
  r.recall_delta = r.anomaly.metrics.recall - r.misuse.metrics.recall;
  r.f1_delta = r.anomaly.metrics.f1 - r.misuse.metrics.f1;
  r.precision_delta = r.anomaly.metrics.precision - r.misuse.metrics.precision;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (anomaly_pred[i] != misuse_pred[i]) r.disagreements.push_back(i);
  return r;
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["anomaly"] = to_json(r.anomaly);
  j["misuse"] = to_json(r.misuse);
  j["recall_delta"] = r.recall_delta;
  j["f1_delta"] = r.f1_delta;
  j["precision_delta"] = r.precision_delta;
  j["disagreements"] = r.disagreements;
  return j;
}

}  // namespace recon
