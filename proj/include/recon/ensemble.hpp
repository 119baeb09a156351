#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "recon/learners.hpp"

namespace recon {

struct BaggingSpec {
  LearnerSpec base = LearnerSpec::knn();
  int n_estimators = 10;
  double max_samples = 1.0;   // fraction of rows per member
  double max_features = 1.0;  // fraction of features per member
  bool bootstrap = true;
  bool bootstrap_features = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws kInvalidArgument
  Json to_json() const;
  static BaggingSpec from_json(const nlohmann::json& j);
};

struct BaggingMember {
  std::vector<std::size_t> rows;      // training rows drawn for this member
  std::vector<std::size_t> features;  // feature columns, in drawn order
  std::unique_ptr<Learner> model;
};

class BaggingModel {
 public:
  static BaggingModel fit(const LabeledData& train, const BaggingSpec& spec);

  // Mean of member probabilities, each computed on its own feature subset.
  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<double> predict_proba(const LabeledData& data) const;  // also checks names
  std::vector<int> predict(const Matrix& x, double threshold = 0.5) const;

  const BaggingSpec& spec() const { return spec_; }
  const std::vector<BaggingMember>& members() const { return members_; }
  const std::vector<std::string>& schema() const { return schema_; }

  Json to_json() const;
  static BaggingModel from_json(const nlohmann::json& j);

 private:
  BaggingSpec spec_;
  std::vector<std::string> schema_;
  std::vector<BaggingMember> members_;
};

// Number of items a fraction selects out of n: ceil(fraction * n), at least 1.
std::size_t fraction_count(double fraction, std::size_t n);

// ---------------------------------------------------------------------------
// Random-search tuning

struct ParamRange {
  enum class Kind { kUniform, kLogUniform, kInt, kChoice };
  Kind kind = Kind::kUniform;
  double lo = 0, hi = 1;           // kUniform / kLogUniform / kInt (inclusive)
  std::vector<nlohmann::json> choices;  // kChoice

  nlohmann::json sample(Rng& rng) const;
  static ParamRange uniform(double lo, double hi) { return {Kind::kUniform, lo, hi, {}}; }
  static ParamRange log_uniform(double lo, double hi) { return {Kind::kLogUniform, lo, hi, {}}; }
  static ParamRange integer(long lo, long hi) { return {Kind::kInt, double(lo), double(hi), {}}; }
  static ParamRange choice(std::vector<nlohmann::json> c) { return {Kind::kChoice, 0, 0, std::move(c)}; }
};

// Names are base-learner hyperparameters, or one of the bagging keys
// n_estimators, max_samples, max_features, bootstrap, bootstrap_features.
struct SearchSpace {
  std::vector<std::pair<std::string, ParamRange>> params;

  static SearchSpace from_json(const nlohmann::json& j);
};

struct Trial {
  BaggingSpec spec;
  double score = 0.0;
  std::string error;  // non-empty when the trial failed to fit
};

struct TuneResult {
  BaggingSpec best;
  double best_score = 0.0;
  std::vector<Trial> trials;

  Json to_json() const;
};

using Scorer = std::function<double(std::span<const int> y_true, std::span<const int> y_pred)>;

double f1_scorer(std::span<const int> y_true, std::span<const int> y_pred);

// Draws `budget` specs from `space` around `base`, scores each on `val`, and
// returns the first best by score in trial order.
TuneResult random_search_tune(const BaggingSpec& base, const SearchSpace& space, int budget,
                              const LabeledData& train, const LabeledData& val, std::uint64_t seed,
                              const Scorer& scorer = f1_scorer);

}  // namespace recon
