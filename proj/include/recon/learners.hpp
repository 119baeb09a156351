#pragma once

#include <cstdint>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "recon/matrix.hpp"
#include "recon/rng.hpp"

namespace recon {

using Json = nlohmann::ordered_json;

enum class LearnerKind { kGnb, kLogReg, kKnn, kSvm, kTree, kForest, kXTrees };

std::string_view to_string(LearnerKind k);
LearnerKind parse_learner_kind(std::string_view s);

struct GnbParams {
  double variance_smoothing = 1e-9;
};

enum class Penalty { kNone, kL2 };

struct LogRegParams {
  double C = 1.0;  // inverse L2 strength; unused with Penalty::kNone
  int max_iter = 200;
  double tol = 1e-4;  // on the max-norm of the mean log-loss gradient
  Penalty penalty = Penalty::kL2;
};

enum class KnnWeights { kUniform, kDistance };

struct KnnParams {
  int k = 3;
  double p = 1.0;  // Minkowski exponent
  KnnWeights weights = KnnWeights::kDistance;
  int leaf_size = 30;  // recorded only; search is brute force
};

enum class SvmKernel { kRbf, kPoly, kLinear };

struct SvmParams {
  double C = 1.0;
  SvmKernel kernel = SvmKernel::kRbf;
  double gamma = 1.0;
  double degree = 3.0;  // poly only
  double coef0 = 0.0;   // poly only
  double tol = 1e-3;    // maximal KKT violation at termination
  long max_iter = 1000000;
  double cache_mb = 200.0;
};

// Shared by TREE, FOREST and XTREES; a single TREE ignores n_trees.
struct TreeParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf = 1;
  // Candidate features per split. Unset: all for TREE, sqrt(d) otherwise.
  std::optional<int> max_features;
  std::uint64_t seed = 0;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kGnb;
  std::variant<GnbParams, LogRegParams, KnnParams, SvmParams, TreeParams> params;

  static LearnerSpec gnb(GnbParams p = {}) { return {LearnerKind::kGnb, p}; }
  static LearnerSpec logreg(LogRegParams p = {}) { return {LearnerKind::kLogReg, p}; }
  static LearnerSpec knn(KnnParams p = {}) { return {LearnerKind::kKnn, p}; }
  static LearnerSpec svm(SvmParams p = {}) { return {LearnerKind::kSvm, p}; }
  static LearnerSpec tree(TreeParams p = {}) { return {LearnerKind::kTree, p}; }
  static LearnerSpec forest(TreeParams p = {}) { return {LearnerKind::kForest, p}; }
  static LearnerSpec xtrees(TreeParams p = {}) { return {LearnerKind::kXTrees, p}; }

  // Accepts missing keys (defaults) and rejects unknown ones.
  static LearnerSpec from_json(const nlohmann::json& j);
  Json to_json() const;
  // Sets one hyperparameter from a JSON scalar, e.g. ("k", 5).
  void set(std::string_view name, const nlohmann::json& value);
  void validate() const;  // throws kInvalidArgument

  // The seed of stochastic kinds, if any.
  std::optional<std::uint64_t> seed() const;
  void set_seed(std::uint64_t seed);
};

// Per-feature affine map onto [0, 1] fitted on training rows; constant
// features map to 0.
struct MinMaxScaler {
  std::vector<double> lo, scale;

  static MinMaxScaler fit(const Matrix& x);
  Matrix transform(const Matrix& x) const;
  void transform_row(std::span<const double> in, std::span<double> out) const;
  Json to_json() const;
  static MinMaxScaler from_json(const nlohmann::json& j);
};

class Learner {
 public:
  virtual ~Learner() = default;

  virtual LearnerKind kind() const = 0;
  const std::vector<std::string>& schema() const { return schema_; }

  // Probability of the positive class; the negative class is its complement.
  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<double> predict_proba(const LabeledData& data) const;  // also checks names
  std::vector<int> predict(const Matrix& x, double threshold = 0.5) const;

  // False when an iterative fit stopped on its iteration budget.
  bool converged() const { return converged_; }
  virtual std::optional<std::vector<double>> feature_importances() const { return std::nullopt; }

  Json to_json() const;

  static std::unique_ptr<Learner> from_json(const nlohmann::json& j);

 protected:
  virtual std::vector<double> positive_proba(const Matrix& x) const = 0;
  virtual Json params_json() const = 0;
  virtual Json fitted_json() const = 0;

  std::vector<std::string> schema_;
  bool converged_ = true;

  friend std::unique_ptr<Learner> fit_learner(const LearnerSpec&, const LabeledData&);
};

std::unique_ptr<Learner> fit_learner(const LearnerSpec& spec, const LabeledData& train);

// ---------------------------------------------------------------------------

class GnbModel final : public Learner {
 public:
  static std::unique_ptr<GnbModel> fit(const LabeledData& train, const GnbParams& params);
  static std::unique_ptr<GnbModel> from_fitted(const nlohmann::json& params, const nlohmann::json& fitted);
  LearnerKind kind() const override { return LearnerKind::kGnb; }

  GnbParams params;
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> mean, var;
  std::optional<int> single_class;  // set when training saw one class only

 protected:
  std::vector<double> positive_proba(const Matrix& x) const override;
  Json params_json() const override;
  Json fitted_json() const override;
};

class LogRegModel final : public Learner {
 public:
  static std::unique_ptr<LogRegModel> fit(const LabeledData& train, const LogRegParams& params);
  static std::unique_ptr<LogRegModel> from_fitted(const nlohmann::json& params, const nlohmann::json& fitted);
  LearnerKind kind() const override { return LearnerKind::kLogReg; }

  // Coefficients in the original (unscaled) feature space.
  std::vector<double> coefficients() const;
  double intercept() const;

  LogRegParams params;
  MinMaxScaler scaler;
  std::vector<double> w;  // in scaled space
  double b = 0.0;
  int iterations = 0;
  double final_grad_norm = 0.0;

 protected:
  std::vector<double> positive_proba(const Matrix& x) const override;
  Json params_json() const override;
  Json fitted_json() const override;
};

class KnnModel final : public Learner {
 public:
  static std::unique_ptr<KnnModel> fit(const LabeledData& train, const KnnParams& params);
  static std::unique_ptr<KnnModel> from_fitted(const nlohmann::json& params, const nlohmann::json& fitted);
  LearnerKind kind() const override { return LearnerKind::kKnn; }

  KnnParams params;
  MinMaxScaler scaler;
  Matrix x;  // scaled training rows
  std::vector<int> y;

 protected:
  std::vector<double> positive_proba(const Matrix& x) const override;
  Json params_json() const override;
  Json fitted_json() const override;
};

class SvmModel final : public Learner {
 public:
  static std::unique_ptr<SvmModel> fit(const LabeledData& train, const SvmParams& params);
  static std::unique_ptr<SvmModel> from_fitted(const nlohmann::json& params, const nlohmann::json& fitted);
  LearnerKind kind() const override { return LearnerKind::kSvm; }

  // Raw decision value sum_i alpha_i y_i K(x_i, x) - rho.
  std::vector<double> decision_function(const Matrix& x) const;

  SvmParams params;
  MinMaxScaler scaler;
  Matrix support;                  // scaled support vectors
  std::vector<double> dual_coef;   // alpha_i * y_i for each support vector
  double rho = 0.0;
  double platt_a = 0.0, platt_b = 0.0;  // P(y=1|f) = 1 / (1 + exp(a f + b))
  long iterations = 0;
  // Full training duals and signs, kept for diagnostics.
  std::vector<double> alpha;
  std::vector<int> y_sign;

 protected:
  std::vector<double> positive_proba(const Matrix& x) const override;
  Json params_json() const override;
  Json fitted_json() const override;
};

// Binary CART tree over dense features.
struct Tree {
  struct Node {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1, right = -1;
    double value = 0.0;  // positive fraction of the node's samples
  };
  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
  Json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

enum class SplitMode { kBest, kRandom };

struct TreeFitOptions {
  int max_depth = 0;
  int min_leaf = 1;
  int max_features = 0;  // 0 = all
  SplitMode mode = SplitMode::kBest;
};

// Fits on the given rows (duplicates allowed), accumulating the weighted
// impurity decrease per feature into `importance`.
Tree fit_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
              const TreeFitOptions& options, Rng* rng, std::vector<double>& importance);

class TreeEnsembleModel final : public Learner {
 public:
  static std::unique_ptr<TreeEnsembleModel> fit(const LabeledData& train, LearnerKind kind, const TreeParams& params);
  static std::unique_ptr<TreeEnsembleModel> from_fitted(LearnerKind kind, const nlohmann::json& params,
                                                        const nlohmann::json& fitted);
  LearnerKind kind() const override { return kind_; }
  std::optional<std::vector<double>> feature_importances() const override { return importances; }

  TreeParams params;
  std::vector<Tree> trees;
  std::vector<double> importances;  // sums to 1 when any split exists

 protected:
  std::vector<double> positive_proba(const Matrix& x) const override;
  Json params_json() const override;
  Json fitted_json() const override;

 private:
  LearnerKind kind_ = LearnerKind::kTree;
};

}  // namespace recon
