#include "recon/learners.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "recon/common.hpp"

namespace recon {

std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::kGnb: return "gnb";
    case LearnerKind::kLogReg: return "logreg";
    case LearnerKind::kKnn: return "knn";
    case LearnerKind::kSvm: return "svm";
    case LearnerKind::kTree: return "tree";
    case LearnerKind::kForest: return "forest";
    case LearnerKind::kXTrees: return "xtrees";
  }
  return "?";
}

// Case-insensitive: "KNN" and "knn" name the same kind.
LearnerKind parse_learner_kind(std::string_view s) {
  const auto same = [](std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
  };
  for (auto k : {LearnerKind::kGnb, LearnerKind::kLogReg, LearnerKind::kKnn, LearnerKind::kSvm, LearnerKind::kTree,
                 LearnerKind::kForest, LearnerKind::kXTrees})
    if (same(to_string(k), s)) return k;
  throw Error(ErrorCode::kInvalidArgument, "unknown learner kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// LearnerSpec

namespace {

LearnerSpec default_spec(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kGnb: return LearnerSpec::gnb();
    case LearnerKind::kLogReg: return LearnerSpec::logreg();
    case LearnerKind::kKnn: return LearnerSpec::knn();
    case LearnerKind::kSvm: return LearnerSpec::svm();
    case LearnerKind::kTree: return LearnerSpec::tree();
    case LearnerKind::kForest: return LearnerSpec::forest();
    case LearnerKind::kXTrees: return LearnerSpec::xtrees();
  }
  throw Error(ErrorCode::kInternal, "unhandled learner kind");
}

double as_number(std::string_view name, const nlohmann::json& v) {
  if (!v.is_number()) throw Error(ErrorCode::kInvalidArgument, "hyperparameter '" + std::string(name) + "' must be numeric");
  return v.get<double>();
}

long as_integer(std::string_view name, const nlohmann::json& v) {
  const double d = as_number(name, v);
  if (d != std::floor(d)) throw Error(ErrorCode::kInvalidArgument, "hyperparameter '" + std::string(name) + "' must be an integer");
  return static_cast<long>(d);
}

std::string as_text(std::string_view name, const nlohmann::json& v) {
  if (!v.is_string()) throw Error(ErrorCode::kInvalidArgument, "hyperparameter '" + std::string(name) + "' must be a string");
  return v.get<std::string>();
}

[[noreturn]] void unknown_param(LearnerKind kind, std::string_view name) {
  throw Error(ErrorCode::kInvalidArgument,
              "unknown hyperparameter '" + std::string(name) + "' for " + std::string(to_string(kind)));
}

}  // namespace

void LearnerSpec::set(std::string_view name, const nlohmann::json& v) {
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GnbParams>) {
          if (name == "variance_smoothing") p.variance_smoothing = as_number(name, v);
          else unknown_param(kind, name);
        } else if constexpr (std::is_same_v<P, LogRegParams>) {
          if (name == "C") p.C = as_number(name, v);
          else if (name == "max_iter") p.max_iter = static_cast<int>(as_integer(name, v));
          else if (name == "tol") p.tol = as_number(name, v);
          else if (name == "penalty") {
            const auto s = as_text(name, v);
            if (s == "none") p.penalty = Penalty::kNone;
            else if (s == "l2") p.penalty = Penalty::kL2;
            else throw Error(ErrorCode::kInvalidArgument, "penalty must be 'none' or 'l2'");
          } else unknown_param(kind, name);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          if (name == "k") p.k = static_cast<int>(as_integer(name, v));
          else if (name == "p") p.p = as_number(name, v);
          else if (name == "leaf_size") p.leaf_size = static_cast<int>(as_integer(name, v));
          else if (name == "weights") {
            const auto s = as_text(name, v);
            if (s == "uniform") p.weights = KnnWeights::kUniform;
            else if (s == "distance") p.weights = KnnWeights::kDistance;
            else throw Error(ErrorCode::kInvalidArgument, "weights must be 'uniform' or 'distance'");
          } else unknown_param(kind, name);
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          if (name == "C") p.C = as_number(name, v);
          else if (name == "gamma") p.gamma = as_number(name, v);
          else if (name == "degree") p.degree = as_number(name, v);
          else if (name == "coef0") p.coef0 = as_number(name, v);
          else if (name == "tol") p.tol = as_number(name, v);
          else if (name == "max_iter") p.max_iter = as_integer(name, v);
          else if (name == "cache_mb") p.cache_mb = as_number(name, v);
          else if (name == "kernel") {
            const auto s = as_text(name, v);
            if (s == "rbf") p.kernel = SvmKernel::kRbf;
            else if (s == "poly") p.kernel = SvmKernel::kPoly;
            else if (s == "linear") p.kernel = SvmKernel::kLinear;
            else throw Error(ErrorCode::kInvalidArgument, "kernel must be rbf, poly or linear");
          } else unknown_param(kind, name);
        } else {
          if (name == "n_trees") p.n_trees = static_cast<int>(as_integer(name, v));
          else if (name == "max_depth") p.max_depth = static_cast<int>(as_integer(name, v));
          else if (name == "min_leaf") p.min_leaf = static_cast<int>(as_integer(name, v));
          else if (name == "max_features") {
            if (v.is_null()) p.max_features.reset();
            else p.max_features = static_cast<int>(as_integer(name, v));
          } else if (name == "seed") p.seed = static_cast<std::uint64_t>(as_integer(name, v));
          else unknown_param(kind, name);
        }
      },
      params);
}

LearnerSpec LearnerSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw Error(ErrorCode::kInvalidArgument, "learner spec needs a string 'kind'");
  LearnerSpec spec = default_spec(parse_learner_kind(j["kind"].get<std::string>()));
  for (const auto& [key, value] : j.items())
    if (key != "kind") spec.set(key, value);
  spec.validate();
  return spec;
}

Json LearnerSpec::to_json() const {
  Json j;
  j["kind"] = std::string(to_string(kind));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GnbParams>) {
          j["variance_smoothing"] = p.variance_smoothing;
        } else if constexpr (std::is_same_v<P, LogRegParams>) {
          j["C"] = p.C;
          j["max_iter"] = p.max_iter;
          j["tol"] = p.tol;
          j["penalty"] = p.penalty == Penalty::kNone ? "none" : "l2";
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          j["k"] = p.k;
          j["p"] = p.p;
          j["weights"] = p.weights == KnnWeights::kDistance ? "distance" : "uniform";
          j["leaf_size"] = p.leaf_size;
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          j["C"] = p.C;
          j["kernel"] = p.kernel == SvmKernel::kRbf ? "rbf" : p.kernel == SvmKernel::kPoly ? "poly" : "linear";
          j["gamma"] = p.gamma;
          j["degree"] = p.degree;
          j["coef0"] = p.coef0;
          j["tol"] = p.tol;
          j["max_iter"] = p.max_iter;
          j["cache_mb"] = p.cache_mb;
        } else {
          j["n_trees"] = p.n_trees;
          j["max_depth"] = p.max_depth;
          j["min_leaf"] = p.min_leaf;
          j["max_features"] = p.max_features ? Json(*p.max_features) : Json(nullptr);
          j["seed"] = p.seed;
        }
      },
      params);
  return j;
}

void LearnerSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  const bool tree_kind = kind == LearnerKind::kTree || kind == LearnerKind::kForest || kind == LearnerKind::kXTrees;
  const bool matches = std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GnbParams>) return kind == LearnerKind::kGnb;
        else if constexpr (std::is_same_v<P, LogRegParams>) return kind == LearnerKind::kLogReg;
        else if constexpr (std::is_same_v<P, KnnParams>) return kind == LearnerKind::kKnn;
        else if constexpr (std::is_same_v<P, SvmParams>) return kind == LearnerKind::kSvm;
        else return tree_kind;
      },
      params);
  if (!matches) fail("learner parameters do not match kind " + std::string(to_string(kind)));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GnbParams>) {
          if (!(p.variance_smoothing > 0)) fail("variance_smoothing must be > 0");
        } else if constexpr (std::is_same_v<P, LogRegParams>) {
          if (!(p.C > 0)) fail("C must be > 0");
          if (!(p.tol > 0)) fail("tol must be > 0");
          if (p.max_iter < 1) fail("max_iter must be >= 1");
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          if (p.k < 1) fail("k must be >= 1");
          if (!(p.p >= 1)) fail("p must be >= 1");
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          if (!(p.C > 0)) fail("C must be > 0");
          if (!(p.gamma > 0)) fail("gamma must be > 0");
          if (!(p.tol > 0)) fail("tol must be > 0");
          if (p.max_iter < 1) fail("max_iter must be >= 1");
        } else {
          if (p.n_trees < 1) fail("n_trees must be >= 1");
          if (p.min_leaf < 1) fail("min_leaf must be >= 1");
          if (p.max_depth < 0) fail("max_depth must be >= 0");
          if (p.max_features && *p.max_features < 1) fail("max_features must be >= 1");
        }
      },
      params);
}

std::optional<std::uint64_t> LearnerSpec::seed() const {
  if (const auto* t = std::get_if<TreeParams>(&params)) return t->seed;
  return std::nullopt;
}

void LearnerSpec::set_seed(std::uint64_t seed) {
  if (auto* t = std::get_if<TreeParams>(&params)) t->seed = seed;
}

// ---------------------------------------------------------------------------
// MinMaxScaler

MinMaxScaler MinMaxScaler::fit(const Matrix& x) {
  MinMaxScaler s;
  s.lo.assign(x.cols(), 0.0);
  s.scale.assign(x.cols(), 0.0);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (x.rows() == 0) continue;
    double lo = x(0, c), hi = x(0, c);
    for (std::size_t r = 1; r < x.rows(); ++r) {
      lo = std::min(lo, x(r, c));
      hi = std::max(hi, x(r, c));
    }
    s.lo[c] = lo;
    s.scale[c] = hi > lo ? 1.0 / (hi - lo) : 0.0;
  }
  return s;
}

void MinMaxScaler::transform_row(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - lo[c]) * scale[c];
}

Matrix MinMaxScaler::transform(const Matrix& x) const {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) transform_row(x.row(r), out.row(r));
  return out;
}

Json MinMaxScaler::to_json() const { return {{"lo", lo}, {"scale", scale}}; }

MinMaxScaler MinMaxScaler::from_json(const nlohmann::json& j) {
  MinMaxScaler s;
  s.lo = j.at("lo").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  if (s.lo.size() != s.scale.size()) throw Error(ErrorCode::kSchemaMismatch, "scaler arrays differ in length");
  return s;
}

// ---------------------------------------------------------------------------
// Learner base

std::vector<double> Learner::predict_proba(const Matrix& x) const {
  if (x.cols() != schema_.size())
    throw Error(ErrorCode::kSchemaMismatch, "model expects " + std::to_string(schema_.size()) + " features, got " +
                                                std::to_string(x.cols()));
  return positive_proba(x);
}

std::vector<double> Learner::predict_proba(const LabeledData& data) const {
  if (data.feature_names != schema_) {
    throw Error(ErrorCode::kSchemaMismatch, "input feature names differ from the training schema");
  }
  return predict_proba(data.x);
}

std::vector<int> Learner::predict(const Matrix& x, double threshold) const {
  const auto p = predict_proba(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= threshold ? 1 : 0;
  return out;
}

Json Learner::to_json() const {
  Json j;
  j["kind"] = std::string(to_string(kind()));
  j["params"] = params_json();
  j["schema"] = schema_;
  j["converged"] = converged_;
  j["fitted"] = fitted_json();
  return j;
}

std::unique_ptr<Learner> Learner::from_json(const nlohmann::json& j) {
  const LearnerKind kind = parse_learner_kind(j.at("kind").get<std::string>());
  const auto& params = j.at("params");
  const auto& fitted = j.at("fitted");
  std::unique_ptr<Learner> out;
  switch (kind) {
    case LearnerKind::kGnb: out = GnbModel::from_fitted(params, fitted); break;
    case LearnerKind::kLogReg: out = LogRegModel::from_fitted(params, fitted); break;
    case LearnerKind::kKnn: out = KnnModel::from_fitted(params, fitted); break;
    case LearnerKind::kSvm: out = SvmModel::from_fitted(params, fitted); break;
    default: out = TreeEnsembleModel::from_fitted(kind, params, fitted);
  }
  Learner& base = *out;
  base.schema_ = j.at("schema").get<std::vector<std::string>>();
  base.converged_ = j.at("converged").get<bool>();
  return out;
}

std::unique_ptr<Learner> fit_learner(const LearnerSpec& spec, const LabeledData& train) {
  spec.validate();
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot fit on an empty training set");
  if (train.y.size() != train.size()) throw Error(ErrorCode::kLengthMismatch, "labels do not match rows");
  if (train.feature_names.size() != train.x.cols())
    throw Error(ErrorCode::kSchemaMismatch, "feature names do not match matrix width");
  std::unique_ptr<Learner> out;
  switch (spec.kind) {
    case LearnerKind::kGnb: out = GnbModel::fit(train, std::get<GnbParams>(spec.params)); break;
    case LearnerKind::kLogReg: out = LogRegModel::fit(train, std::get<LogRegParams>(spec.params)); break;
    case LearnerKind::kKnn: out = KnnModel::fit(train, std::get<KnnParams>(spec.params)); break;
    case LearnerKind::kSvm: out = SvmModel::fit(train, std::get<SvmParams>(spec.params)); break;
    default: out = TreeEnsembleModel::fit(train, spec.kind, std::get<TreeParams>(spec.params));
  }
  out->schema_ = train.feature_names;
  return out;
}

namespace {

template <typename P>
P params_from_json(LearnerKind kind, const nlohmann::json& j) {
  nlohmann::json copy = j;
  copy["kind"] = std::string(to_string(kind));
  return std::get<P>(LearnerSpec::from_json(copy).params);
}

Json spec_params_json(LearnerSpec spec) {
  Json j = spec.to_json();
  j.erase("kind");
  return j;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

std::unique_ptr<GnbModel> GnbModel::fit(const LabeledData& train, const GnbParams& params) {
  auto m = std::make_unique<GnbModel>();
  m->schema_ = train.feature_names;
  m->params = params;
  const std::size_t n = train.size(), d = train.x.cols();
  std::array<std::size_t, 2> count{};
  for (int y : train.y) ++count[y];
  if (count[0] == 0 || count[1] == 0) m->single_class = count[1] ? 1 : 0;

  double max_var = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += train.x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (train.x(r, c) - mean) * (train.x(r, c) - mean);
    max_var = std::max(max_var, var / static_cast<double>(n));
  }
  double floor = params.variance_smoothing * max_var;
  if (floor <= 0.0) floor = params.variance_smoothing;

  for (int k = 0; k < 2; ++k) {
    m->mean[k].assign(d, 0.0);
    m->var[k].assign(d, floor);
    m->log_prior[k] = count[k] ? std::log(static_cast<double>(count[k]) / static_cast<double>(n))
                               : -std::numeric_limits<double>::infinity();
    if (!count[k]) continue;
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        if (train.y[r] == k) mean += train.x(r, c);
      mean /= static_cast<double>(count[k]);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        if (train.y[r] == k) var += (train.x(r, c) - mean) * (train.x(r, c) - mean);
      m->mean[k][c] = mean;
      m->var[k][c] = std::max(var / static_cast<double>(count[k]), floor);
    }
  }
  return m;
}

std::vector<double> GnbModel::positive_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (single_class) {
      out[r] = *single_class == 1 ? 1.0 : 0.0;
      continue;
    }
    std::array<double, 2> lj = log_prior;
    for (int k = 0; k < 2; ++k) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = x(r, c) - mean[k][c];
        lj[k] -= 0.5 * std::log(2.0 * M_PI * var[k][c]) + diff * diff / (2.0 * var[k][c]);
      }
    }
    out[r] = sigmoid(lj[1] - lj[0]);
  }
  return out;
}

Json GnbModel::params_json() const { return spec_params_json(LearnerSpec::gnb(params)); }

Json GnbModel::fitted_json() const {
  Json j;
  j["log_prior"] = {log_prior[0], log_prior[1]};
  j["mean"] = {mean[0], mean[1]};
  j["var"] = {var[0], var[1]};
  j["single_class"] = single_class ? Json(*single_class) : Json(nullptr);
  return j;
}

std::unique_ptr<GnbModel> GnbModel::from_fitted(const nlohmann::json& params, const nlohmann::json& fitted) {
  auto m = std::make_unique<GnbModel>();
  m->params = params_from_json<GnbParams>(LearnerKind::kGnb, params);
  for (int k = 0; k < 2; ++k) {
    const auto& lp = fitted.at("log_prior")[k];
    m->log_prior[k] = lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>();
    m->mean[k] = fitted.at("mean")[k].get<std::vector<double>>();
    m->var[k] = fitted.at("var")[k].get<std::vector<double>>();
  }
  if (!fitted.at("single_class").is_null()) m->single_class = fitted["single_class"].get<int>();
  return m;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

struct LogLoss {
  const Matrix& x;
  const std::vector<int>& y;
  double l2;  // coefficient of ||w||^2 / 2

  double value(const std::vector<double>& w, double b) const {
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double z = b;
      for (std::size_t c = 0; c < x.cols(); ++c) z += w[c] * x(r, c);
      sum += log1pexp(z) - y[r] * z;
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return sum / static_cast<double>(x.rows()) + 0.5 * l2 * reg;
  }

  void gradient(const std::vector<double>& w, double b, std::vector<double>& gw, double& gb) const {
    gw.assign(w.size(), 0.0);
    gb = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double z = b;
      for (std::size_t c = 0; c < x.cols(); ++c) z += w[c] * x(r, c);
      const double e = sigmoid(z) - y[r];
      for (std::size_t c = 0; c < x.cols(); ++c) gw[c] += e * x(r, c);
      gb += e;
    }
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < w.size(); ++c) gw[c] = gw[c] / n + l2 * w[c];
    gb /= n;
  }
};

}  // namespace

std::unique_ptr<LogRegModel> LogRegModel::fit(const LabeledData& train, const LogRegParams& params) {
  auto m = std::make_unique<LogRegModel>();
  m->schema_ = train.feature_names;
  m->params = params;
  m->scaler = MinMaxScaler::fit(train.x);
  const Matrix xs = m->scaler.transform(train.x);
  const std::size_t d = xs.cols();
  const double l2 = params.penalty == Penalty::kL2 ? 1.0 / (params.C * static_cast<double>(train.size())) : 0.0;
  const LogLoss loss{xs, train.y, l2};

  std::vector<double> w(d, 0.0), gw, w_try(d), gw_try;
  double b = 0.0, gb = 0.0, gb_try = 0.0;
  double step = 4.0 / static_cast<double>(d + 1);
  double f = loss.value(w, b);
  auto max_norm = [&] {
    double g = std::abs(gb);
    for (double v : gw) g = std::max(g, std::abs(v));
    return g;
  };
  bool converged = false;
  int it = 0;
  loss.gradient(w, b, gw, gb);
  for (; it < params.max_iter; ++it) {
    if (max_norm() <= params.tol) {
      converged = true;
      break;
    }
    double g2 = gb * gb;
    for (double v : gw) g2 += v * v;
    step *= 2.0;
    double f_try = f;
    double b_try = b;
    bool accepted = false;
    for (int halvings = 0; halvings < 80 && !accepted; ++halvings) {
      for (std::size_t c = 0; c < d; ++c) w_try[c] = w[c] - step * gw[c];
      b_try = b - step * gb;
      f_try = loss.value(w_try, b_try);
      if (f_try <= f - 0.5 * step * g2) {
        accepted = true;
      } else if (std::abs(f_try - f) <= 1e-13 * (1.0 + std::abs(f))) {
        // Loss differences are below rounding here. On a convex loss the step
        // still descends while the directional derivative at w_try stays negative.
        loss.gradient(w_try, b_try, gw_try, gb_try);
        double dot = gb * gb_try;
        for (std::size_t c = 0; c < d; ++c) dot += gw[c] * gw_try[c];
        accepted = dot > 0;
      }
      if (!accepted) step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at machine precision
    w = w_try;
    b = b_try;
    f = f_try;
    loss.gradient(w, b, gw, gb);
  }
  if (!converged) converged = max_norm() <= params.tol;
  m->w = std::move(w);
  m->b = b;
  m->iterations = it;
  m->final_grad_norm = max_norm();
  m->converged_ = converged;
  return m;
}

std::vector<double> LogRegModel::coefficients() const {
  std::vector<double> out(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) out[c] = w[c] * scaler.scale[c];
  return out;
}

double LogRegModel::intercept() const {
  double out = b;
  for (std::size_t c = 0; c < w.size(); ++c) out -= w[c] * scaler.scale[c] * scaler.lo[c];
  return out;
}

std::vector<double> LogRegModel::positive_proba(const Matrix& x) const {
  std::vector<double> out(x.rows()), row(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    scaler.transform_row(x.row(r), row);
    double z = b;
    for (std::size_t c = 0; c < row.size(); ++c) z += w[c] * row[c];
    out[r] = sigmoid(z);
  }
  return out;
}

Json LogRegModel::params_json() const { return spec_params_json(LearnerSpec::logreg(params)); }

Json LogRegModel::fitted_json() const {
  return {{"scaler", scaler.to_json()}, {"w", w}, {"b", b}, {"iterations", iterations}, {"grad_norm", final_grad_norm}};
}

std::unique_ptr<LogRegModel> LogRegModel::from_fitted(const nlohmann::json& params, const nlohmann::json& fitted) {
  auto m = std::make_unique<LogRegModel>();
  m->params = params_from_json<LogRegParams>(LearnerKind::kLogReg, params);
  m->scaler = MinMaxScaler::from_json(fitted.at("scaler"));
  m->w = fitted.at("w").get<std::vector<double>>();
  m->b = fitted.at("b").get<double>();
  m->iterations = fitted.at("iterations").get<int>();
  m->final_grad_norm = fitted.at("grad_norm").get<double>();
  return m;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours

std::unique_ptr<KnnModel> KnnModel::fit(const LabeledData& train, const KnnParams& params) {
  if (static_cast<std::size_t>(params.k) > train.size())
    throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(params.k) + " exceeds " +
                                           std::to_string(train.size()) + " training rows");
  auto m = std::make_unique<KnnModel>();
  m->schema_ = train.feature_names;
  m->params = params;
  m->scaler = MinMaxScaler::fit(train.x);
  m->x = m->scaler.transform(train.x);
  m->y = train.y;
  return m;
}

std::vector<double> KnnModel::positive_proba(const Matrix& query) const {
  const std::size_t n = x.rows(), d = x.cols();
  const auto k = static_cast<std::size_t>(params.k);
  std::vector<double> out(query.rows()), q(d);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < query.rows(); ++r) {
    scaler.transform_row(query.row(r), q);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      double s = 0.0;
      if (params.p == 1.0) {
        for (std::size_t c = 0; c < d; ++c) s += std::abs(row[c] - q[c]);
      } else if (params.p == 2.0) {
        for (std::size_t c = 0; c < d; ++c) s += (row[c] - q[c]) * (row[c] - q[c]);
        s = std::sqrt(s);
      } else {
        for (std::size_t c = 0; c < d; ++c) s += std::pow(std::abs(row[c] - q[c]), params.p);
        s = std::pow(s, 1.0 / params.p);
      }
      dist[i] = {s, i};
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    double num = 0.0, den = 0.0;
    if (params.weights == KnnWeights::kDistance && dist[0].first == 0.0) {
      for (std::size_t j = 0; j < k && dist[j].first == 0.0; ++j) {
        num += y[dist[j].second];
        den += 1.0;
      }
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        const double w = params.weights == KnnWeights::kDistance ? 1.0 / dist[j].first : 1.0;
        num += w * y[dist[j].second];
        den += w;
      }
    }
    out[r] = num / den;
  }
  return out;
}

Json KnnModel::params_json() const { return spec_params_json(LearnerSpec::knn(params)); }

Json KnnModel::fitted_json() const {
  Json rows = Json::array();
  for (std::size_t r = 0; r < x.rows(); ++r) rows.push_back(std::vector<double>(x.row(r).begin(), x.row(r).end()));
  return {{"scaler", scaler.to_json()}, {"x", rows}, {"y", y}};
}

std::unique_ptr<KnnModel> KnnModel::from_fitted(const nlohmann::json& params, const nlohmann::json& fitted) {
  auto m = std::make_unique<KnnModel>();
  m->params = params_from_json<KnnParams>(LearnerKind::kKnn, params);
  m->scaler = MinMaxScaler::from_json(fitted.at("scaler"));
  const auto& rows = fitted.at("x");
  m->x = Matrix(rows.size(), m->scaler.lo.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < m->x.cols(); ++c) m->x(r, c) = rows[r].at(c).get<double>();
  m->y = fitted.at("y").get<std::vector<int>>();
  return m;
}

}  // namespace recon
