#include "recon/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "recon/common.hpp"
#include "recon/evaluation.hpp"
#include "recon/parallel.hpp"

namespace recon {

std::size_t fraction_count(double fraction, std::size_t n) {
  // The epsilon keeps products like 0.7 * 10 from rounding up to 8.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

void BaggingSpec::validate() const {
  base.validate();
  if (n_estimators < 1) throw Error(ErrorCode::kInvalidArgument, "n_estimators must be >= 1");
  if (!(max_samples > 0 && max_samples <= 1)) throw Error(ErrorCode::kInvalidArgument, "max_samples must be in (0, 1]");
  if (!(max_features > 0 && max_features <= 1))
    throw Error(ErrorCode::kInvalidArgument, "max_features must be in (0, 1]");
}

Json BaggingSpec::to_json() const {
  Json j;
  j["base"] = base.to_json();
  j["n_estimators"] = n_estimators;
  j["max_samples"] = max_samples;
  j["max_features"] = max_features;
  j["bootstrap"] = bootstrap;
  j["bootstrap_features"] = bootstrap_features;
  j["seed"] = seed;
  return j;
}

BaggingSpec BaggingSpec::from_json(const nlohmann::json& j) {
  BaggingSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "base") s.base = LearnerSpec::from_json(v);
    else if (key == "n_estimators") s.n_estimators = v.get<int>();
    else if (key == "max_samples") s.max_samples = v.get<double>();
    else if (key == "max_features") s.max_features = v.get<double>();
    else if (key == "bootstrap") s.bootstrap = v.get<bool>();
    else if (key == "bootstrap_features") s.bootstrap_features = v.get<bool>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else throw Error(ErrorCode::kInvalidArgument, "unknown bagging key '" + key + "'");
  }
  s.validate();
  return s;
}

namespace {

// Without replacement the draw is returned sorted, so a full draw is the
// identity selection.
std::vector<std::size_t> draw(Rng& rng, std::size_t n, std::size_t k, bool replace) {
  std::vector<std::size_t> out;
  if (replace) {
    out.resize(k);
    for (auto& v : out) v = rng.below(n);
    return out;
  }
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  out.assign(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

BaggingModel BaggingModel::fit(const LabeledData& train, const BaggingSpec& spec) {
  spec.validate();
  BaggingModel model;
  model.spec_ = spec;
  model.schema_ = train.feature_names;
  const std::size_t n = train.size(), d = train.x.cols();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "cannot fit bagging on an empty training set");
  const std::size_t ns = fraction_count(spec.max_samples, n), nf = fraction_count(spec.max_features, d);
  model.members_.resize(static_cast<std::size_t>(spec.n_estimators));
  parallel_for(model.members_.size(), [&](std::size_t m) {
    Rng rng(derive_seed(spec.seed, m));
    BaggingMember& member = model.members_[m];
    member.rows = draw(rng, n, ns, spec.bootstrap);
    member.features = draw(rng, d, nf, spec.bootstrap_features);
    LearnerSpec base = spec.base;
    if (base.seed()) base.set_seed(derive_seed(*base.seed(), m));
    try {
      member.model = fit_learner(base, train.select_rows(member.rows).select_features(member.features));
    } catch (const Error& e) {
      throw Error(e.code(), "bagging member " + std::to_string(m) + ": " + e.what());
    }
  });
  return model;
}

std::vector<double> BaggingModel::predict_proba(const Matrix& x) const {
  if (x.cols() != schema_.size())
    throw Error(ErrorCode::kSchemaMismatch, "ensemble expects " + std::to_string(schema_.size()) +
                                                " features, got " + std::to_string(x.cols()));
  std::vector<double> sum(x.rows(), 0.0);
  for (const auto& m : members_) {
    const auto p = m.model->predict_proba(x.select_cols(m.features));
    for (std::size_t r = 0; r < p.size(); ++r) sum[r] += p[r];
  }
  for (double& v : sum) v /= static_cast<double>(members_.size());
  return sum;
}

std::vector<double> BaggingModel::predict_proba(const LabeledData& data) const {
  if (data.feature_names != schema_)
    throw Error(ErrorCode::kSchemaMismatch, "input feature names differ from the ensemble's training schema");
  return predict_proba(data.x);
}

std::vector<int> BaggingModel::predict(const Matrix& x, double threshold) const {
  const auto p = predict_proba(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= threshold ? 1 : 0;
  return out;
}

Json BaggingModel::to_json() const {
  Json j;
  j["type"] = "bagging";
  j["spec"] = spec_.to_json();
  j["schema"] = schema_;
  auto& members = j["members"] = Json::array();
  for (const auto& m : members_) members.push_back({{"rows", m.rows}, {"features", m.features}, {"model", m.model->to_json()}});
  return j;
}

BaggingModel BaggingModel::from_json(const nlohmann::json& j) {
  BaggingModel model;
  model.spec_ = BaggingSpec::from_json(j.at("spec"));
  model.schema_ = j.at("schema").get<std::vector<std::string>>();
  for (const auto& m : j.at("members")) {
    BaggingMember member;
    member.rows = m.at("rows").get<std::vector<std::size_t>>();
    member.features = m.at("features").get<std::vector<std::size_t>>();
    member.model = Learner::from_json(m.at("model"));
    for (auto f : member.features)
      if (f >= model.schema_.size()) throw Error(ErrorCode::kSchemaMismatch, "member feature index out of range");
    model.members_.push_back(std::move(member));
  }
  if (model.members_.empty()) throw Error(ErrorCode::kSchemaMismatch, "ensemble has no members");
  return model;
}

// ---------------------------------------------------------------------------
// Tuning

nlohmann::json ParamRange::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kUniform: return rng.uniform(lo, hi);
    case Kind::kLogUniform: return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    case Kind::kInt: {
      const auto a = static_cast<long>(lo), b = static_cast<long>(hi);
      return a + static_cast<long>(rng.below(static_cast<std::uint64_t>(b - a + 1)));
    }
    case Kind::kChoice: return choices[rng.below(choices.size())];
  }
  return nullptr;
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "search space must be a JSON object");
  SearchSpace s;
  for (const auto& [name, spec] : j.items()) {
    if (!spec.is_object() || spec.size() != 1)
      throw Error(ErrorCode::kInvalidArgument, "range for '" + name + "' must be a single-key object");
    const std::string kind = spec.begin().key();
    const nlohmann::json& args = spec.begin().value();
    auto bounds = [&] {
      if (!args.is_array() || args.size() != 2 || !args[0].is_number() || !args[1].is_number() ||
          args[0].get<double>() > args[1].get<double>())
        throw Error(ErrorCode::kInvalidArgument, "range '" + name + "': " + kind + " needs [lo, hi] with lo <= hi");
      return std::pair{args[0].get<double>(), args[1].get<double>()};
    };
    ParamRange r;
    if (kind == "uniform") {
      auto [lo, hi] = bounds();
      r = ParamRange::uniform(lo, hi);
    } else if (kind == "log_uniform") {
      auto [lo, hi] = bounds();
      if (!(lo > 0)) throw Error(ErrorCode::kInvalidArgument, "range '" + name + "': log_uniform needs lo > 0");
      r = ParamRange::log_uniform(lo, hi);
    } else if (kind == "int") {
      auto [lo, hi] = bounds();
      r = ParamRange::integer(static_cast<long>(lo), static_cast<long>(hi));
    } else if (kind == "choice") {
      if (!args.is_array() || args.empty())
        throw Error(ErrorCode::kInvalidArgument, "range '" + name + "': choice needs a non-empty list");
      r = ParamRange::choice(std::vector<nlohmann::json>(args.begin(), args.end()));
    } else {
      throw Error(ErrorCode::kInvalidArgument, "range '" + name + "': unknown kind '" + kind + "'");
    }
    s.params.emplace_back(name, std::move(r));
  }
  return s;
}

Json TuneResult::to_json() const {
  Json j;
  j["best"] = best.to_json();
  j["best_score"] = best_score;
  auto& log = j["trials"] = Json::array();
  for (const auto& t : trials) {
    Json e;
    e["spec"] = t.spec.to_json();
    e["score"] = t.score;
    if (!t.error.empty()) e["error"] = t.error;
    log.push_back(std::move(e));
  }
  return j;
}

double f1_scorer(std::span<const int> y_true, std::span<const int> y_pred) {
  return metrics(confusion(y_true, y_pred)).f1;
}

namespace {

void apply_param(BaggingSpec& spec, const std::string& name, const nlohmann::json& v) {
  if (name == "n_estimators") spec.n_estimators = v.get<int>();
  else if (name == "max_samples") spec.max_samples = v.get<double>();
  else if (name == "max_features") spec.max_features = v.get<double>();
  else if (name == "bootstrap") spec.bootstrap = v.get<bool>();
  else if (name == "bootstrap_features") spec.bootstrap_features = v.get<bool>();
  else spec.base.set(name, v);
}

}  // namespace

TuneResult random_search_tune(const BaggingSpec& base, const SearchSpace& space, int budget,
                              const LabeledData& train, const LabeledData& val, std::uint64_t seed,
                              const Scorer& scorer) {
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "tuning budget must be >= 1");
  TuneResult result;
  result.trials.resize(static_cast<std::size_t>(budget));
  // Sampling is sequential so the drawn specs do not depend on scheduling.
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    Rng rng(derive_seed(seed, t));
    BaggingSpec spec = base;
    for (const auto& [name, range] : space.params) apply_param(spec, name, range.sample(rng));
    result.trials[t].spec = spec;
  }
  parallel_for(result.trials.size(), [&](std::size_t t) {
    Trial& trial = result.trials[t];
    try {
      const BaggingModel model = BaggingModel::fit(train, trial.spec);
      trial.score = scorer(val.y, model.predict(val.x));
    } catch (const Error& e) {
      trial.error = e.what();
      trial.score = 0.0;
    }
  });
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    if (!result.trials[t].error.empty()) continue;
    if (!best || result.trials[t].score > result.trials[*best].score) best = t;
  }
  if (!best) throw Error(ErrorCode::kInvalidArgument, "every tuning trial failed; first: " + result.trials[0].error);
  result.best = result.trials[*best].spec;
  result.best_score = result.trials[*best].score;
  return result;
}

}  // namespace recon
