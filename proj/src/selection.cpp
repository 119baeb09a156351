#include "recon/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "recon/common.hpp"
#include "recon/evaluation.hpp"
#include "recon/parallel.hpp"

namespace recon {

std::string_view to_string(SubsetStage s) {
  switch (s) {
    case SubsetStage::kFilter: return "filter";
    case SubsetStage::kPruned: return "pruned";
    case SubsetStage::kWrapped: return "wrapped";
  }
  return "?";
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> column(const Matrix& x, std::size_t c) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = x(r, c);
  return out;
}

std::vector<double> target_correlations(const LabeledData& train) {
  const std::vector<double> y(train.y.begin(), train.y.end());
  std::vector<double> out(train.x.cols());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = pearson(column(train.x, c), y);
  return out;
}

FeatureSubset target_correlation_select(const LabeledData& train, double threshold) {
  const auto corr = target_correlations(train);
  FeatureSubset s{{}, SubsetStage::kFilter};
  for (std::size_t c = 0; c < corr.size(); ++c)
    if (std::abs(corr[c]) >= threshold) s.names.push_back(train.feature_names[c]);
  return s;
}

std::vector<double> chi_square_scores(const LabeledData& train) {
  const Matrix x = MinMaxScaler::fit(train.x).transform(train.x);
  const std::size_t n = x.rows();
  std::array<double, 2> share{};
  for (int y : train.y) share[y] += 1.0;
  for (auto& s : share) s /= static_cast<double>(n);
  std::vector<double> out(x.cols(), 0.0);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::array<double, 2> observed{};
    for (std::size_t r = 0; r < n; ++r) observed[train.y[r]] += x(r, c);
    const double total = observed[0] + observed[1];
    if (total <= 0) continue;
    for (int k = 0; k < 2; ++k) {
      const double expected = share[k] * total;
      if (expected > 0) out[c] += (observed[k] - expected) * (observed[k] - expected) / expected;
    }
  }
  return out;
}

std::vector<double> anova_f_scores(const LabeledData& train) {
  const std::size_t n = train.size();
  std::array<std::size_t, 2> count{};
  for (int y : train.y) ++count[y];
  if (count[0] == 0 || count[1] == 0)
    throw Error(ErrorCode::kOneClassOnly, "ANOVA F needs both classes in the training rows");
  std::vector<double> out(train.x.cols(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::array<double, 2> mean{};
    double grand = 0;
    for (std::size_t r = 0; r < n; ++r) mean[train.y[r]] += train.x(r, c), grand += train.x(r, c);
    for (int k = 0; k < 2; ++k) mean[k] /= static_cast<double>(count[k]);
    grand /= static_cast<double>(n);
    double between = 0, within = 0;
    for (int k = 0; k < 2; ++k) between += static_cast<double>(count[k]) * (mean[k] - grand) * (mean[k] - grand);
    for (std::size_t r = 0; r < n; ++r) {
      const double d = train.x(r, c) - mean[train.y[r]];
      within += d * d;
    }
    if (within <= 0) {
      out[c] = between > 0 ? std::numeric_limits<double>::infinity() : 0.0;
      continue;
    }
    out[c] = between / (within / static_cast<double>(n - 2));
  }
  return out;
}

std::vector<double> tree_importance_scores(const LabeledData& train, int n_trees, std::uint64_t seed) {
  TreeParams p;
  p.n_trees = n_trees;
  p.seed = seed;
  return *fit_learner(LearnerSpec::xtrees(p), train)->feature_importances();
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i) { return std::isnan(scores[i]) ? -std::numeric_limits<double>::infinity() : scores[i]; };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

namespace {

std::vector<std::string> names_of(const LabeledData& d, std::span<const std::size_t> idx) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(d.feature_names[i]);
  return out;
}

std::vector<std::size_t> indices_of(const LabeledData& d, std::span<const std::string> names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    const auto it = std::find(d.feature_names.begin(), d.feature_names.end(), n);
    if (it == d.feature_names.end()) throw Error(ErrorCode::kMissingColumn, "feature '" + n + "' not in table");
    out.push_back(static_cast<std::size_t>(it - d.feature_names.begin()));
  }
  return out;
}

}  // namespace

FilterResult filter_select(const LabeledData& train, const FilterConfig& config) {
  FilterResult r;
  r.features = train.feature_names;
  r.correlation = target_correlations(train);
  r.chi2 = chi_square_scores(train);
  r.anova = anova_f_scores(train);
  r.importance = tree_importance_scores(train, config.n_trees, config.seed);
  std::vector<std::size_t> corr_idx;
  for (std::size_t c = 0; c < r.correlation.size(); ++c)
    if (std::abs(r.correlation[c]) >= config.target_threshold) corr_idx.push_back(c);
  const auto chi_idx = top_k(r.chi2, config.k), anova_idx = top_k(r.anova, config.k),
             imp_idx = top_k(r.importance, config.k);
  r.by_correlation = names_of(train, corr_idx);
  r.by_chi2 = names_of(train, chi_idx);
  r.by_anova = names_of(train, anova_idx);
  r.by_importance = names_of(train, imp_idx);
  std::set<std::size_t> all(corr_idx.begin(), corr_idx.end());
  all.insert(chi_idx.begin(), chi_idx.end());
  all.insert(anova_idx.begin(), anova_idx.end());
  all.insert(imp_idx.begin(), imp_idx.end());
  r.subset = {names_of(train, std::vector<std::size_t>(all.begin(), all.end())), SubsetStage::kFilter};
  return r;
}

PruneResult correlation_prune(const LabeledData& train, const FeatureSubset& subset, double threshold) {
  std::vector<std::size_t> idx = indices_of(train, subset.names);
  std::sort(idx.begin(), idx.end());
  const auto target = target_correlations(train);
  std::vector<std::vector<double>> cols;
  for (auto c : idx) cols.push_back(column(train.x, c));

  struct Pair {
    std::size_t a, b;  // positions in idx, a < b
    double corr;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double c = pearson(cols[a], cols[b]);
      if (std::abs(c) > threshold) pairs.push_back({a, b, c});
    }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& x, const Pair& y) { return std::abs(x.corr) > std::abs(y.corr); });

  PruneResult r;
  std::vector<bool> alive(idx.size(), true);
  for (const auto& p : pairs) {
    if (!alive[p.a] || !alive[p.b]) continue;
    // The later column loses ties.
    const bool drop_a = std::abs(target[idx[p.a]]) < std::abs(target[idx[p.b]]);
    const std::size_t drop = drop_a ? p.a : p.b, keep = drop_a ? p.b : p.a;
    alive[drop] = false;
    r.pairs.push_back({train.feature_names[idx[keep]], train.feature_names[idx[drop]], p.corr});
  }
  r.subset.stage = SubsetStage::kPruned;
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (alive[i]) r.subset.names.push_back(train.feature_names[idx[i]]);
  return r;
}

// ---------------------------------------------------------------------------
// Genetic wrapper

namespace {

using Mask = std::vector<bool>;

std::size_t popcount(const Mask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), true)); }

struct Scored {
  Mask mask;
  double fitness;
};

// Best first: higher fitness, then fewer features, then lexicographic mask.
bool better(const Scored& a, const Scored& b) {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  const auto pa = popcount(a.mask), pb = popcount(b.mask);
  if (pa != pb) return pa < pb;
  return a.mask > b.mask;
}

void repair(Mask& m, Rng& rng) {
  if (popcount(m) == 0) m[rng.below(m.size())] = true;
}

}  // namespace

GaResult ga_wrapper_select(const LabeledData& train, const LabeledData& val, const FeatureSubset& subset,
                           const GaConfig& config) {
  const std::vector<std::size_t> idx = indices_of(train, subset.names);
  const std::size_t n = idx.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "GA wrapper needs at least 2 candidate features");
  if (config.population < 1 || config.generations < 0 || config.tournament < 1 || config.elitism < 0 ||
      config.elitism > config.population)
    throw Error(ErrorCode::kInvalidArgument, "invalid GA configuration");
  if (val.feature_names != train.feature_names)
    throw Error(ErrorCode::kSchemaMismatch, "train and validation tables have different features");
  const double mutation = config.mutation_rate > 0 ? config.mutation_rate : 1.0 / static_cast<double>(n);

  LearnerSpec estimator = config.estimator;
  if (estimator.seed()) estimator.set_seed(derive_seed(config.seed, 0x5EED));
  std::map<Mask, double> cache;
  auto evaluate = [&](std::vector<Scored>& pop) {
    std::vector<Mask> todo;
    for (const auto& s : pop)
      if (!cache.count(s.mask) && std::find(todo.begin(), todo.end(), s.mask) == todo.end()) todo.push_back(s.mask);
    std::vector<double> scores(todo.size());
    parallel_for(todo.size(), [&](std::size_t t) {
      std::vector<std::size_t> cols;
      for (std::size_t i = 0; i < n; ++i)
        if (todo[t][i]) cols.push_back(idx[i]);
      const auto model = fit_learner(estimator, train.select_features(cols));
      scores[t] = metrics(confusion(val.y, model->predict(val.x.select_cols(cols)))).f1;
    });
    for (std::size_t t = 0; t < todo.size(); ++t) cache.emplace(todo[t], scores[t]);
    for (auto& s : pop) s.fitness = cache.at(s.mask);
    std::sort(pop.begin(), pop.end(), better);
  };

  Rng rng(derive_seed(config.seed, 1));
  std::vector<Scored> pop(static_cast<std::size_t>(config.population));
  for (auto& s : pop) {
    s.mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.mask[i] = rng.bernoulli(0.5);
    repair(s.mask, rng);
  }
  evaluate(pop);

  GaResult result;
  result.history.push_back(pop.front().fitness);
  for (int g = 0; g < config.generations; ++g) {
    auto tournament = [&]() -> const Scored& {
      std::size_t best = rng.below(pop.size());
      for (int t = 1; t < config.tournament; ++t) {
        const std::size_t c = rng.below(pop.size());
        if (better(pop[c], pop[best])) best = c;
      }
      return pop[best];
    };
    std::vector<Scored> next(pop.begin(), pop.begin() + config.elitism);
    while (next.size() < pop.size()) {
      const Scored& a = tournament();
      const Scored& b = tournament();
      Scored child{Mask(n), 0.0};
      for (std::size_t i = 0; i < n; ++i) child.mask[i] = rng.bernoulli(config.crossover_swap) ? b.mask[i] : a.mask[i];
      for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(mutation)) child.mask[i] = !child.mask[i];
      repair(child.mask, rng);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    evaluate(pop);
    result.history.push_back(pop.front().fitness);
  }

  result.best_mask = pop.front().mask;
  result.best_fitness = pop.front().fitness;
  result.evaluations = cache.size();
  result.subset.stage = SubsetStage::kWrapped;
  for (std::size_t i = 0; i < n; ++i)
    if (result.best_mask[i]) result.subset.names.push_back(train.feature_names[idx[i]]);
  return result;
}

SelectionReport select_features(const LabeledData& train, const LabeledData& val, const FilterConfig& filter,
                                double prune_threshold, const GaConfig& ga) {
  SelectionReport r;
  r.filter = filter_select(train, filter);
  r.prune = correlation_prune(train, r.filter.subset, prune_threshold);
  if (r.prune.subset.names.size() >= 2) {
    r.ga = ga_wrapper_select(train, val, r.prune.subset, ga);
  } else {
    // Too few survivors to search over; the pruned subset passes through.
    r.ga.subset = {r.prune.subset.names, SubsetStage::kWrapped};
    r.ga.best_mask.assign(r.prune.subset.names.size(), true);
  }
  return r;
}

Json SelectionReport::to_json() const {
  Json j;
  j["filter"] = {{"subset", filter.subset.names},
                 {"union_size", filter.subset.names.size()},
                 {"by_correlation", filter.by_correlation},
                 {"by_chi2", filter.by_chi2},
                 {"by_anova", filter.by_anova},
                 {"by_importance", filter.by_importance}};
  auto numbers = [](const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(std::isinf(x) ? Json("inf") : Json(x));
    return a;
  };
  j["scores"] = {{"features", filter.features},
                 {"correlation", numbers(filter.correlation)},
                 {"chi2", numbers(filter.chi2)},
                 {"anova", numbers(filter.anova)},
                 {"importance", numbers(filter.importance)}};
  Json pairs = Json::array();
  for (const auto& p : prune.pairs) pairs.push_back({{"kept", p.kept}, {"dropped", p.dropped}, {"correlation", p.correlation}});
  j["prune"] = {{"subset", prune.subset.names}, {"pairs", pairs}};
  j["ga"] = {{"subset", ga.subset.names},
             {"best_fitness", ga.best_fitness},
             {"history", ga.history},
             {"evaluations", ga.evaluations}};
  j["selected"] = ga.subset.names;
  return j;
}

}  // namespace recon
