#include <algorithm>
#include <cmath>
#include <numeric>

#include "recon/common.hpp"
#include "recon/learners.hpp"
#include "recon/parallel.hpp"

namespace recon {

double Tree::predict(std::span<const double> x) const {
  int n = 0;
  while (nodes[n].feature >= 0) n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
  return nodes[n].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
  }
  return best;
}

Json Tree::to_json() const {
  Json out = Json::array();
  for (const auto& n : nodes) out.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return out;
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j)
    t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                       n.at(4).get<double>()});
  return t;
}

namespace {

// n * Gini impurity of a node with `pos` positives among `n`.
double weighted_gini(double pos, double n) { return n > 0 ? 2.0 * pos * (n - pos) / n : 0.0; }

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double child_impurity = 0.0;
};

}  // namespace

// Parents are always created before their children, so nodes[0] is the root
// and child indices exceed the parent index.
Tree fit_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
              const TreeFitOptions& options, Rng* rng, std::vector<double>& importance) {
  const std::size_t d = x.cols();
  const double total = static_cast<double>(rows.size());
  const std::size_t max_features =
      options.max_features <= 0 ? d : std::min<std::size_t>(d, static_cast<std::size_t>(options.max_features));
  const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, options.min_leaf));
  if (importance.size() != d) importance.assign(d, 0.0);

  Tree tree;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  struct Work {
    int node;
    std::size_t begin, end;
    int depth;
  };
  std::vector<Work> stack;
  tree.nodes.push_back({});
  stack.push_back({0, 0, idx.size(), 0});
  std::vector<std::pair<double, int>> buf;
  std::vector<std::size_t> features(d);

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::size_t n = w.end - w.begin;
    double pos = 0;
    for (std::size_t i = w.begin; i < w.end; ++i) pos += y[idx[i]];
    tree.nodes[w.node].value = n ? pos / static_cast<double>(n) : 0.0;
    if (pos == 0 || pos == static_cast<double>(n) || n < 2 * min_leaf ||
        (options.max_depth > 0 && w.depth >= options.max_depth))
      continue;

    std::iota(features.begin(), features.end(), 0);
    const bool sample_features = max_features < d;
    Candidate best;
    best.child_impurity = std::numeric_limits<double>::infinity();
    std::size_t tried = 0;
    for (std::size_t f = 0; f < d && tried < max_features; ++f) {
      if (sample_features) std::swap(features[f], features[f + rng->below(d - f)]);
      const std::size_t feat = features[f];
      double lo = x(idx[w.begin], feat), hi = lo;
      for (std::size_t i = w.begin + 1; i < w.end; ++i) {
        lo = std::min(lo, x(idx[i], feat));
        hi = std::max(hi, x(idx[i], feat));
      }
      if (!(hi > lo)) continue;
      ++tried;

      if (options.mode == SplitMode::kRandom) {
        double threshold = rng->uniform(lo, hi);
        if (threshold >= hi) threshold = lo;
        double nl = 0, pl = 0;
        for (std::size_t i = w.begin; i < w.end; ++i) {
          if (x(idx[i], feat) <= threshold) {
            nl += 1;
            pl += y[idx[i]];
          }
        }
        const double nr = static_cast<double>(n) - nl;
        if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
        const double imp = weighted_gini(pl, nl) + weighted_gini(pos - pl, nr);
        if (imp < best.child_impurity) best = {static_cast<int>(feat), threshold, imp};
        continue;
      }

      buf.clear();
      for (std::size_t i = w.begin; i < w.end; ++i) buf.emplace_back(x(idx[i], feat), y[idx[i]]);
      std::sort(buf.begin(), buf.end());
      double pl = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        pl += buf[i].second;
        if (buf[i].first == buf[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double imp = weighted_gini(pl, static_cast<double>(nl)) + weighted_gini(pos - pl, static_cast<double>(nr));
        if (imp < best.child_impurity) {
          double threshold = 0.5 * (buf[i].first + buf[i + 1].first);
          if (threshold >= buf[i + 1].first) threshold = buf[i].first;
          best = {static_cast<int>(feat), threshold, imp};
        }
      }
    }
    if (best.feature < 0) continue;

    importance[best.feature] += (weighted_gini(pos, static_cast<double>(n)) - best.child_impurity) / total;
    const auto mid = std::partition(idx.begin() + w.begin, idx.begin() + w.end, [&](std::size_t r) {
      return x(r, best.feature) <= best.threshold;
    });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    Tree::Node& node = tree.nodes[w.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split, w.end, w.depth + 1});
    stack.push_back({left, w.begin, split, w.depth + 1});
  }
  return tree;
}

namespace {

void normalize(std::vector<double>& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0)
    for (double& e : v) e /= s;
}

}  // namespace

std::unique_ptr<TreeEnsembleModel> TreeEnsembleModel::fit(const LabeledData& train, LearnerKind kind,
                                                          const TreeParams& params) {
  auto m = std::make_unique<TreeEnsembleModel>();
  m->schema_ = train.feature_names;
  m->kind_ = kind;
  m->params = params;
  const std::size_t n = train.size(), d = train.x.cols();
  const int sqrt_d = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));

  TreeFitOptions options;
  options.max_depth = params.max_depth;
  options.min_leaf = params.min_leaf;
  options.max_features = params.max_features.value_or(kind == LearnerKind::kTree ? 0 : sqrt_d);
  options.mode = kind == LearnerKind::kXTrees ? SplitMode::kRandom : SplitMode::kBest;

  const std::size_t n_trees = kind == LearnerKind::kTree ? 1 : static_cast<std::size_t>(params.n_trees);
  m->trees.resize(n_trees);
  std::vector<std::vector<double>> imps(n_trees, std::vector<double>(d, 0.0));
  parallel_for(n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t));
    std::vector<std::size_t> rows(n);
    if (kind == LearnerKind::kForest) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    m->trees[t] = fit_tree(train.x, train.y, rows, options, &rng, imps[t]);
    normalize(imps[t]);
  });
  m->importances.assign(d, 0.0);
  for (const auto& imp : imps)
    for (std::size_t c = 0; c < d; ++c) m->importances[c] += imp[c] / static_cast<double>(n_trees);
  normalize(m->importances);
  return m;
}

std::vector<double> TreeEnsembleModel::positive_proba(const Matrix& x) const {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x.row(r));
    out[r] = s / static_cast<double>(trees.size());
  }
  return out;
}

Json TreeEnsembleModel::params_json() const {
  Json j = LearnerSpec{kind_, params}.to_json();
  j.erase("kind");
  return j;
}

Json TreeEnsembleModel::fitted_json() const {
  Json ts = Json::array();
  for (const auto& t : trees) ts.push_back(t.to_json());
  return {{"trees", ts}, {"importances", importances}};
}

std::unique_ptr<TreeEnsembleModel> TreeEnsembleModel::from_fitted(LearnerKind kind, const nlohmann::json& params,
                                                                  const nlohmann::json& fitted) {
  auto m = std::make_unique<TreeEnsembleModel>();
  m->kind_ = kind;
  nlohmann::json p = params;
  p["kind"] = std::string(to_string(kind));
  m->params = std::get<TreeParams>(LearnerSpec::from_json(p).params);
  for (const auto& t : fitted.at("trees")) m->trees.push_back(Tree::from_json(t));
  m->importances = fitted.at("importances").get<std::vector<double>>();
  return m;
}

}  // namespace recon
