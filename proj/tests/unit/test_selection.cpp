#include <cmath>
#include <limits>

#include "doctest.h"
#include "recon/common.hpp"
#include "fixtures.hpp"
#include "recon/selection.hpp"

using namespace recon;
using namespace recon::testing;

TEST_CASE("pearson against a hand computation") {
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 5, 9};
  CHECK(pearson(a, b) == doctest::Approx(11.0 / std::sqrt(130.0)).epsilon(1e-12));
  const std::vector<double> neg = {-2, -4, -6, -8};
  CHECK(pearson(a, neg) == doctest::Approx(-1.0));
  const std::vector<double> flat = {3, 3, 3, 3};
  CHECK(pearson(a, flat) == 0.0);
}

TEST_CASE("ANOVA F and chi-square on small tables") {
  const auto d = from_rows({{1, 1, 0, 7}, {2, 1, 1, 7}, {3, 3, 2, 7}, {5, 3, 3, 7}, {6, 3, 4, 7}, {7, 3, 5, 7}},
                           {0, 0, 0, 1, 1, 1});
  const auto f = anova_f_scores(d);
  CHECK(f[0] == doctest::Approx(24.0));
  // Column 1 is 1,1,3 | 3,3,3: within-class variance is not zero.
  CHECK(std::isfinite(f[1]));
  CHECK(f[3] == 0.0);

  const auto sep = from_rows({{1}, {1}, {3}, {3}}, {0, 0, 1, 1});
  CHECK(anova_f_scores(sep)[0] == std::numeric_limits<double>::infinity());

  const auto c = from_rows({{0}, {1}, {2}, {3}}, {0, 0, 1, 1});
  CHECK(chi_square_scores(c)[0] == doctest::Approx(8.0 / 9.0));

  const auto one = from_rows({{1}, {2}}, {1, 1});
  try {
    anova_f_scores(one);
    FAIL("expected OneClassOnly");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOneClassOnly);
  }
}

TEST_CASE("top_k keeps column order on ties and ranks NaN last") {
  const std::vector<double> s = {1, 3, 3, std::nan(""), 2};
  CHECK(top_k(s, 3) == std::vector<std::size_t>{1, 2, 4});
  CHECK(top_k(s, 10).size() == 5);
  CHECK(top_k(s, 10).back() == 3);
}

TEST_CASE("correlation pruning drops the weaker member of each correlated pair") {
  // f0 and f1 are exact multiples (a tie on target correlation): the later one goes.
  // f2 nearly copies f3, but f3 tracks the label better.
  Rng rng(3);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    const double base = rng.normal() + label;
    const double strong = 2.0 * label + 0.3 * rng.normal();
    rows.push_back({base, 2 * base, strong + 0.3 * rng.normal(), strong});
    y.push_back(label);
  }
  const auto d = from_rows(rows, y);
  const auto corr = target_correlations(d);
  REQUIRE(std::abs(corr[3]) > std::abs(corr[2]));
  const FeatureSubset all{{"f0", "f1", "f2", "f3"}, SubsetStage::kFilter};
  const auto r = correlation_prune(d, all, 0.75);
  CHECK(r.subset.names == std::vector<std::string>{"f0", "f3"});
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.pairs[0].kept == "f0");
  CHECK(r.pairs[0].dropped == "f1");
  CHECK(r.pairs[1].dropped == "f2");
  CHECK(r.subset.stage == SubsetStage::kPruned);
}

TEST_CASE("filter keeps high scorers of every method") {
  const auto d = planted(11, 600, 12, 3);
  FilterConfig cfg;
  cfg.k = 3;
  cfg.n_trees = 20;
  const auto f = filter_select(d, cfg);
  for (const char* name : {"inf0", "inf1", "inf2"})
    CHECK(std::find(f.subset.names.begin(), f.subset.names.end(), name) != f.subset.names.end());
  CHECK(f.by_anova.size() == 3);
  CHECK(f.correlation.size() == 12);
}

TEST_CASE("GA best fitness never decreases and runs are reproducible") {
  const auto train = planted(5, 400, 8, 2);
  const auto val = planted(6, 200, 8, 2);
  FeatureSubset all;
  all.names = train.feature_names;
  GaConfig cfg;
  cfg.generations = 6;
  cfg.population = 10;
  cfg.seed = 9;
  TreeParams p;
  p.n_trees = 5;
  cfg.estimator = LearnerSpec::forest(p);
  const auto a = ga_wrapper_select(train, val, all, cfg);
  REQUIRE(a.history.size() == 7);
  for (std::size_t g = 1; g < a.history.size(); ++g) CHECK(a.history[g] >= a.history[g - 1]);
  CHECK(a.best_fitness == a.history.back());
  CHECK_FALSE(a.subset.names.empty());
  CHECK(a.evaluations <= 70);
  const auto b = ga_wrapper_select(train, val, all, cfg);
  CHECK(a.best_mask == b.best_mask);
  CHECK(a.history == b.history);

  const FeatureSubset one{{"inf0"}, SubsetStage::kPruned};
  try {
    ga_wrapper_select(train, val, one, cfg);
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}
