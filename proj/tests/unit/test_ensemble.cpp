#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "recon/common.hpp"
#include "fixtures.hpp"
#include "recon/ensemble.hpp"

using namespace recon;
using namespace recon::testing;

TEST_CASE("fraction_count rounds up and clamps") {
  CHECK(fraction_count(1.0, 10) == 10);
  CHECK(fraction_count(0.5, 10) == 5);
  CHECK(fraction_count(0.51, 10) == 6);
  CHECK(fraction_count(0.3, 10) == 3);  // 0.3 * 10 is 3.0000000000000004
  CHECK(fraction_count(0.01, 10) == 1);
  CHECK(fraction_count(0.7, 3) == 3);
}

TEST_CASE("one member without bootstrap reproduces the bare learner") {
  const auto train = planted(1, 200, 4, 3);
  const auto test = planted(2, 100, 4, 3);
  for (const auto& base : {LearnerSpec::gnb(), LearnerSpec::logreg(), LearnerSpec::knn(), LearnerSpec::svm()}) {
    BaggingSpec spec;
    spec.base = base;
    spec.n_estimators = 1;
    spec.bootstrap = false;
    spec.max_samples = 1.0;
    spec.max_features = 1.0;
    const auto bag = BaggingModel::fit(train, spec);
    const auto bare = fit_learner(base, train);
    CHECK(bag.predict_proba(test.x) == bare->predict_proba(test.x));
    REQUIRE(bag.members().size() == 1);
    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(bag.members()[0].rows == all);
  }
}

TEST_CASE("members draw the configured row and feature counts") {
  const auto train = planted(3, 101, 6, 2);
  BaggingSpec spec;
  spec.base = LearnerSpec::gnb();
  spec.n_estimators = 5;
  spec.max_samples = 0.5;
  spec.max_features = 0.5;
  spec.bootstrap = false;
  spec.seed = 4;
  const auto bag = BaggingModel::fit(train, spec);
  for (const auto& m : bag.members()) {
    CHECK(m.rows.size() == 51);
    CHECK(std::is_sorted(m.rows.begin(), m.rows.end()));
    CHECK(std::set<std::size_t>(m.rows.begin(), m.rows.end()).size() == 51);
    CHECK(std::set<std::size_t>(m.features.begin(), m.features.end()).size() == 3);
  }
  CHECK(bag.members()[0].rows != bag.members()[1].rows);
}

TEST_CASE("bagging is deterministic and survives a JSON round trip") {
  const auto train = planted(5, 150, 4, 2);
  const auto test = planted(6, 60, 4, 2);
  BaggingSpec spec;
  spec.n_estimators = 4;
  spec.max_features = 0.75;
  spec.seed = 12;
  const auto a = BaggingModel::fit(train, spec);
  const auto b = BaggingModel::fit(train, spec);
  CHECK(a.predict_proba(test.x) == b.predict_proba(test.x));
  const auto text = a.to_json().dump();
  const auto back = BaggingModel::from_json(nlohmann::json::parse(text));
  CHECK(back.predict_proba(test.x) == a.predict_proba(test.x));
  CHECK(back.to_json().dump() == text);

  // The ensemble probability is the member mean.
  const auto p = a.predict_proba(test.x);
  for (std::size_t r = 0; r < 5; ++r) {
    double sum = 0;
    for (const auto& m : a.members()) sum += m.model->predict_proba(test.x.select_cols(m.features))[r];
    CHECK(p[r] == doctest::Approx(sum / 4).epsilon(1e-12));
  }
}

TEST_CASE("bagging specs are validated") {
  BaggingSpec spec;
  spec.n_estimators = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.n_estimators = 1;
  spec.max_samples = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK_THROWS_AS(BaggingSpec::from_json(nlohmann::json::parse(R"({"n_estimators":3,"wat":1})")), Error);
  const auto parsed = BaggingSpec::from_json(nlohmann::json::parse(
      R"({"base":{"kind":"GNB","variance_smoothing":3.15e-05},"n_estimators":3,"bootstrap":false})"));
  CHECK(parsed.n_estimators == 3);
  CHECK(std::get<GnbParams>(parsed.base.params).variance_smoothing == 3.15e-05);
}

TEST_CASE("search spaces reject malformed ranges") {
  CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::json::parse(R"({"k":{"int":[5,1]}})")), Error);
  CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::json::parse(R"({"C":{"log_uniform":[0,1]}})")), Error);
  CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::json::parse(R"({"k":{"choice":[]}})")), Error);
  CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::json::parse(R"({"k":{"normal":[0,1]}})")), Error);
  const auto s = SearchSpace::from_json(nlohmann::json::parse(R"({"k":{"int":[1,9]},"weights":{"choice":["uniform","distance"]}})"));
  REQUIRE(s.params.size() == 2);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const long k = s.params[0].second.sample(rng).get<long>();
    CHECK(k >= 1);
    CHECK(k <= 9);
  }
}

TEST_CASE("random search returns the first best trial and is reproducible") {
  const auto train = planted(7, 200, 4, 2);
  const auto val = planted(8, 100, 4, 2);
  BaggingSpec base;
  base.n_estimators = 2;
  const auto space = SearchSpace::from_json(nlohmann::json::parse(R"({"k":{"int":[1,15]},"p":{"choice":[1,2]}})"));
  const auto a = random_search_tune(base, space, 6, train, val, 3);
  const auto b = random_search_tune(base, space, 6, train, val, 3);
  REQUIRE(a.trials.size() == 6);
  double best = -1;
  std::size_t first = 0;
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].score == b.trials[i].score);
    if (a.trials[i].score > best) best = a.trials[i].score, first = i;
  }
  CHECK(a.best_score == best);
  CHECK(a.best.to_json() == a.trials[first].spec.to_json());
  CHECK_THROWS_AS(random_search_tune(base, space, 0, train, val, 3), Error);
}
