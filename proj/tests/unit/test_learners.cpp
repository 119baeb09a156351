#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "recon/common.hpp"
#include "fixtures.hpp"
#include "recon/learners.hpp"

using namespace recon;
using namespace recon::testing;

namespace {

// Newton-Raphson on the unpenalized mean log-loss in raw feature space.
std::vector<double> newton_logreg(const LabeledData& d) {
  const std::size_t n = d.size(), p = d.x.cols() + 1;
  std::vector<double> beta(p, 0.0);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> g(p, 0.0);
    std::vector<std::vector<double>> h(p, std::vector<double>(p, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> z(p, 1.0);
      for (std::size_t c = 0; c + 1 < p; ++c) z[c] = d.x(r, c);
      double eta = 0;
      for (std::size_t c = 0; c < p; ++c) eta += beta[c] * z[c];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t a = 0; a < p; ++a) {
        g[a] += (mu - d.y[r]) * z[a];
        for (std::size_t b = 0; b < p; ++b) h[a][b] += mu * (1 - mu) * z[a] * z[b];
      }
    }
    // Solve h * step = g by Gaussian elimination.
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = a + 1; b < p; ++b) {
        const double f = h[b][a] / h[a][a];
        for (std::size_t c = a; c < p; ++c) h[b][c] -= f * h[a][c];
        g[b] -= f * g[a];
      }
    }
    std::vector<double> step(p);
    for (std::size_t a = p; a-- > 0;) {
      double s = g[a];
      for (std::size_t c = a + 1; c < p; ++c) s -= h[a][c] * step[c];
      step[a] = s / h[a][a];
    }
    for (std::size_t a = 0; a < p; ++a) beta[a] -= step[a];
  }
  return beta;
}

void check_round_trip(const LearnerSpec& spec, const LabeledData& train, const LabeledData& test) {
  const auto model = fit_learner(spec, train);
  const auto text = model->to_json().dump();
  const auto back = Learner::from_json(nlohmann::json::parse(text));
  CHECK(back->kind() == model->kind());
  CHECK(back->predict_proba(test.x) == model->predict_proba(test.x));
  CHECK(back->to_json().dump() == text);
}

}  // namespace

TEST_CASE("GNB posterior equals a hand-computed gaussian likelihood ratio") {
  const auto d = from_rows({{1, 10}, {2, 12}, {3, 11}, {6, 20}, {7, 25}, {8, 21}}, {0, 0, 0, 1, 1, 1});
  GnbParams p;
  p.variance_smoothing = 1e-9;
  const auto model = fit_learner(LearnerSpec::gnb(p), d);
  const std::vector<double> q = {4.0, 15.0};
  // Class 0: means 2, 11, variances 2/3, 2/3. Class 1: means 7, 22, variances 2/3, 14/3.
  auto log_pdf = [](double x, double m, double v) { return -0.5 * std::log(2 * M_PI * v) - (x - m) * (x - m) / (2 * v); };
  const double l0 = log_pdf(4, 2, 2.0 / 3) + log_pdf(15, 11, 2.0 / 3);
  const double l1 = log_pdf(4, 7, 2.0 / 3) + log_pdf(15, 22, 14.0 / 3);
  const double expected = 1.0 / (1.0 + std::exp(l0 - l1));
  Matrix x(1, 2);
  x(0, 0) = q[0];
  x(0, 1) = q[1];
  CHECK(model->predict_proba(x)[0] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("GNB variance floor scales with the largest feature variance") {
  const auto d = from_rows({{1, 0}, {1, 10}, {2, 0}, {2, 20}}, {0, 0, 1, 1});
  GnbParams p;
  p.variance_smoothing = 0.01;
  const auto m = GnbModel::fit(d, p);
  // Column 0 is constant within each class; overall variances are 0.25 and 68.75.
  CHECK(m->var[0][0] == doctest::Approx(0.6875));
  CHECK(m->var[1][1] == doctest::Approx(100.0));
}

TEST_CASE("unpenalized logistic regression reaches the Newton optimum") {
  const auto d = planted(21, 300, 2, 2, 1.0);
  LogRegParams p;
  p.penalty = Penalty::kNone;
  p.tol = 1e-9;
  p.max_iter = 200000;
  const auto model = LogRegModel::fit(d, p);
  const auto beta = newton_logreg(d);
  CHECK(model->converged());
  const auto w = model->coefficients();
  CHECK(w[0] == doctest::Approx(beta[0]).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(beta[1]).epsilon(1e-4));
  CHECK(model->intercept() == doctest::Approx(beta[2]).epsilon(1e-4));
}

TEST_CASE("logistic regression reports exhausted iteration budgets") {
  const auto d = planted(22, 200, 3, 3, 0.5);
  LogRegParams p;
  p.penalty = Penalty::kNone;
  p.tol = 1e-14;
  p.max_iter = 3;
  CHECK_FALSE(fit_learner(LearnerSpec::logreg(p), d)->converged());
}

TEST_CASE("KNN matches a brute-force distance-weighted vote") {
  // Both features already span [0, 1] so scaling is the identity.
  const auto train = from_rows({{0, 0}, {1, 1}, {0.2, 0.9}, {0.7, 0.1}, {0.5, 0.5}, {0.9, 0.6}}, {0, 1, 1, 0, 0, 1});
  KnnParams p;
  p.k = 3;
  p.p = 1;
  const auto model = fit_learner(LearnerSpec::knn(p), train);
  Rng rng(4);
  Matrix q(50, 2);
  for (std::size_t r = 0; r < 50; ++r) q(r, 0) = rng.uniform(), q(r, 1) = rng.uniform();
  const auto got = model->predict_proba(q);
  for (std::size_t r = 0; r < 50; ++r) {
    std::vector<std::pair<double, int>> dist;
    for (std::size_t i = 0; i < train.size(); ++i)
      dist.push_back({std::abs(train.x(i, 0) - q(r, 0)) + std::abs(train.x(i, 1) - q(r, 1)), train.y[i]});
    std::sort(dist.begin(), dist.end());
    double num = 0, den = 0;
    for (int j = 0; j < 3; ++j) num += dist[j].second / dist[j].first, den += 1 / dist[j].first;
    CHECK(got[r] == doctest::Approx(num / den).epsilon(1e-12));
  }
  // A query on a training point takes that point's label.
  CHECK(model->predict_proba(train.x.select_rows(std::vector<std::size_t>{1}))[0] == 1.0);
}

TEST_CASE("SVM separates separable data with every kernel") {
  const auto train = planted(31, 200, 2, 2, 6.0);
  const auto test = planted(32, 200, 2, 2, 6.0);
  for (auto kernel : {SvmKernel::kRbf, SvmKernel::kLinear, SvmKernel::kPoly}) {
    SvmParams p;
    p.kernel = kernel;
    p.C = 10;
    p.degree = kernel == SvmKernel::kPoly ? 2.5 : 3.0;
    p.coef0 = 1;
    const auto model = SvmModel::fit(train, p);
    const auto pred = model->predict(test.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.y[i];
    CHECK(correct >= 196);
    // Platt scaling orders scores like the decision function.
    const auto f = model->decision_function(test.x);
    const auto prob = model->predict_proba(test.x);
    for (std::size_t i = 1; i < f.size(); ++i)
      if (f[i] > f[i - 1] + 1e-9) CHECK(prob[i] >= prob[i - 1]);
  }
}

TEST_CASE("single tree fits XOR exactly and importances are normalized") {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const int a = i % 2, b = (i / 2) % 2;
    rows.push_back({double(a), double(b), double(i % 5)});
    y.push_back(a ^ b);
  }
  const auto d = from_rows(rows, y);
  const auto tree = fit_learner(LearnerSpec::tree(), d);
  CHECK(tree->predict(d.x) == d.y);
  const auto imp = *tree->feature_importances();
  double sum = 0;
  for (double v : imp) sum += v;
  CHECK(sum == doctest::Approx(1.0));

  TreeParams p;
  p.n_trees = 15;
  p.seed = 3;
  for (auto spec : {LearnerSpec::forest(p), LearnerSpec::xtrees(p)}) {
    const auto a = fit_learner(spec, d);
    const auto b = fit_learner(spec, d);
    CHECK(a->predict_proba(d.x) == b->predict_proba(d.x));
    const auto importances = *a->feature_importances();
    double s = 0;
    for (double v : importances) s += v;
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("max_depth bounds tree depth") {
  const auto d = planted(8, 300, 4, 4, 0.5);
  TreeParams p;
  p.max_depth = 3;
  const auto m = TreeEnsembleModel::fit(d, LearnerKind::kTree, p);
  CHECK(m->trees.at(0).depth() <= 3);
}

TEST_CASE("every learner survives a JSON round trip") {
  const auto train = planted(41, 150, 3, 2);
  const auto test = planted(42, 50, 3, 2);
  LogRegParams lr;
  lr.C = 190;
  lr.tol = 0.0673;
  SvmParams svm;
  svm.C = 47;
  svm.gamma = 1.64;
  TreeParams t;
  t.n_trees = 4;
  for (const auto& spec : {LearnerSpec::gnb(), LearnerSpec::logreg(lr), LearnerSpec::knn(), LearnerSpec::svm(svm),
                           LearnerSpec::tree(t), LearnerSpec::forest(t), LearnerSpec::xtrees(t)})
    check_round_trip(spec, train, test);
}

TEST_CASE("specs validate and parse strictly") {
  const auto spec = LearnerSpec::from_json(nlohmann::json::parse(R"({"kind":"KNN","k":5,"weights":"uniform"})"));
  CHECK(spec.kind == LearnerKind::kKnn);
  CHECK(std::get<KnnParams>(spec.params).k == 5);
  CHECK(LearnerSpec::from_json(nlohmann::json::parse(spec.to_json().dump())).to_json() == spec.to_json());
  CHECK_THROWS_AS(LearnerSpec::from_json(nlohmann::json::parse(R"({"kind":"KNN","bogus":1})")), Error);
  KnnParams bad;
  bad.k = 0;
  CHECK_THROWS_AS(LearnerSpec::knn(bad).validate(), Error);
  CHECK_THROWS_AS(parse_learner_kind("NOPE"), Error);
}

TEST_CASE("prediction checks the feature schema") {
  const auto train = planted(51, 60, 3, 2);
  const auto model = fit_learner(LearnerSpec::gnb(), train);
  auto renamed = train;
  renamed.feature_names[1] = "other";
  try {
    model->predict_proba(renamed);
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchemaMismatch);
  }
}
