#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "recon/common.hpp"
#include "fixtures.hpp"
#include "recon/cnn.hpp"

using namespace recon;
using namespace recon::testing;

namespace {

CnnSpec small_spec() {
  CnnSpec s;
  s.side = 8;
  s.conv = {{2, 3, Activation::kSigmoid, 0.0}, {3, 3, Activation::kRelu, 0.0}};
  s.dense_units = 5;
  s.seed = 1;
  return s;
}

Matrix random_images(std::uint64_t seed, std::size_t n, std::size_t pixels) {
  Rng r(seed);
  Matrix x(n, pixels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < pixels; ++j) x(i, j) = r.uniform();
  return x;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("image geometry for 139 features on a 32x32 grid") {
  const auto e = ImageEncoding::geometry(139, 32);
  CHECK(e.repeats == 7);
  CHECK(e.pad == 51);
  CHECK(e.repeats * e.d + e.pad == 1024);
  CHECK_THROWS_AS(ImageEncoding::geometry(26, 5), Error);
}

TEST_CASE("pixel p holds feature p mod d for every repeat and zeros after") {
  const auto e = ImageEncoding::geometry(13, 8);
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(13);
    for (auto& v : x) v = rng.uniform();
    const auto img = e.encode(x);
    REQUIRE(img.size() == 64);
    for (std::size_t p = 0; p < 64; ++p) CHECK(img[p] == (p < e.repeats * 13 ? x[p % 13] : 0.0));
    CHECK(e.decode(img) == x);
  }
}

TEST_CASE("fitted scaling clamps to the training range") {
  Matrix train(2, 2);
  train(0, 0) = 0, train(0, 1) = 5;
  train(1, 0) = 10, train(1, 1) = 5;
  const auto e = ImageEncoding::fit(train, 4);
  CHECK(e.scale(0, 5) == 0.5);
  CHECK(e.scale(0, 20) == 1.0);
  CHECK(e.scale(0, -3) == 0.0);
  CHECK(e.scale(1, 7) == 0.0);
  const auto back = ImageEncoding::from_json(nlohmann::json::parse(e.to_json().dump()));
  CHECK(back.lo == e.lo);
  CHECK(back.hi == e.hi);
}

TEST_CASE("analytic gradients match central differences for every parameter") {
  CnnModel m(small_spec(), ImageEncoding::geometry(10, 8));
  const Matrix x = random_images(1, 4, 64);
  const std::vector<int> y = {0, 1, 1, 0};
  auto g = m.zero_gradients();
  m.loss(x, y, &g);
  double worst = 0;
  for (std::size_t t = 0; t < m.parameters().size(); ++t) {
    for (std::size_t e = 0; e < m.parameters()[t].data.size(); ++e) {
      double& w = m.parameters()[t].data[e];
      const double w0 = w, h = 1e-5;
      w = w0 + h;
      const double lp = m.loss(x, y);
      w = w0 - h;
      const double lm = m.loss(x, y);
      w = w0;
      worst = std::max(worst, rel_error(g[t].data[e], (lp - lm) / (2 * h)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("vanilla saliency matches finite differences of the class score") {
  const CnnModel m(small_spec(), ImageEncoding::geometry(10, 8));
  const Matrix x = random_images(5, 1, 64);
  std::vector<double> img(x.row(0).begin(), x.row(0).end());
  for (int target : {0, 1}) {
    const auto grad = m.input_gradient(img, target);
    const auto sal = m.saliency(img, target, false);
    CHECK(*std::max_element(sal.begin(), sal.end()) > 1e-6);
    for (std::size_t p = 0; p < img.size(); ++p) {
      const double v0 = img[p], h = 1e-5;
      img[p] = v0 + h;
      const double sp = m.class_score(img, target);
      img[p] = v0 - h;
      const double sm = m.class_score(img, target);
      img[p] = v0;
      const double num = (sp - sm) / (2 * h);
      CHECK(std::abs(grad[p] - num) <= 1e-4 * std::max(1.0, std::abs(num)));
      CHECK(sal[p] == std::abs(grad[p]));
    }
  }
  const auto guided = m.saliency(img, 1, true);
  CHECK(guided.size() == 64);
  CHECK(std::all_of(guided.begin(), guided.end(), [](double v) { return v >= 0 && std::isfinite(v); }));
}

TEST_CASE("probabilities sum to one and dropout is inactive at inference") {
  auto spec = small_spec();
  spec.conv[0].dropout = 0.5;
  const CnnModel m(spec, ImageEncoding::geometry(10, 8));
  const Matrix x = random_images(7, 3, 64);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto p = m.probabilities(x.row(r));
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
    CHECK(m.probabilities(x.row(r)) == p);
  }
  const auto probs = m.predict_proba_images(x);
  CHECK(probs[1] == m.probabilities(x.row(1))[1]);
}

TEST_CASE("training learns a separable problem and is reproducible") {
  const auto train = planted(3, 300, 6, 6, 3.0);
  const auto val = planted(4, 100, 6, 6, 3.0);
  CnnSpec spec;
  spec.side = 8;
  spec.conv = {{4, 3, Activation::kRelu, 0.1}};
  spec.dense_units = 16;
  spec.batch_size = 16;
  spec.epochs = 6;
  spec.learning_rate = 3e-3;
  spec.seed = 5;
  const auto a = train_cnn(train, val, spec);
  const auto b = train_cnn(train, val, spec);
  REQUIRE(a.history.size() == 6);
  CHECK(a.history.back().val_accuracy >= 0.9);
  CHECK(a.predict_proba(val.x) == b.predict_proba(val.x));
  CHECK(a.schema == train.feature_names);

  const auto text = a.to_json().dump();
  const auto back = CnnModel::from_json(nlohmann::json::parse(text));
  CHECK(back.predict_proba(val.x) == a.predict_proba(val.x));

  spec.optimizer = OptimizerKind::kRmsprop;
  spec.epochs = 2;
  const auto r = train_cnn(train, {}, spec);
  CHECK(r.history.size() == 2);
}

TEST_CASE("presets and spec validation") {
  const auto inst = CnnSpec::institutional();
  REQUIRE(inst.conv.size() == 3);
  CHECK(inst.conv[0].activation == Activation::kSigmoid);
  CHECK(inst.conv[1].dropout == 0.16);
  CHECK(inst.batch_size == 128);
  CHECK(inst.epochs == 5);
  const auto unsw = CnnSpec::unsw();
  REQUIRE(unsw.conv.size() == 4);
  CHECK(unsw.conv[2].filters == 32);
  CHECK(unsw.conv[3].dropout == 0.0);
  CHECK(unsw.optimizer == OptimizerKind::kRmsprop);
  CHECK(unsw.epochs == 7);
  inst.validate();
  unsw.validate();

  CnnSpec deep = CnnSpec::institutional();
  deep.side = 4;  // three 2x2 pools need side >= 8
  CHECK_THROWS_AS(deep.validate(), Error);
  CnnSpec even = small_spec();
  even.conv[0].kernel = 2;
  CHECK_THROWS_AS(even.validate(), Error);
  CHECK_THROWS_AS(CnnSpec::from_json(nlohmann::json::parse(R"({"preset":"institutional","colour":1})")), Error);
  const auto parsed = CnnSpec::from_json(nlohmann::json::parse(R"({"preset":"unsw","epochs":2})"));
  CHECK(parsed.epochs == 2);
  CHECK(parsed.conv.size() == 4);
}

TEST_CASE("PGM output has header and scaled pixels") {
  std::ostringstream out;
  write_pgm(out, std::vector<double>{0.0, 1.0, 0.5, 2.0}, 2, 0.0, 1.0);
  CHECK(out.str().rfind("P2\n2 2\n255\n", 0) == 0);
  CHECK(out.str().find("255") != std::string::npos);
}
