#include <cmath>
#include <sstream>

#include "doctest.h"
#include "recon/common.hpp"
#include "oracles.hpp"
#include "packets.hpp"
#include "recon/evaluation.hpp"
#include "recon/rng.hpp"

using namespace recon;
using namespace recon::testing;
using namespace recon::tcp_flags;

TEST_CASE("metrics from confusion counts") {
  const auto m = metrics({48662, 0, 1944, 49344});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == doctest::Approx(48662.0 / 50606.0));
  CHECK(m.far == 0.0);
  const auto u = metrics({10133, 137, 152, 9578});
  CHECK(u.precision == doctest::Approx(10133.0 / 10270.0));
  CHECK(u.far == doctest::Approx(137.0 / 9715.0));
  CHECK(u.accuracy == doctest::Approx((10133.0 + 9578.0) / 20000.0));
  const double p = 10133.0 / 10270.0, r = 10133.0 / 10285.0;
  CHECK(u.f1 == doctest::Approx(2 * p * r / (p + r)));
}

TEST_CASE("degenerate denominators follow fixed conventions") {
  auto none_predicted = metrics({0, 0, 5, 5});
  CHECK(none_predicted.precision == 0.0);
  CHECK(none_predicted.f1 == 0.0);
  auto all_negative = metrics({0, 0, 0, 7});
  CHECK(all_negative.precision == 1.0);
  CHECK(all_negative.recall == 1.0);
  auto all_positive = metrics({3, 0, 0, 0});
  CHECK(all_positive.far == 0.0);
  CHECK_THROWS_AS(metrics({0, 0, 0, 0}), Error);
  CHECK_THROWS_AS(metrics({-1, 0, 0, 2}), Error);
}

TEST_CASE("confusion counts and length checks") {
  const std::vector<int> y = {1, 1, 0, 0, 1}, p = {1, 0, 0, 1, 1};
  CHECK(confusion(y, p) == ConfusionMatrix{2, 1, 1, 1});
  try {
    confusion(y, std::vector<int>{1});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
}

TEST_CASE("trapezoid AUC equals the tie-aware pairwise statistic") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<int> y(500);
    std::vector<double> s(500);
    for (std::size_t i = 0; i < 500; ++i) {
      y[i] = rng.bernoulli(0.3);
      // Coarse scores force many ties.
      s[i] = std::round((rng.uniform() + 0.3 * y[i]) * 20) / 20;
    }
    const auto roc = roc_auc(y, s);
    CHECK(std::abs(roc.auc - pairwise_auc(y, s)) <= 1e-12);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(std::isinf(roc.points.front().threshold));
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
  }
}

TEST_CASE("ROC needs both classes") {
  try {
    roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.2, 0.3});
    FAIL("expected OneClassOnly");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOneClassOnly);
  }
  const auto r = evaluate(std::vector<int>{1, 1}, std::vector<double>{0.2, 0.8});
  CHECK_FALSE(r.roc.has_value());
  CHECK(r.matrix == ConfusionMatrix{1, 0, 1, 0});
}

TEST_CASE("ROC CSV writes inf for the first threshold") {
  const auto roc = roc_auc(std::vector<int>{0, 1}, std::vector<double>{0.1, 0.9});
  CHECK(roc.auc == 1.0);
  std::ostringstream out;
  write_roc_csv(roc, out);
  CHECK(out.str().rfind("fpr,tpr,threshold\r\n0,0,inf\r\n", 0) == 0);
}

TEST_CASE("rule parsing rejects malformed rules") {
  const auto rules = parse_rules(nlohmann::json::parse(R"([
    {"id":"a","field":"syn_count","op":">=","value":20},
    {"id":"b","all":[{"field":"state","op":"in","value":["REQ","RST"]},{"field":"Dport","op":"==","value":23}]}
  ])"));
  REQUIRE(rules.size() == 2);
  CHECK(rules[1].conditions.size() == 2);
  CHECK(parse_rules(rules_to_json(rules)).size() == 2);
  CHECK(rules_to_json(parse_rules(rules_to_json(default_rules()))) == rules_to_json(default_rules()));
  for (const char* bad : {R"({"id":"a"})", R"([{"field":"syn_count","op":">=","value":1}])",
                          R"([{"id":"a","field":"nope","op":">=","value":1}])",
                          R"([{"id":"a","field":"syn_count","op":"~","value":1}])",
                          R"([{"id":"a","field":"state","op":">=","value":"REQ"}])",
                          R"([{"id":"a","all":[]}])"}) {
    try {
      parse_rules(nlohmann::json::parse(bad));
      FAIL("expected BadRule for " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBadRule);
    }
  }
}

TEST_CASE("default rules flag XMAS probes but not NULL probes") {
  std::vector<PacketRecord> packets;
  for (int i = 0; i < 30; ++i)
    packets.push_back(tcp(i * 1000, "172.16.0.9", 5000, "10.0.0.2", static_cast<std::uint16_t>(1 + i), 0x29));
  for (int i = 0; i < 30; ++i)
    packets.push_back(tcp(100000 + i * 1000, "172.16.0.8", 5000, "10.0.0.2", static_cast<std::uint16_t>(1 + i), 0));
  const auto flows = assemble_flows(packets);
  const auto temporal = count_signals_windowed(packets, flows);
  const auto rules = default_rules();
  const auto result = misuse_detect(flows, temporal, rules);
  std::size_t xmas = 0, null = 0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    (flows[i].key.initiator_ip == ip("172.16.0.9") ? xmas : null) += result.verdicts[i];
  }
  CHECK(xmas == 30);
  CHECK(null == 0);
  CHECK(result.rule_hits.size() == rules.size());
}

TEST_CASE("comparison reports deltas and disagreements") {
  const std::vector<int> y = {1, 1, 1, 0, 0}, anomaly = {1, 1, 1, 0, 1}, misuse = {1, 0, 0, 0, 0};
  const auto r = compare(y, anomaly, misuse);
  CHECK(r.recall_delta == doctest::Approx(2.0 / 3.0));
  CHECK(r.misuse.metrics.precision == 1.0);
  CHECK(r.disagreements == std::vector<std::size_t>{1, 2, 4});
  try {
    compare(y, anomaly, std::vector<int>{1});
    FAIL("expected RowSetMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRowSetMismatch);
  }
}
