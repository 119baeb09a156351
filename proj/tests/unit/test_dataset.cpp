#include <set>
#include <sstream>

#include "doctest.h"
#include "recon/common.hpp"
#include "packets.hpp"
#include "recon/dataset.hpp"

using namespace recon;
using namespace recon::testing;
using namespace recon::tcp_flags;

namespace {

RowKey key(std::int64_t us, std::uint16_t sport = 1000, Protocol proto = Protocol::kTcp) {
  RowKey k;
  k.start_ts = Timestamp{us};
  k.flow.initiator_ip = ip("10.0.0.1");
  k.flow.responder_ip = ip("10.0.0.2");
  k.flow.initiator_port = sport;
  k.flow.responder_port = 80;
  k.flow.proto = proto;
  return k;
}

Column num(std::string name) { return Column{std::move(name), ColumnKind::kNumeric, Origin::kExternal, {}, {}}; }

// n rows; the first `positives` are labeled 1.
FeatureTable labeled_table(std::size_t n, std::size_t positives) {
  FeatureTable t({num("x"), num("y")});
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    t.add_row(key(static_cast<std::int64_t>(i)), {Cell::observed(double(i)), Cell::observed(double(i % 7))});
    labels.push_back(i < positives);
  }
  t.set_labels(labels);
  return t;
}

}  // namespace

TEST_CASE("merged table has TCP session columns structural-missing for non-TCP flows") {
  std::vector packets = {tcp(0, "10.0.0.1", 4000, "10.0.0.2", 80, kSyn),
                         tcp(10, "10.0.0.2", 80, "10.0.0.1", 4000, kSyn | kAck),
                         udp(20, "10.0.0.5", 53, "10.0.0.6", 53, 30),
                         icmp(30, "10.0.0.7", "10.0.0.8", kIcmpEchoRequest)};
  const auto flows = assemble_flows(packets);
  const auto temporal = count_signals_windowed(packets, flows);
  const auto merged =
      merge_feature_sets(build_flow_set(flows), build_session_set(flows), build_temporal_set(flows, temporal));
  REQUIRE(merged.num_rows() == 3);
  CHECK(merged.num_columns() == 13 + 7 + kProbeSignalCount);
  const auto base = merged.column_index("DstTCPBase");
  std::size_t structural = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    const bool tcp_row = merged.key(r).flow.proto == Protocol::kTcp;
    CHECK(merged.cell(r, base).is_missing() != tcp_row);
    if (!tcp_row) structural += merged.cell(r, base).missing == Missing::kStructural;
  }
  CHECK(structural == 2);
  CHECK(merged.cell(0, merged.column_index("syn_count")).value == 1);
}

TEST_CASE("merge renames colliding names and drops rows missing from a full-coverage part") {
  FeatureTable a({num("x")});
  a.add_row(key(1), {Cell::observed(1)});
  a.add_row(key(2), {Cell::observed(2)});
  FeatureTable b({num("x")});
  b.add_row(key(2), {Cell::observed(20)});
  const JoinPart parts[] = {{&b, Coverage::kAll}};
  const auto m = merge_feature_sets(a, parts);
  REQUIRE(m.num_rows() == 1);
  CHECK(m.column(1).name == "x_1");
  CHECK(m.cell(0, 1).value == 20);

  FeatureTable dup({num("x")});
  dup.add_row(key(1), {Cell::observed(1)});
  dup.add_row(key(1), {Cell::observed(1)});
  try {
    merge_feature_sets(dup, parts);
    FAIL("expected DuplicateKey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateKey);
  }
}

TEST_CASE("drop_uninformative reports empty, constant and repeated columns") {
  FeatureTable t({num("empty"), num("constant"), num("x"), num("x_copy"), num("structural_mix")});
  for (int i = 0; i < 10; ++i) {
    t.add_row(key(i), {Cell::plausible(), Cell::observed(5), Cell::observed(i),
                       Cell::observed(i), i % 2 ? Cell::structural() : Cell::observed(3)});
  }
  const auto result = drop_uninformative(t);
  REQUIRE(result.report.dropped.size() == 3);
  CHECK(result.report.dropped[0].column == "empty");
  CHECK(result.report.dropped[0].reason == DropReason::kEmpty);
  CHECK(result.report.dropped[1].reason == DropReason::kNoVariation);
  CHECK(result.report.dropped[2].column == "x_copy");
  CHECK(result.report.dropped[2].reason == DropReason::kRepeating);
  CHECK(result.report.dropped[2].duplicate_of == "x");
  // Structural cells are a value of their own, so this column varies.
  REQUIRE(result.table.num_columns() == 2);
  CHECK(result.table.column(1).name == "structural_mix");

  FeatureTable flat({num("c")});
  flat.add_row(key(0), {Cell::observed(1)});
  flat.add_row(key(1), {Cell::observed(1)});
  try {
    drop_uninformative(flat);
    FAIL("expected AllDropped");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllDropped);
  }
}

TEST_CASE("one-hot encoding orders levels lexicographically and keeps missing masks") {
  FeatureTable t({Column{"state", ColumnKind::kCategorical, Origin::kFlow, {}, {}}, num("v")});
  const char* values[] = {"REQ", "CON", "FIN", "CON"};
  for (int i = 0; i < 4; ++i) t.add_row(key(i), {Cell::observed(t.level_index(0, values[i])), Cell::observed(i)});
  t.add_row(key(9), {Cell::plausible(), Cell::observed(9)});
  const auto enc = one_hot_encode(t);
  REQUIRE(enc.num_columns() == 4);
  CHECK(enc.column(0).name == "state_CON");
  CHECK(enc.column(1).name == "state_FIN");
  CHECK(enc.column(2).name == "state_REQ");
  CHECK(enc.column(0).group == "state");
  CHECK(enc.column(3).name == "v");
  for (int r = 0; r < 4; ++r) {
    double sum = 0;
    for (int c = 0; c < 3; ++c) sum += enc.cell(r, c).value;
    CHECK(sum == 1.0);
  }
  CHECK(enc.cell(0, 2).value == 1.0);
  for (int c = 0; c < 3; ++c) CHECK(enc.cell(4, c).missing == Missing::kPlausible);

  // The group imputes as a unit to its modal level.
  const auto filled = impute(enc);
  CHECK(filled.cell(4, 0).value == 1.0);
  CHECK(filled.cell(4, 1).value == 0.0);
  CHECK(filled.cell(4, 2).value == 0.0);
}

TEST_CASE("imputation statistics come from the training table only") {
  FeatureTable train({num("a")});
  train.add_row(key(0), {Cell::observed(1)});
  train.add_row(key(1), {Cell::observed(3)});
  train.add_row(key(2), {Cell::observed(8)});
  FeatureTable test({num("a")});
  test.add_row(key(3), {Cell::plausible()});
  test.add_row(key(4), {Cell::structural()});
  test.add_row(key(5), {Cell::observed(100)});

  const auto mean = apply_impute(test, fit_impute(train));
  CHECK(mean.cell(0, 0) == Cell::observed(4.0));
  CHECK(mean.cell(1, 0) == Cell::observed(-1.0));
  CHECK(mean.cell(2, 0) == Cell::observed(100.0));

  ImputePolicy median{NumericFill::kMedian, -7.0};
  const auto med = apply_impute(test, fit_impute(train, median));
  CHECK(med.cell(0, 0).value == 3.0);
  CHECK(med.cell(1, 0).value == -7.0);

  FeatureTable other({num("b")});
  other.add_row(key(0), {Cell::observed(1)});
  CHECK_THROWS_AS(apply_impute(other, fit_impute(train)), Error);

  FeatureTable unseen({num("a")});
  unseen.add_row(key(0), {Cell::plausible()});
  try {
    impute(unseen);
    FAIL("expected NoObservedValues");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoObservedValues);
  }
}

TEST_CASE("categorical structural cells map to the '-' level") {
  FeatureTable t({Column{"svc", ColumnKind::kCategorical, Origin::kFlow, {}, {}}});
  t.add_row(key(0), {Cell::observed(t.level_index(0, "http"))});
  t.add_row(key(1), {Cell::structural()});
  const auto out = impute(t);
  CHECK(out.column(0).levels[static_cast<std::size_t>(out.cell(1, 0).value)] == "-");
}

TEST_CASE("labels combine by logical OR over available sources") {
  const LabelSet sets[] = {{LabelSource::kRuleEngine, {1, 0, 0, 1}},
                           {LabelSource::kSignatureIds, {}},
                           {LabelSource::kExpertGroundTruth, {0, 0, 1, 1}}};
  const auto c = combine_labels(sets);
  CHECK(c.labels == std::vector<int>{1, 0, 1, 1});
  CHECK(c.report.disagreements == 2);
  REQUIRE(c.report.positives.size() == 2);
  CHECK(c.report.positives[0].second == 2);

  const LabelSet none[] = {{LabelSource::kRuleEngine, {}}};
  try {
    combine_labels(none);
    FAIL("expected CoverageMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCoverageMismatch);
  }
  const LabelSet ragged[] = {{LabelSource::kRuleEngine, {1, 0}}, {LabelSource::kExpertGroundTruth, {1}}};
  CHECK_THROWS_AS(combine_labels(ragged), Error);
}

TEST_CASE("stratified split keeps class ratios and partitions rows") {
  const auto t = labeled_table(1000, 100);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SplitConfig cfg;
    cfg.seed = seed;
    const auto s = split(t, cfg);
    CHECK(s.train.num_rows() == 600);
    CHECK(s.val.num_rows() == 200);
    CHECK(s.test.num_rows() == 200);
    auto positives = [](const FeatureTable& p) {
      std::size_t n = 0;
      for (int y : p.labels()) n += y;
      return n;
    };
    CHECK(positives(s.train) == 60);
    CHECK(positives(s.val) == 20);
    CHECK(positives(s.test) == 20);
    std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
    all.insert(s.val_rows.begin(), s.val_rows.end());
    all.insert(s.test_rows.begin(), s.test_rows.end());
    CHECK(all.size() == 1000);
  }
  SplitConfig cfg;
  CHECK(split(t, cfg).train_rows == split(t, cfg).train_rows);
  cfg.seed = 1;
  CHECK(split(t, cfg).train_rows != split(t, SplitConfig{}).train_rows);
}

TEST_CASE("split rejects bad ratios and tiny classes") {
  const auto t = labeled_table(50, 2);
  try {
    split(t, SplitConfig{});
    FAIL("expected ClassTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kClassTooSmall);
  }
  SplitConfig bad;
  bad.train = 0.9;
  CHECK_THROWS_AS(split(labeled_table(50, 10), bad), Error);
}

TEST_CASE("CSV round trip preserves schema, values, masks and labels") {
  FeatureTable t({Column{"proto", ColumnKind::kCategorical, Origin::kFlow, {}, {}}, num("v"),
                  Column{"flag", ColumnKind::kBinary, Origin::kTemporal, {}, "g"}});
  t.add_row(key(1'000'001, 1, Protocol::kTcp), {Cell::observed(t.level_index(0, "a;b|c%")), Cell::observed(0.1),
                                                Cell::observed(1)});
  t.add_row(key(2'500'000, 2, Protocol::kUdp), {Cell::plausible(), Cell::structural(), Cell::observed(0)});
  t.add_row(key(3, 3, Protocol::kIcmp), {Cell::observed(t.level_index(0, "x")), Cell::observed(1.0 / 3.0),
                                         Cell::plausible()});
  t.set_labels({1, 0, 1});
  const std::string text = to_csv(t);
  const auto back = from_csv_text(text);
  CHECK(back == t);
  CHECK(to_csv(back) == text);

  const auto plain = from_csv_text("a,b,label\n1,xx,0\n,yy,1\n");
  CHECK(plain.column(0).kind == ColumnKind::kNumeric);
  CHECK(plain.column(1).kind == ColumnKind::kCategorical);
  CHECK(plain.cell(1, 0).missing == Missing::kPlausible);
  CHECK(plain.labels() == std::vector<int>{0, 1});

  try {
    from_csv_text("a,b\n1\n");
    FAIL("expected RaggedRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRaggedRow);
  }
}

TEST_CASE("UNSW loader labels reconnaissance rows and types categorical columns") {
  std::string header =
      "id,dur,proto,service,state,Spkts,dTtl,Dload,smeansz,dmeansz,ackdat,ct_state_ttl,ct_dst_sport_ltm,"
      "ct_ftp_cmd,dsport,attack_cat,label\n";
  std::string rows =
      "1,0.1,tcp,-,FIN,10,29,100.5,50,60,0.01,0,1,0,80,Normal,0\n"
      "2,0.0,udp,dns,INT,2,0,0,40,0,0,2,1,0,0x35,Reconnaissance,1\n"
      "3,0.2,tcp,http,CON,8,29,5,70,80,0.02,1,2,0,8080, Exploits ,1\n";
  std::istringstream in(header + rows);
  const auto t = load_unsw_csv(in);
  CHECK(t.num_rows() == 3);
  CHECK(t.labels() == std::vector<int>{0, 1, 0});
  CHECK_FALSE(t.find_column("id").has_value());
  CHECK_FALSE(t.find_column("attack_cat").has_value());
  CHECK(t.column(t.column_index("proto")).kind == ColumnKind::kCategorical);
  CHECK(t.cell(1, t.column_index("dsport")).value == 53);

  std::istringstream missing("dur,attack_cat\n1,Normal\n");
  try {
    load_unsw_csv(missing);
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingColumn);
  }
}
