// recon: one subcommand per pipeline stage. Every stage reads the files the
// previous stage wrote and writes its artifacts plus manifest.json into --out.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recon/cnn.hpp"
#include "recon/csv.hpp"
#include "recon/dataset.hpp"
#include "recon/ensemble.hpp"
#include "recon/evaluation.hpp"
#include "recon/pipeline.hpp"
#include "recon/selection.hpp"
#include "recon/synth.hpp"

namespace fs = std::filesystem;
using recon::Error;
using recon::ErrorCode;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kInvalid = 2, kDegenerate = 3, kInternal = 4 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAllDropped:
    case ErrorCode::kNoObservedValues:
    case ErrorCode::kClassTooSmall:
    case ErrorCode::kDivergence:
    case ErrorCode::kOneClassOnly:
    case ErrorCode::kEmptyMask:
      return kDegenerate;
    case ErrorCode::kInternal:
      return kInternal;
    default:
      return kInvalid;
  }
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kInternal, "SHA-256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + p.string() + "'");
  out << data;
  if (!out) throw Error(ErrorCode::kIo, "write to '" + p.string() + "' failed");
}

void write_json(const fs::path& p, const Json& j) { write_file(p, j.dump(2) + "\n"); }

recon::FeatureTable read_table(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.string() + "'");
  return recon::from_csv(in);
}

std::vector<recon::PacketRecord> read_packets(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.string() + "'");
  return recon::read_pcap(in).packets;
}

// Shared state of one command invocation.
struct Run {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_dir;

  nlohmann::json file_config = nlohmann::json::object();
  nlohmann::json stage = nlohmann::json::object();  // effective stage block
  Json inputs = Json::object();
  Json outputs = Json::array();
  std::optional<std::uint64_t> seed;

  void load() {
    if (!config_path.empty()) {
      file_config = read_json(config_path);
      if (!file_config.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
      if (file_config.contains(command)) stage = file_config[command];
      if (!stage.is_object()) throw Error(ErrorCode::kInvalidArgument, "config block '" + command + "' must be an object");
    }
    seed = seed_flag;
    if (!seed && stage.contains("seed")) seed = stage["seed"].get<std::uint64_t>();
    if (!seed && file_config.contains("seed")) seed = file_config["seed"].get<std::uint64_t>();
    fs::create_directories(out_dir);
  }

  std::uint64_t require_seed() const {
    if (!seed) throw Error(ErrorCode::kInvalidArgument, command + " is stochastic and needs --seed or a config seed");
    return *seed;
  }

  void input(const std::string& role, const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::kInvalidArgument, role + " file '" + path + "' does not exist");
    inputs[role] = path;
  }

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return fs::path(out_dir) / name;
  }

  void write_manifest(double seconds) const {
    const std::string canonical = nlohmann::json{{"command", command}, {"config", stage}, {"seed", seed ? nlohmann::json(*seed) : nlohmann::json()}}.dump();
    Json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = seed ? Json(*seed) : Json();
    m["config"] = stage;
    m["config_sha256"] = sha256_hex(canonical);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["timings"] = {{"total_s", seconds}};
    write_json(fs::path(out_dir) / "manifest.json", m);
  }
};

recon::LabeledData labeled(const recon::FeatureTable& table, const std::vector<std::string>& features) {
  return features.empty() ? recon::to_labeled_data(table) : recon::to_labeled_data(table, features);
}

std::vector<std::string> selected_features(const std::string& path) {
  if (path.empty()) return {};
  const auto j = read_json(path);
  if (!j.contains("selected")) throw Error(ErrorCode::kInvalidArgument, "'" + path + "' has no 'selected' list");
  return j["selected"].get<std::vector<std::string>>();
}

std::string scores_csv(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  std::ostringstream out;
  out << "score,prediction,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    out << recon::format_double(scores[i]) << ',' << (scores[i] >= threshold ? 1 : 0) << ',' << labels[i] << '\n';
  return out.str();
}

std::vector<double> read_scores(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.string() + "'");
  const auto records = recon::csv::read(in);
  if (records.empty()) throw Error(ErrorCode::kSchemaMismatch, "predictions file is empty");
  std::size_t col = records[0].size();
  for (std::size_t c = 0; c < records[0].size(); ++c)
    if (records[0][c] == "score") col = c;
  if (col == records[0].size()) throw Error(ErrorCode::kMissingColumn, "predictions file has no 'score' column");
  std::vector<double> scores;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != records[0].size())
      throw Error(ErrorCode::kRaggedRow, "predictions row " + std::to_string(r) + " is ragged");
    try {
      std::size_t used = 0;
      scores.push_back(std::stod(records[r][col], &used));
      if (used != records[r][col].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kSchemaMismatch, "bad score '" + records[r][col] + "'");
    }
  }
  return scores;
}

recon::TemporalConfig temporal_config(const nlohmann::json& stage) {
  recon::TemporalConfig t;
  t.window_s = stage.value("window_s", t.window_s);
  const auto anchor = stage.value("anchor", std::string("forward"));
  if (anchor == "forward") t.anchor = recon::WindowAnchor::kForward;
  else if (anchor == "trailing") t.anchor = recon::WindowAnchor::kTrailing;
  else throw Error(ErrorCode::kInvalidArgument, "anchor must be forward or trailing");
  return t;
}

recon::FlowTimeouts flow_timeouts(const nlohmann::json& stage) {
  recon::FlowTimeouts t;
  t.tcp_idle_s = stage.value("tcp_idle_s", t.tcp_idle_s);
  t.other_idle_s = stage.value("other_idle_s", t.other_idle_s);
  if (!(t.tcp_idle_s > 0 && t.other_idle_s > 0)) throw Error(ErrorCode::kInvalidArgument, "timeouts must be > 0");
  return t;
}

recon::GaConfig ga_config(const nlohmann::json& j, std::uint64_t seed) {
  recon::GaConfig g;
  g.generations = j.value("generations", g.generations);
  g.population = j.value("population", g.population);
  g.tournament = j.value("tournament", g.tournament);
  g.crossover_swap = j.value("crossover_swap", g.crossover_swap);
  g.mutation_rate = j.value("mutation_rate", g.mutation_rate);
  g.elitism = j.value("elitism", g.elitism);
  if (j.contains("estimator")) g.estimator = recon::LearnerSpec::from_json(j["estimator"]);
  g.seed = seed;
  return g;
}

// ---------------------------------------------------------------------------
// Commands. Each returns after writing its artifacts.

struct Options {
  std::string pcap, labels, features, train, val, data, model, predictions, rules, space, selection;
  std::string model_type = "ensemble";
  std::size_t flows = 5000;
  double probe_fraction = 0.1;
  double threshold = 0.5;
  int budget = 20;
  std::size_t row = 0;
  int target = 1;
  bool guided = false;
};

void cmd_synth(Run& run, const Options& o) {
  const std::uint64_t seed = run.require_seed();
  recon::ScenarioConfig scenario;
  if (run.stage.contains("bursts") || run.stage.contains("n_benign_flows")) {
    nlohmann::json s = run.stage;
    s["seed"] = seed;
    scenario = recon::ScenarioConfig::from_json(s);
  } else {
    const std::size_t flows = run.stage.value("flows", o.flows);
    const double fraction = run.stage.value("probe_fraction", o.probe_fraction);
    run.stage["flows"] = flows;
    run.stage["probe_fraction"] = fraction;
    scenario = recon::default_scenario(flows, fraction, seed);
  }
  const recon::GeneratedTraffic traffic = recon::gen_dataset(scenario);
  const auto bytes = recon::write_pcap(traffic.packets);
  write_file(run.output("capture.pcap"), std::string(bytes.begin(), bytes.end()));
  std::ostringstream labels;
  recon::write_ground_truth_csv(traffic.truth, labels);
  write_file(run.output("labels.csv"), labels.str());
  write_json(run.output("scenario.json"), scenario.to_json());
}

void cmd_extract(Run& run, const Options& o) {
  run.input("pcap", o.pcap);
  const auto packets = read_packets(o.pcap);
  const auto e = recon::extract_features(packets, temporal_config(run.stage), flow_timeouts(run.stage));
  write_file(run.output("features.csv"), recon::to_csv(e.merged));
  write_file(run.output("flow_set.csv"), recon::to_csv(e.flow_set));
  write_file(run.output("session_set.csv"), recon::to_csv(e.session_set));
  write_file(run.output("temporal_set.csv"), recon::to_csv(e.temporal_set));
}

void cmd_dataset(Run& run, const Options& o) {
  run.input("features", o.features);
  run.input("labels", o.labels);
  recon::DatasetConfig dc;
  const auto& s = run.stage;
  dc.drop.max_missing_fraction = s.value("max_missing_fraction", dc.drop.max_missing_fraction);
  const auto fill = s.value("numeric_fill", std::string("mean"));
  if (fill == "mean") dc.impute.numeric = recon::NumericFill::kMean;
  else if (fill == "median") dc.impute.numeric = recon::NumericFill::kMedian;
  else throw Error(ErrorCode::kInvalidArgument, "numeric_fill must be mean or median");
  dc.impute.structural_sentinel = s.value("structural_sentinel", dc.impute.structural_sentinel);
  if (s.contains("split")) {
    const auto& sp = s["split"];
    dc.split.train = sp.value("train", dc.split.train);
    dc.split.val = sp.value("val", dc.split.val);
    dc.split.test = sp.value("test", dc.split.test);
    dc.split.stratified = sp.value("stratified", dc.split.stratified);
  }
  dc.split.seed = run.require_seed();

  const recon::FeatureTable merged = read_table(o.features);
  std::ifstream lin(o.labels, std::ios::binary);
  const recon::GroundTruth truth = recon::read_ground_truth_csv(lin);
  std::vector<recon::LabelSet> sets = {{recon::LabelSource::kExpertGroundTruth, truth.labels_for(merged.keys())}};
  const recon::PreparedDataset ds = recon::prepare_dataset(merged, sets, dc);

  write_file(run.output("train.csv"), recon::to_csv(ds.train));
  write_file(run.output("val.csv"), recon::to_csv(ds.val));
  write_file(run.output("test.csv"), recon::to_csv(ds.test));
  Json report;
  report["rows"] = {{"train", ds.train.num_rows()}, {"val", ds.val.num_rows()}, {"test", ds.test.num_rows()}};
  auto& dropped = report["dropped"] = Json::array();
  for (const auto& d : ds.dropped.dropped) {
    Json e = {{"column", d.column}, {"reason", recon::to_string(d.reason)}};
    if (!d.duplicate_of.empty()) e["duplicate_of"] = d.duplicate_of;
    dropped.push_back(e);
  }
  Json positives = Json::object();
  for (const auto& [src, n] : ds.labels.positives) positives[std::string(recon::to_string(src))] = n;
  report["labels"] = {{"rows", ds.labels.rows}, {"disagreements", ds.labels.disagreements}, {"positives", positives}};
  std::vector<std::string> columns;
  for (const auto& c : ds.train.columns()) columns.push_back(c.name);
  report["columns"] = columns;
  write_json(run.output("dataset.json"), report);
}

void cmd_select(Run& run, const Options& o) {
  run.input("train", o.train);
  run.input("val", o.val);
  const std::uint64_t seed = run.require_seed();
  const auto& s = run.stage;
  recon::FilterConfig fc;
  fc.target_threshold = s.value("target_threshold", fc.target_threshold);
  fc.k = s.value("k", fc.k);
  fc.n_trees = s.value("n_trees", fc.n_trees);
  fc.seed = seed;
  const double prune = s.value("prune_threshold", 0.75);
  const recon::GaConfig ga = ga_config(s.value("ga", nlohmann::json::object()), seed);
  const auto train = recon::to_labeled_data(read_table(o.train));
  const auto val = recon::to_labeled_data(read_table(o.val));
  const recon::SelectionReport report = recon::select_features(train, val, fc, prune, ga);
  write_json(run.output("selection.json"), report.to_json());
}

void cmd_train(Run& run, const Options& o) {
  run.input("train", o.train);
  if (!o.val.empty()) run.input("val", o.val);
  if (!o.selection.empty()) run.input("selection", o.selection);
  const std::uint64_t seed = run.require_seed();
  const auto features = selected_features(o.selection);
  const auto train = labeled(read_table(o.train), features);
  const std::optional<recon::LabeledData> val =
      o.val.empty() ? std::nullopt : std::optional(labeled(read_table(o.val), features));
  const std::string type = run.stage.value("model", o.model_type);
  run.stage["model"] = type;
  Json training;
  std::optional<recon::TrainedModel> model;
  if (type == "ensemble") {
    recon::BaggingSpec spec = run.stage.contains("bagging") ? recon::BaggingSpec::from_json(run.stage["bagging"])
                                                            : recon::BaggingSpec{};
    spec.seed = seed;
    if (spec.base.seed()) spec.base.set_seed(recon::derive_seed(seed, 1));
    model.emplace(recon::BaggingModel::fit(train, spec));
    training["spec"] = spec.to_json();
  } else if (type == "cnn") {
    recon::CnnSpec spec = run.stage.contains("cnn") ? recon::CnnSpec::from_json(run.stage["cnn"])
                                                    : recon::CnnSpec::institutional();
    spec.seed = seed;
    recon::CnnModel cnn = recon::train_cnn(train, val ? *val : recon::LabeledData{}, spec);
    auto& h = training["history"] = Json::array();
    for (const auto& e : cnn.history)
      h.push_back({{"train_loss", e.train_loss}, {"train_accuracy", e.train_accuracy}, {"val_loss", e.val_loss},
                   {"val_accuracy", e.val_accuracy}, {"val_f1", e.val_f1}});
    training["spec"] = spec.to_json();
    model.emplace(std::move(cnn));
  } else if (type == "learner") {
    recon::LearnerSpec spec = run.stage.contains("learner") ? recon::LearnerSpec::from_json(run.stage["learner"])
                                                            : recon::LearnerSpec::knn();
    if (spec.seed()) spec.set_seed(seed);
    model.emplace(recon::fit_learner(spec, train));
    training["spec"] = spec.to_json();
  } else {
    throw Error(ErrorCode::kInvalidArgument, "--model must be ensemble, cnn or learner");
  }
  if (val) training["validation"] = recon::to_json(recon::evaluate(val->y, model->predict_proba(*val), 0.5));
  write_json(run.output("model.json"), model->to_json());
  write_json(run.output("training.json"), training);
}

void cmd_tune(Run& run, const Options& o) {
  run.input("train", o.train);
  run.input("val", o.val);
  const std::uint64_t seed = run.require_seed();
  nlohmann::json space_json;
  if (!o.space.empty()) {
    run.input("space", o.space);
    space_json = read_json(o.space);
  } else if (run.stage.contains("space")) {
    space_json = run.stage["space"];
  } else {
    throw Error(ErrorCode::kInvalidArgument, "tune needs --space or a config 'space' block");
  }
  const recon::SearchSpace space = recon::SearchSpace::from_json(space_json);
  recon::BaggingSpec base =
      run.stage.contains("base") ? recon::BaggingSpec::from_json(run.stage["base"]) : recon::BaggingSpec{};
  base.seed = seed;
  const int budget = run.stage.value("budget", o.budget);
  run.stage["budget"] = budget;
  const auto features = selected_features(o.selection);
  const auto train = labeled(read_table(o.train), features);
  const auto val = labeled(read_table(o.val), features);
  const recon::TuneResult result = recon::random_search_tune(base, space, budget, train, val, seed);
  write_json(run.output("tune.json"), result.to_json());
  write_json(run.output("best_spec.json"), result.best.to_json());
}

void cmd_eval(Run& run, const Options& o) {
  run.input("data", o.data);
  const recon::FeatureTable table = read_table(o.data);
  if (!table.has_labels()) throw Error(ErrorCode::kInvalidArgument, "evaluation data has no label column");
  const std::vector<int>& y = table.labels();
  const double threshold = run.stage.value("threshold", o.threshold);
  std::vector<double> scores;
  if (!o.predictions.empty()) {
    run.input("predictions", o.predictions);
    scores = read_scores(o.predictions);
  } else if (!o.model.empty()) {
    run.input("model", o.model);
    const auto model = recon::TrainedModel::from_json(read_json(o.model));
    scores = model.predict_proba(recon::to_labeled_data(table, model.schema()));
    write_file(run.output("predictions.csv"), scores_csv(scores, y, threshold));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "eval needs --model or --predictions");
  }
  if (scores.size() != y.size())
    throw Error(ErrorCode::kLengthMismatch, std::to_string(scores.size()) + " predictions for " +
                                                std::to_string(y.size()) + " labeled rows");
  const recon::EvalReport report = recon::evaluate(y, scores, threshold);
  write_json(run.output("eval.json"), recon::to_json(report));
  if (report.roc) {
    std::ostringstream roc;
    recon::write_roc_csv(*report.roc, roc);
    write_file(run.output("roc.csv"), roc.str());
  }
}

void cmd_compare(Run& run, const Options& o) {
  run.input("pcap", o.pcap);
  run.input("data", o.data);
  run.input("model", o.model);
  std::vector<recon::MisuseRule> rules = recon::default_rules();
  if (!o.rules.empty()) {
    run.input("rules", o.rules);
    rules = recon::parse_rules(read_json(o.rules));
  }
  const auto packets = read_packets(o.pcap);
  const auto flows = recon::assemble_flows(packets, flow_timeouts(run.stage));
  const auto temporal = recon::count_signals_windowed(packets, flows, temporal_config(run.stage));
  std::map<recon::RowKey, std::size_t> index;
  for (std::size_t f = 0; f < flows.size(); ++f) index.emplace(recon::RowKey{flows[f].start_ts, flows[f].key}, f);

  const recon::FeatureTable table = read_table(o.data);
  if (!table.has_labels()) throw Error(ErrorCode::kInvalidArgument, "comparison data has no label column");
  std::vector<recon::FlowRecord> sub_flows;
  std::vector<recon::TemporalFeatureRow> sub_temporal;
  for (const auto& key : table.keys()) {
    const auto it = index.find(key);
    if (it == index.end())
      throw Error(ErrorCode::kRowSetMismatch, "a data row has no matching flow in the capture");
    sub_flows.push_back(flows[it->second]);
    sub_temporal.push_back(temporal[it->second]);
  }
  const recon::MisuseResult misuse = recon::misuse_detect(sub_flows, sub_temporal, rules);
  const auto model = recon::TrainedModel::from_json(read_json(o.model));
  const auto scores = model.predict_proba(recon::to_labeled_data(table, model.schema()));
  std::vector<int> anomaly(scores.size());
  const double threshold = run.stage.value("threshold", o.threshold);
  for (std::size_t i = 0; i < scores.size(); ++i) anomaly[i] = scores[i] >= threshold;
  const recon::ComparisonReport report = recon::compare(table.labels(), anomaly, misuse.verdicts);
  Json j = recon::to_json(report);
  auto& hits = j["rule_hits"] = Json::object();
  for (const auto& [id, n] : misuse.rule_hits) hits[id] = n;
  write_json(run.output("compare.json"), j);
}

void cmd_saliency(Run& run, const Options& o) {
  run.input("model", o.model);
  run.input("data", o.data);
  const auto model = recon::TrainedModel::from_json(read_json(o.model));
  const recon::CnnModel* cnn = model.cnn();
  if (!cnn) throw Error(ErrorCode::kInvalidArgument, "saliency needs a CNN model");
  const recon::FeatureTable table = read_table(o.data);
  const auto data = recon::to_labeled_data(table, model.schema());
  if (o.row >= data.size())
    throw Error(ErrorCode::kInvalidArgument, "row " + std::to_string(o.row) + " is out of range");
  const auto image = cnn->encoding().encode(data.x.row(o.row));
  const auto sal = cnn->saliency(image, o.target, o.guided);
  const double peak = *std::max_element(sal.begin(), sal.end());
  const std::size_t side = cnn->encoding().side;
  std::ostringstream img, map;
  recon::write_pgm(img, image, side, 0.0, 1.0);
  recon::write_pgm(map, sal, side, 0.0, peak > 0 ? peak : 1.0);
  write_file(run.output("input.pgm"), img.str());
  write_file(run.output("saliency.pgm"), map.str());
  // Per-feature saliency: mean over the feature's repeated pixels.
  const auto& enc = cnn->encoding();
  std::vector<double> per_feature(enc.d, 0.0);
  for (std::size_t i = 0; i < enc.repeats * enc.d; ++i) per_feature[i % enc.d] += sal[i];
  for (double& v : per_feature) v /= static_cast<double>(enc.repeats);
  Json j;
  j["row"] = o.row;
  j["target"] = o.target;
  j["guided"] = o.guided;
  j["probabilities"] = cnn->probabilities(image);
  Json features = Json::object();
  for (std::size_t f = 0; f < enc.d; ++f) features[model.schema()[f]] = per_feature[f];
  j["per_feature"] = features;
  j["pixels"] = sal;
  write_json(run.output("saliency.json"), j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-to-verdict probing detection pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Run run;
  Options o;

  std::vector<std::pair<CLI::App*, std::function<void(Run&, const Options&)>>> commands;
  auto add = [&](const std::string& name, const std::string& help, std::function<void(Run&, const Options&)> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", run.config_path, "JSON config; the block named after the command applies");
    sub->add_option("--seed", run.seed_flag, "seed for stochastic stages");
    sub->add_option("--out", run.out_dir, "output directory")->required();
    commands.emplace_back(sub, std::move(fn));
    return sub;
  };

  auto* synth = add("synth", "generate a labeled synthetic capture", cmd_synth);
  synth->add_option("--flows", o.flows, "total flows of the default scenario");
  synth->add_option("--probe-fraction", o.probe_fraction, "share of probing flows");

  auto* extract = add("extract", "pcap -> merged feature table", cmd_extract);
  extract->add_option("--pcap", o.pcap)->required();

  auto* dataset = add("dataset", "label, clean, encode, split and impute", cmd_dataset);
  dataset->add_option("--features", o.features)->required();
  dataset->add_option("--labels", o.labels, "ground-truth CSV")->required();

  auto* select = add("select", "filter -> prune -> GA feature selection", cmd_select);
  select->add_option("--train", o.train)->required();
  select->add_option("--val", o.val)->required();

  auto* train = add("train", "fit an ensemble, CNN or bare learner", cmd_train);
  train->add_option("--train", o.train)->required();
  train->add_option("--val", o.val);
  train->add_option("--model", o.model_type, "ensemble | cnn | learner");
  train->add_option("--selection", o.selection, "selection.json whose 'selected' list restricts features");

  auto* tune = add("tune", "random-search bagging hyperparameters", cmd_tune);
  tune->add_option("--train", o.train)->required();
  tune->add_option("--val", o.val)->required();
  tune->add_option("--space", o.space, "search-space JSON");
  tune->add_option("--budget", o.budget);
  tune->add_option("--selection", o.selection);

  auto* eval = add("eval", "score a model or a predictions file against labels", cmd_eval);
  eval->add_option("--data", o.data)->required();
  eval->add_option("--model", o.model);
  eval->add_option("--predictions", o.predictions, "CSV with a 'score' column");
  eval->add_option("--threshold", o.threshold);

  auto* compare = add("compare", "anomaly model vs misuse rules on the same rows", cmd_compare);
  compare->add_option("--pcap", o.pcap)->required();
  compare->add_option("--data", o.data)->required();
  compare->add_option("--model", o.model)->required();
  compare->add_option("--rules", o.rules, "rule JSON; built-in rules when absent");
  compare->add_option("--threshold", o.threshold);

  auto* saliency = add("saliency", "CNN saliency map of one row", cmd_saliency);
  saliency->add_option("--model", o.model)->required();
  saliency->add_option("--data", o.data)->required();
  saliency->add_option("--row", o.row);
  saliency->add_option("--target", o.target)->check(CLI::Range(0, 1));
  saliency->add_flag("--guided", o.guided, "guided back-propagation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    for (auto& [sub, fn] : commands) {
      if (!sub->parsed()) continue;
      run.command = sub->get_name();
      run.load();
      fn(run, o);
      run.write_manifest(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return kOk;
  } catch (const Error& e) {
    std::cerr << "recon " << run.command << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "recon " << run.command << ": invalid JSON value: " << e.what() << '\n';
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "recon " << run.command << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "recon " << run.command << ": internal error: " << e.what() << '\n';
    return kInternal;
  }
}
