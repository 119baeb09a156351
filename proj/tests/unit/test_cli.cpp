#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "recon/capture_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("recon_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& rel) { return (work_dir() / rel).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(RECON_CLI_PATH) + " " + args + " >" + path("last.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& p) { return nlohmann::json::parse(slurp(p)); }

void write_file(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// synth -> extract -> dataset -> train -> eval into `dir`.
void pipeline(const std::string& dir) {
  REQUIRE(run("synth --seed 4 --flows 600 --probe-fraction 0.1 --out " + path(dir + "/synth")) == 0);
  REQUIRE(run("extract --pcap " + path(dir + "/synth/capture.pcap") + " --out " + path(dir + "/extract")) == 0);
  REQUIRE(run("dataset --seed 4 --features " + path(dir + "/extract/features.csv") + " --labels " +
              path(dir + "/synth/labels.csv") + " --out " + path(dir + "/dataset")) == 0);
  write_file(path(dir + "/train.json"),
             R"({"train":{"bagging":{"base":{"kind":"GNB"},"n_estimators":3,"max_features":0.8}}})");
  REQUIRE(run("train --seed 4 --config " + path(dir + "/train.json") + " --train " + path(dir + "/dataset/train.csv") +
              " --val " + path(dir + "/dataset/val.csv") + " --model ensemble --out " + path(dir + "/train")) == 0);
  REQUIRE(run("eval --data " + path(dir + "/dataset/test.csv") + " --model " + path(dir + "/train/model.json") +
              " --out " + path(dir + "/eval")) == 0);
}

}  // namespace

TEST_CASE("stages chain and rerun byte-identically") {
  pipeline("a");
  pipeline("b");
  for (const char* artifact : {"synth/capture.pcap", "synth/labels.csv", "extract/features.csv", "dataset/train.csv",
                               "dataset/test.csv", "train/model.json", "eval/eval.json", "eval/roc.csv"}) {
    CAPTURE(artifact);
    const auto a = slurp(path(std::string("a/") + artifact));
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(path(std::string("b/") + artifact)));
  }
  const auto manifest = read_json(path("a/train/manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 4);
  CHECK(manifest["config_sha256"].get<std::string>().size() == 64);
  CHECK(manifest["config_sha256"] == read_json(path("b/train/manifest.json"))["config_sha256"]);
  CHECK(manifest["timings"].contains("total_s"));
  const auto eval = read_json(path("a/eval/eval.json"));
  CHECK(eval["metrics"]["f1"].get<double>() >= 0.0);
}

TEST_CASE("empty capture extracts to header-only tables") {
  const auto bytes = recon::write_pcap({});
  write_file(path("empty.pcap"), std::string(bytes.begin(), bytes.end()));
  CHECK(run("extract --pcap " + path("empty.pcap") + " --out " + path("empty")) == 0);
  const auto csv = slurp(path("empty/features.csv"));
  CHECK(csv.find('\n') == csv.size() - 1);
}

TEST_CASE("usage and domain errors map to exit codes") {
  CHECK(run("synth --flows 100 --out " + path("noseed")) == 2);
  CHECK(run("extract --out " + path("nopcap")) == 2);
  CHECK(run("frobnicate --out " + path("x")) == 2);
  write_file(path("bad.pcap"), std::string(24, '\0'));
  CHECK(run("extract --pcap " + path("bad.pcap") + " --out " + path("bad")) == 2);
}

TEST_CASE("eval rejects predictions of the wrong length") {
  pipeline("c");
  write_file(path("preds.csv"), "score\n0.5\n0.1\n");
  CHECK(run("eval --data " + path("c/dataset/test.csv") + " --predictions " + path("preds.csv") + " --out " +
            path("mismatch")) == 2);
}
