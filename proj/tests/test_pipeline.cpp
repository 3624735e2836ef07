#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "eegemo/error.hpp"
#include "eegemo/pipeline.hpp"
#include "eegemo/synthetic.hpp"
#include "oracles.hpp"

using namespace eegemo;
using namespace eegemo::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no eegemo::Error thrown");
  return ErrorKind::IoError;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("eegemo-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fixture(const std::string& name) {
  synthetic::Options opt;
  opt.seconds = 32.0;
  return synthetic::write_dataset(scratch(name), opt);
}

PipelineConfig fast_config(const fs::path& config_path) {
  PipelineConfig cfg = load_config(config_path);
  cfg.rnn.epochs = 60;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const json doc = json::parse(R"({"data": {"files": ["a-positive-1.csv"]}})");
  const auto cfg = config_from_json(doc, "/base");
  REQUIRE(cfg.files.size() == 1);
  CHECK(cfg.files[0].path == fs::path("/base/a-positive-1.csv"));
  CHECK(cfg.channels.size() == 4);
  CHECK(cfg.sampling_rate_hz == 256.0);
  CHECK(cfg.window_length == 256);
  CHECK(cfg.overlap == 0.0);
  CHECK(cfg.wavelet == "db4");
  CHECK(cfg.levels == 5);
  CHECK(cfg.extension_mode == dwt::ExtensionMode::Symmetric);
  CHECK(cfg.band_policy == BandPolicy::AllBands);
  CHECK(cfg.standardize);
  CHECK(cfg.evaluation == Evaluation::Session);
  CHECK(cfg.knn.candidates == std::vector<std::size_t>{1, 3, 5, 7});
  CHECK(cfg.knn.c == 2.0);
  CHECK(cfg.knn.folds == 5);
  CHECK(cfg.rnn.hidden_size == 16);
  CHECK(cfg.rnn.sequence_length == 8);
  CHECK(cfg.seed == 42);
  CHECK(cfg.rnn.seed == derive_seed(42, "rnn"));

  const json custom = json::parse(R"({
    "data": {"files": [{"path": "/x/f.csv", "label": "negative", "session": 4, "subject": "p1"}]},
    "channels": ["TP10", "AF7"], "levels": 4, "window_length": 128, "overlap": 0.5,
    "band_policy": "theta", "extension_mode": "periodic", "evaluation": "fivefold",
    "knn": {"candidates": [1, 3], "c": 1, "mode": "per_subject"},
    "rnn": {"hidden_size": 4, "epochs": 3}, "seed": 9})");
  const auto c2 = config_from_json(custom, "/base");
  CHECK(c2.files[0].label == EmotionLabel::Negative);
  CHECK(c2.files[0].session == 4);
  CHECK(c2.channels == std::vector<Channel>{Channel::AF7, Channel::TP10});
  CHECK(c2.band_policy == BandPolicy::ThetaOnly);
  CHECK(c2.extension_mode == dwt::ExtensionMode::Periodic);
  CHECK(c2.evaluation == Evaluation::FiveFold);
  CHECK(c2.knn.per_subject);
  CHECK(c2.rnn.hidden_size == 4);
  CHECK(c2.seed == 9);
  CHECK(config_hash(c2) != config_hash(cfg));
  CHECK(config_hash(c2) == config_hash(config_from_json(custom, "/base")));
}

TEST_CASE("invalid configs are rejected") {
  auto bad = [](const char* text) {
    return kind_of([&] { config_from_json(json::parse(text), "/"); });
  };
  CHECK(bad(R"({})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "windw_length": 3})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "window_length": 100})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "channels": ["Cz"]})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "channels": []})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "knn": {"c": 0.5}})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "overlap": 1.0})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "levels": "five"})") == ErrorKind::InvalidConfig);
  CHECK(bad(R"({"data": {"files": ["a.csv"]}, "evaluation": "loo"})") == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { load_config("/nonexistent/config.json"); }) == ErrorKind::MissingFile);
}

TEST_CASE("directory discovery infers labels, sessions and subjects") {
  const fs::path dir = scratch("discover");
  for (const char* name : {"p2-NEGATIVE-3.csv", "p2-negative-1.csv", "neutral-2.csv", "notes.csv"}) {
    std::ofstream(dir / name) << "TP9\n1\n";
  }
  PipelineConfig cfg = config_from_json(json{{"data", {{"directory", dir.string()}}}}, "/");
  const auto files = resolve_inputs(cfg);
  REQUIRE(files.size() == 3);
  CHECK(files[0].path.filename() == "neutral-2.csv");
  CHECK(files[0].label == EmotionLabel::Neutral);
  CHECK(files[0].session == 2);
  CHECK(files[0].subject.empty());
  CHECK(files[1].label == EmotionLabel::Negative);
  CHECK(files[1].session == 3);
  CHECK(files[1].subject == "p2");
}

TEST_CASE("explicit files take labels from names and sessions from order") {
  const fs::path dir = scratch("explicit");
  for (const char* name : {"calm_neutral.csv", "neutral_again.csv", "x.csv"}) std::ofstream(dir / name) << "TP9\n1\n";
  auto cfg = config_from_json(
      json::parse(R"({"data": {"files": ["calm_neutral.csv", "neutral_again.csv"],
                               "session_map": {"calm_neutral.csv": 7}}})"),
      dir);
  const auto files = resolve_inputs(cfg);
  CHECK(files[0].label == EmotionLabel::Neutral);
  CHECK(files[0].session == 7);
  CHECK(files[1].session == 2);

  cfg = config_from_json(json{{"data", {{"files", {"x.csv"}}}}}, dir);
  CHECK(kind_of([&] { resolve_inputs(cfg); }) == ErrorKind::InvalidConfig);
  cfg = config_from_json(json{{"data", {{"files", {"missing-positive-1.csv"}}}}}, dir);
  CHECK(kind_of([&] { resolve_inputs(cfg); }) == ErrorKind::MissingFile);
}

TEST_CASE("feature table round trip") {
  const auto cfg = load_config(fixture("features"));
  const FeatureTable table = extract_features(cfg);
  CHECK(table.rows.size() == 9 * 32);
  std::size_t test_rows = 0;
  for (const auto& r : table.rows) {
    CHECK(r.vector.values.size() == 20);
    test_rows += r.split == "test";
  }
  CHECK(test_rows == 3 * 32);
  std::stringstream io;
  write_feature_table(io, table);
  const FeatureTable back = read_feature_table(io);
  CHECK(back.config_hash == table.config_hash);
  CHECK(back.channels == table.channels);
  REQUIRE(back.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(back.rows[i].vector.values == table.rows[i].vector.values);
    CHECK(back.rows[i].vector.label == table.rows[i].vector.label);
    CHECK(back.rows[i].split == table.rows[i].split);
    CHECK(back.rows[i].offset == table.rows[i].offset);
  }
  std::istringstream broken("split,subject\n");
  CHECK(kind_of([&] { read_feature_table(broken); }) == ErrorKind::ParseError);
}

TEST_CASE("comparison plot has one bar group per metric") {
  std::istringstream in(
      "classifier,accuracy,macro_specificity,macro_sensitivity\n"
      "kNN,0.93,0.9,0.95\n"
      "RNN,0.94,0.91,0.97\n");
  const auto table = read_comparison_csv(in);
  CHECK(table.metrics.size() == 3);
  CHECK(table.rows.size() == 2);
  const std::string svg = render_comparison_svg(table);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t groups = 0;
  std::size_t bars = 0;
  for (std::size_t at = svg.find("class=\"metric-group\""); at != std::string::npos;
       at = svg.find("class=\"metric-group\"", at + 1)) {
    ++groups;
  }
  for (std::size_t at = svg.find("class=\"bar\""); at != std::string::npos; at = svg.find("class=\"bar\"", at + 1)) {
    ++bars;
  }
  CHECK(groups == 3);
  CHECK(bars == 6);
  std::istringstream ragged("classifier,accuracy\nkNN,0.9,0.1\n");
  CHECK(kind_of([&] { read_comparison_csv(ragged); }) == ErrorKind::RaggedRows);
}

TEST_CASE("run publishes every artifact and reaches high accuracy on the fixture") {
  const auto cfg = fast_config(fixture("run"));
  const fs::path out = scratch("run-out");
  const auto summary = run(cfg, out);
  for (const char* name : {"features.csv", "knn_report.json", "rnn_report.json", "confusion_knn.csv",
                           "confusion_rnn.csv", "comparison.csv", "comparison.svg", "run_manifest.json"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  CHECK_FALSE(fs::exists(out / ".eegemo-staging"));
  CHECK(summary.knn.accuracy >= 0.95);
  CHECK(summary.rnn.accuracy >= 0.95);
  const json manifest = json::parse(slurp(out / "run_manifest.json"));
  CHECK(manifest.at("config_hash") == config_hash(cfg));
  CHECK(manifest.at("accuracy").at("knn").get<double>() == summary.knn.accuracy);
  CHECK(manifest.at("version") == std::string(kVersion));
  CHECK(json::parse(slurp(out / "knn_report.json")).at("report").at("accuracy").get<double>() == summary.knn.accuracy);
  std::ifstream cmp(out / "comparison.csv");
  CHECK(read_comparison_csv(cmp).rows.size() == 2);
}

TEST_CASE("stage chain reproduces the monolithic run byte for byte") {
  const auto cfg = fast_config(fixture("chain"));
  const fs::path mono = scratch("chain-mono");
  const fs::path staged = scratch("chain-staged");
  run(cfg, mono);
  stage_features(cfg, staged);
  stage_train_knn(cfg, staged);
  stage_train_rnn(cfg, staged);
  stage_evaluate(cfg, staged);
  stage_plot(staged);
  for (const char* name : {"features.csv", "knn_model.json", "rnn_model.json", "rnn_loss.csv", "knn_report.json",
                           "rnn_report.json", "confusion_knn.csv", "confusion_rnn.csv", "comparison.csv",
                           "comparison.svg"}) {
    CHECK_MESSAGE(slurp(mono / name) == slurp(staged / name), name);
  }
}

TEST_CASE("evaluate refuses artifacts from another config") {
  auto cfg = fast_config(fixture("mismatch"));
  const fs::path out = scratch("mismatch-out");
  stage_features(cfg, out);
  stage_train_knn(cfg, out);
  stage_train_rnn(cfg, out);
  cfg.knn.candidates = {1, 3};
  CHECK(kind_of([&] { stage_evaluate(cfg, out); }) == ErrorKind::StageMismatch);
  CHECK(kind_of([&] { stage_train_knn(cfg, out); }) == ErrorKind::StageMismatch);
  CHECK(kind_of([&] { stage_evaluate(cfg, scratch("empty-out")); }) == ErrorKind::MissingFile);
}

TEST_CASE("a failing run leaves no artifacts") {
  const fs::path config_path = fixture("failing");
  json doc = json::parse(slurp(config_path));
  doc["data"]["files"][0]["path"] = "does-not-exist.csv";
  const auto cfg = config_from_json(doc, config_path.parent_path());
  const fs::path out = fs::temp_directory_path() / ("eegemo-test-" + std::to_string(::getpid())) / "failing-out";
  fs::remove_all(out);
  CHECK(kind_of([&] { run(cfg, out); }) == ErrorKind::MissingFile);
  CHECK_FALSE(fs::exists(out));

  // A failure after inputs resolve: recordings shorter than one RNN sequence.
  auto short_seq = load_config(config_path);
  short_seq.rnn.sequence_length = 1000;
  const fs::path out2 = scratch("failing-late");
  CHECK(kind_of([&] { run(short_seq, out2); }) == ErrorKind::EmptyDataset);
  CHECK(fs::is_empty(out2));
}

TEST_CASE("fivefold and per-subject modes run") {
  synthetic::Options opt;
  opt.seconds = 16.0;
  opt.subjects = {"a", "b"};
  const auto config_path = synthetic::write_dataset(scratch("fivefold"), opt);
  auto cfg = load_config(config_path);
  cfg.evaluation = Evaluation::FiveFold;
  cfg.knn.per_subject = true;
  cfg.rnn.epochs = 40;
  cfg.rnn.sequence_length = 4;
  const auto summary = run(cfg, scratch("fivefold-out"));
  CHECK(summary.knn.confusion.total() == 2 * 9 * 16);
  CHECK(summary.rnn.confusion.total() == 2 * 9 * 4);
  CHECK(summary.knn.accuracy > 0.9);
}

TEST_CASE("output directory precedence") {
  PipelineConfig cfg;
  ::unsetenv(std::string(kOutputDirEnv).c_str());
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("eegemo-out"));
  cfg.output_dir = "/from/config";
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("/from/config"));
  ::setenv(std::string(kOutputDirEnv).c_str(), "/from/env", 1);
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("/from/env"));
  CHECK(resolve_output_dir(cfg, fs::path("/from/cli")) == fs::path("/from/cli"));
  ::unsetenv(std::string(kOutputDirEnv).c_str());
}
