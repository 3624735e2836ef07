// eegemo: command-line driver for the EEG emotion-classification pipeline.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eegemo/error.hpp"
#include "eegemo/pipeline.hpp"
#include "eegemo/random.hpp"
#include "eegemo/synthetic.hpp"

namespace fs = std::filesystem;
namespace pl = eegemo::pipeline;

namespace {

std::string quote(std::string_view msg) {
  std::string out;
  for (char c : msg) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out;
}

int fail(const std::string& stage, std::string_view kind, std::string_view msg) {
  std::cerr << "error stage=" << stage << " kind=" << kind << " message=\"" << quote(msg) << "\"\n";
  return 1;
}

void print_summary(const pl::EvaluationSummary& s) {
  std::cout << "kNN\n" << eegemo::metrics::format_report(s.knn) << '\n';
  std::cout << "RNN\n" << eegemo::metrics::format_report(s.rnn);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG emotion classification: DWT features, kNN and RNN classifiers"};
  app.set_version_flag("--version", std::string(pl::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
  };
  auto* run = app.add_subcommand("run", "run every stage and publish all artifacts");
  add_common(run);
  run->add_option("--seed", seed, "override the config seed");
  auto* features = app.add_subcommand("features", "extract and export features.csv");
  auto* train_knn = app.add_subcommand("train-knn", "fit kNN models from features.csv");
  auto* train_rnn = app.add_subcommand("train-rnn", "train the RNN from features.csv");
  auto* evaluate = app.add_subcommand("evaluate", "score both classifiers and write reports");
  for (auto* sub : {features, train_knn, train_rnn, evaluate}) add_common(sub);
  auto* plot = app.add_subcommand("plot", "render comparison.svg from comparison.csv");
  plot->add_option("--out", out_dir, "directory holding comparison.csv");
  auto* synth = app.add_subcommand("synth", "write the synthetic three-class fixture");
  synth->add_option("--out", out_dir, "destination directory")->required();

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (synth->parsed()) {
      std::cout << eegemo::synthetic::write_dataset(out_dir, {}).string() << '\n';
      return 0;
    }
    if (plot->parsed()) {
      pl::stage_plot(out_dir.empty() ? pl::resolve_output_dir({}, std::nullopt) : fs::path(out_dir));
      return 0;
    }

    const std::string stage_name = stage;
    stage = "config";
    pl::PipelineConfig cfg = pl::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.rnn.seed = eegemo::derive_seed(cfg.seed, "rnn");
    }
    const fs::path out = pl::resolve_output_dir(
        cfg, out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir));
    stage = stage_name;

    if (run->parsed()) {
      print_summary(pl::run(cfg, out));
    } else if (features->parsed()) {
      pl::stage_features(cfg, out);
    } else if (train_knn->parsed()) {
      pl::stage_train_knn(cfg, out);
    } else if (train_rnn->parsed()) {
      pl::stage_train_rnn(cfg, out);
    } else if (evaluate->parsed()) {
      print_summary(pl::stage_evaluate(cfg, out));
    }
    return 0;
  } catch (const eegemo::Error& e) {
    return fail(stage, eegemo::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(stage, "Internal", e.what());
  }
}
