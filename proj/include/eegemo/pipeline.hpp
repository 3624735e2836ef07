#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegemo/dwt.hpp"
#include "eegemo/features.hpp"
#include "eegemo/metrics.hpp"
#include "eegemo/rnn.hpp"
#include "eegemo/signal_io.hpp"

namespace eegemo::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kOutputDirEnv = "EEGEMO_OUTPUT_DIR";

struct FileEntry {
  std::filesystem::path path;
  std::optional<EmotionLabel> label;
  std::optional<int> session;
  std::string subject;
};

enum class Evaluation { Session, FiveFold };

struct KnnSettings {
  std::vector<std::size_t> candidates = {1, 3, 5, 7};
  double c = 2.0;
  std::size_t folds = 5;
  bool per_subject = false;
};

/// Every key except the data inputs has a default; see README for the file format.
struct PipelineConfig {
  std::vector<FileEntry> files;
  std::filesystem::path data_directory;  // optional <subject>-<label>-<session>.csv discovery
  std::string timestamp_column;
  std::map<Channel, std::string> channel_columns;  // defaults to the channel name
  std::string label_column;
  std::map<std::string, int> session_map;  // file name -> session

  std::vector<Channel> channels = {kAllChannels.begin(), kAllChannels.end()};
  double sampling_rate_hz = 256.0;
  std::size_t window_length = 256;
  double overlap = 0.0;

  std::string wavelet = "db4";
  std::filesystem::path wavelet_table;
  std::size_t levels = 5;
  dwt::ExtensionMode extension_mode = dwt::ExtensionMode::Symmetric;
  BandPolicy band_policy = BandPolicy::AllBands;

  bool standardize = true;
  Evaluation evaluation = Evaluation::Session;
  std::size_t eval_folds = 5;
  KnnSettings knn;
  rnn::TrainConfig rnn;  // its seed is always derived from `seed`

  std::filesystem::path output_dir;
  std::uint64_t seed = 42;
};

/// Relative paths are resolved against `base_dir`. Throws InvalidConfig.
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical echo of the resolved configuration (output_dir excluded).
nlohmann::json to_json(const PipelineConfig& cfg);

/// Hex FNV-1a of the canonical echo. Stamped into every stage artifact.
std::string config_hash(const PipelineConfig& cfg);

struct ResolvedFile {
  std::filesystem::path path;
  EmotionLabel label = EmotionLabel::Positive;
  int session = 1;
  std::string subject;
};

/// Explicit entries first, then discovered files (sorted by name). Missing
/// labels are inferred from the file name; missing sessions from the order of
/// appearance within each (subject, label). Throws MissingFile.
std::vector<ResolvedFile> resolve_inputs(const PipelineConfig& cfg);

struct FeatureRow {
  std::string split;  // "train", "test", or "all" under fivefold evaluation
  std::string subject;
  int session = 1;
  std::size_t recording = 0;
  std::size_t offset = 0;
  FeatureVector vector;
};

struct FeatureTable {
  std::string config_hash;
  std::vector<Channel> channels;
  std::vector<FeatureRow> rows;
};

FeatureTable extract_features(const PipelineConfig& cfg);

/// "# config_hash=<hex>" line, then split,subject,session,recording,offset,
/// <feature columns>,label.
void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in);

struct ComparisonRow {
  std::string classifier;
  std::vector<double> values;
};

struct ComparisonTable {
  std::vector<std::string> metrics;
  std::vector<ComparisonRow> rows;
};

void write_comparison_csv(std::ostream& out, const ComparisonTable& table);
ComparisonTable read_comparison_csv(std::istream& in);

/// Grouped bar chart, one <g class="metric-group"> per metric column.
std::string render_comparison_svg(const ComparisonTable& table);

struct EvaluationSummary {
  metrics::EvalReport knn;
  metrics::EvalReport rnn;
};

// Stage entry points. Each reads the previous stage's artifacts from
// `out_dir`, checks their config hash, and writes its own.
void stage_features(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
void stage_train_knn(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
void stage_train_rnn(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
EvaluationSummary stage_evaluate(const PipelineConfig& cfg, const std::filesystem::path& out_dir);
void stage_plot(const std::filesystem::path& out_dir);

/// All stages into a staging directory that is promoted into `out_dir` only
/// when every stage succeeded; on failure nothing is left behind.
EvaluationSummary run(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

/// --out, then $EEGEMO_OUTPUT_DIR, then the config's output_dir, then "eegemo-out".
std::filesystem::path resolve_output_dir(const PipelineConfig& cfg,
                                         const std::optional<std::filesystem::path>& cli_out);

}  // namespace eegemo::pipeline
