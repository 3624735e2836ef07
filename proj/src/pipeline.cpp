#include "eegemo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "eegemo/error.hpp"
#include "eegemo/knn.hpp"
#include "eegemo/random.hpp"
#include "eegemo/text.hpp"

namespace eegemo::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve_path(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::InvalidConfig,
                  "unknown config key '" + key + "' in " + std::string(where));
    }
  }
}

Channel channel_or_throw(const std::string& name) {
  const auto ch = parse_channel(name);
  if (!ch) throw Error(ErrorKind::InvalidConfig, "unknown channel '" + name + "'");
  return *ch;
}

EmotionLabel label_or_throw(const std::string& name) {
  const auto l = parse_label(name);
  if (!l) throw Error(ErrorKind::InvalidConfig, "unknown label '" + name + "'");
  return *l;
}

std::string evaluation_name(Evaluation e) { return e == Evaluation::Session ? "session" : "fivefold"; }

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  reject_unknown(doc,
                 {"data", "channels", "sampling_rate_hz", "window_length", "overlap", "wavelet",
                  "wavelet_table", "levels", "extension_mode", "band_policy", "standardize",
                  "evaluation", "eval_folds", "knn", "rnn", "output_dir", "seed"},
                 "top level");
  PipelineConfig cfg;
  const json data = get_or<json>(doc, "data", json::object());
  reject_unknown(data, {"files", "directory", "schema", "session_map"}, "data");
  for (const auto& entry : get_or<json>(data, "files", json::array())) {
    FileEntry f;
    if (entry.is_string()) {
      f.path = resolve_path(entry.get<std::string>(), base_dir);
    } else {
      reject_unknown(entry, {"path", "label", "session", "subject"}, "data.files[]");
      f.path = resolve_path(get_or<std::string>(entry, "path", ""), base_dir);
      if (entry.contains("label")) f.label = label_or_throw(entry.at("label").get<std::string>());
      if (entry.contains("session")) f.session = get_or<int>(entry, "session", 1);
      f.subject = get_or<std::string>(entry, "subject", "");
    }
    if (f.path.empty()) throw Error(ErrorKind::InvalidConfig, "data.files entry without a path");
    cfg.files.push_back(std::move(f));
  }
  cfg.data_directory = resolve_path(get_or<std::string>(data, "directory", ""), base_dir);
  const json schema = get_or<json>(data, "schema", json::object());
  reject_unknown(schema, {"timestamp_column", "channel_columns", "label_column"}, "data.schema");
  cfg.timestamp_column = get_or<std::string>(schema, "timestamp_column", "");
  cfg.label_column = get_or<std::string>(schema, "label_column", "");
  const json channel_columns = get_or<json>(schema, "channel_columns", json::object());
  for (const auto& [name, column] : channel_columns.items()) {
    cfg.channel_columns[channel_or_throw(name)] = column.get<std::string>();
  }
  const json session_map = get_or<json>(data, "session_map", json::object());
  for (const auto& [name, session] : session_map.items()) {
    cfg.session_map[name] = session.get<int>();
  }
  if (cfg.files.empty() && cfg.data_directory.empty()) {
    throw Error(ErrorKind::InvalidConfig, "config names no input data (data.files or data.directory)");
  }

  if (doc.contains("channels")) {
    cfg.channels.clear();
    for (const auto& name : doc.at("channels")) cfg.channels.push_back(channel_or_throw(name.get<std::string>()));
    std::sort(cfg.channels.begin(), cfg.channels.end());
    if (cfg.channels.empty() ||
        std::adjacent_find(cfg.channels.begin(), cfg.channels.end()) != cfg.channels.end()) {
      throw Error(ErrorKind::InvalidConfig, "channels must be a non-empty list without duplicates");
    }
  }
  cfg.sampling_rate_hz = get_or<double>(doc, "sampling_rate_hz", cfg.sampling_rate_hz);
  cfg.window_length = get_or<std::size_t>(doc, "window_length", cfg.window_length);
  cfg.overlap = get_or<double>(doc, "overlap", cfg.overlap);
  cfg.wavelet = text::lower(get_or<std::string>(doc, "wavelet", cfg.wavelet));
  cfg.wavelet_table = resolve_path(get_or<std::string>(doc, "wavelet_table", ""), base_dir);
  cfg.levels = get_or<std::size_t>(doc, "levels", cfg.levels);
  cfg.extension_mode = dwt::parse_mode(get_or<std::string>(doc, "extension_mode", "symmetric"));
  cfg.band_policy = parse_band_policy(get_or<std::string>(doc, "band_policy", "all"));
  cfg.standardize = get_or<bool>(doc, "standardize", cfg.standardize);
  const std::string evaluation = text::lower(get_or<std::string>(doc, "evaluation", "session"));
  if (evaluation == "session") cfg.evaluation = Evaluation::Session;
  else if (evaluation == "fivefold") cfg.evaluation = Evaluation::FiveFold;
  else throw Error(ErrorKind::InvalidConfig, "evaluation must be 'session' or 'fivefold'");
  cfg.eval_folds = get_or<std::size_t>(doc, "eval_folds", cfg.eval_folds);

  const json knn = get_or<json>(doc, "knn", json::object());
  reject_unknown(knn, {"candidates", "c", "folds", "mode"}, "knn");
  cfg.knn.candidates = get_or<std::vector<std::size_t>>(knn, "candidates", cfg.knn.candidates);
  cfg.knn.c = get_or<double>(knn, "c", cfg.knn.c);
  cfg.knn.folds = get_or<std::size_t>(knn, "folds", cfg.knn.folds);
  const std::string mode = text::lower(get_or<std::string>(knn, "mode", "pooled"));
  if (mode == "pooled") cfg.knn.per_subject = false;
  else if (mode == "per_subject") cfg.knn.per_subject = true;
  else throw Error(ErrorKind::InvalidConfig, "knn.mode must be 'pooled' or 'per_subject'");

  const json r = get_or<json>(doc, "rnn", json::object());
  reject_unknown(r, {"hidden_size", "learning_rate", "epochs", "batch_size", "grad_clip", "sequence_length"}, "rnn");
  cfg.rnn.hidden_size = get_or<std::size_t>(r, "hidden_size", cfg.rnn.hidden_size);
  cfg.rnn.learning_rate = get_or<double>(r, "learning_rate", cfg.rnn.learning_rate);
  cfg.rnn.epochs = get_or<std::size_t>(r, "epochs", cfg.rnn.epochs);
  cfg.rnn.batch_size = get_or<std::size_t>(r, "batch_size", cfg.rnn.batch_size);
  cfg.rnn.grad_clip = get_or<double>(r, "grad_clip", cfg.rnn.grad_clip);
  cfg.rnn.sequence_length = get_or<std::size_t>(r, "sequence_length", cfg.rnn.sequence_length);

  cfg.output_dir = resolve_path(get_or<std::string>(doc, "output_dir", ""), base_dir);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);

  if (!(cfg.sampling_rate_hz > 0.0)) throw Error(ErrorKind::InvalidConfig, "sampling_rate_hz must be positive");
  if (cfg.levels == 0) throw Error(ErrorKind::InvalidConfig, "levels must be >= 1");
  if (cfg.levels >= 63 || cfg.window_length == 0 || cfg.window_length % (std::size_t{1} << cfg.levels) != 0) {
    throw Error(ErrorKind::InvalidConfig, "window_length must be a positive multiple of 2^levels");
  }
  segment_stride(cfg.window_length, cfg.overlap);
  if (cfg.knn.candidates.empty() || std::count(cfg.knn.candidates.begin(), cfg.knn.candidates.end(), 0u) > 0) {
    throw Error(ErrorKind::InvalidConfig, "knn.candidates must be positive integers");
  }
  if (!(cfg.knn.c >= 1.0)) throw Error(ErrorKind::InvalidConfig, "knn.c must be >= 1");
  if (cfg.knn.folds < 2 || cfg.eval_folds < 2) throw Error(ErrorKind::InvalidConfig, "folds must be >= 2");
  if (cfg.rnn.hidden_size == 0 || cfg.rnn.batch_size == 0 || cfg.rnn.sequence_length == 0 ||
      !(cfg.rnn.learning_rate > 0.0) || !(cfg.rnn.grad_clip > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "rnn settings must be positive");
  }
  cfg.rnn.seed = derive_seed(cfg.seed, "rnn");
  return cfg;
}

}  // namespace

PipelineConfig config_from_json(const json& doc, const fs::path& base_dir) {
  try {
    return parse_config(doc, base_dir);
  } catch (const json::exception& e) {
    // a value of the wrong JSON type somewhere below a known key
    throw Error(ErrorKind::InvalidConfig, std::string("malformed config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& cfg) {
  json files = json::array();
  for (const auto& f : cfg.files) {
    json e = {{"path", f.path.string()}, {"subject", f.subject}};
    if (f.label) e["label"] = label_name(*f.label);
    if (f.session) e["session"] = *f.session;
    files.push_back(e);
  }
  json columns = json::object();
  for (const auto& [ch, col] : cfg.channel_columns) columns[std::string(channel_name(ch))] = col;
  std::vector<std::string> channels;
  for (Channel c : cfg.channels) channels.emplace_back(channel_name(c));
  return {
      {"data",
       {{"files", files},
        {"directory", cfg.data_directory.string()},
        {"schema",
         {{"timestamp_column", cfg.timestamp_column},
          {"channel_columns", columns},
          {"label_column", cfg.label_column}}},
        {"session_map", cfg.session_map}}},
      {"channels", channels},
      {"sampling_rate_hz", cfg.sampling_rate_hz},
      {"window_length", cfg.window_length},
      {"overlap", cfg.overlap},
      {"wavelet", cfg.wavelet},
      {"wavelet_table", cfg.wavelet_table.string()},
      {"levels", cfg.levels},
      {"extension_mode", dwt::mode_name(cfg.extension_mode)},
      {"band_policy", band_policy_name(cfg.band_policy)},
      {"standardize", cfg.standardize},
      {"evaluation", evaluation_name(cfg.evaluation)},
      {"eval_folds", cfg.eval_folds},
      {"knn",
       {{"candidates", cfg.knn.candidates},
        {"c", cfg.knn.c},
        {"folds", cfg.knn.folds},
        {"mode", cfg.knn.per_subject ? "per_subject" : "pooled"}}},
      {"rnn",
       {{"hidden_size", cfg.rnn.hidden_size},
        {"learning_rate", cfg.rnn.learning_rate},
        {"epochs", cfg.rnn.epochs},
        {"batch_size", cfg.rnn.batch_size},
        {"grad_clip", cfg.rnn.grad_clip},
        {"sequence_length", cfg.rnn.sequence_length}}},
      {"seed", cfg.seed},
  };
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

fs::path resolve_output_dir(const PipelineConfig& cfg, const std::optional<fs::path>& cli_out) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (const char* env = std::getenv(std::string(kOutputDirEnv).c_str()); env && *env) return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "eegemo-out";
}

// ---------------------------------------------------------------------------
// Inputs and features

std::vector<ResolvedFile> resolve_inputs(const PipelineConfig& cfg) {
  std::vector<FileEntry> entries = cfg.files;
  if (!cfg.data_directory.empty()) {
    if (!fs::is_directory(cfg.data_directory)) {
      throw Error(ErrorKind::MissingFile, "data directory not found: " + cfg.data_directory.string());
    }
    static const std::regex pattern(R"(^(?:(.*)-)?(positive|neutral|negative)-(\d+)\.csv$)",
                                    std::regex::icase);
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(cfg.data_directory)) {
      if (e.is_regular_file() && std::regex_match(e.path().filename().string(), pattern)) {
        found.push_back(e.path());
      }
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
      std::smatch m;
      const std::string name = p.filename().string();
      std::regex_match(name, m, pattern);
      FileEntry f;
      f.path = p;
      f.label = parse_label(m[2].str());
      f.session = std::stoi(m[3].str());
      f.subject = m[1].str();
      entries.push_back(std::move(f));
    }
    if (found.empty()) {
      throw Error(ErrorKind::MissingFile, "no <subject>-<label>-<session>.csv files in " +
                                              cfg.data_directory.string());
    }
  }

  std::vector<ResolvedFile> out;
  std::map<std::pair<std::string, EmotionLabel>, int> seen;
  for (const auto& e : entries) {
    if (!fs::is_regular_file(e.path)) {
      throw Error(ErrorKind::MissingFile, "data file not found: " + e.path.string());
    }
    ResolvedFile r;
    r.path = e.path;
    r.subject = e.subject;
    if (e.label) {
      r.label = *e.label;
    } else if (cfg.label_column.empty()) {
      const std::string stem = text::lower(e.path.stem().string());
      std::optional<EmotionLabel> hit;
      for (int c = 0; c < kClassCount; ++c) {
        const EmotionLabel l = label_from_index(c);
        if (stem.find(text::lower(label_name(l))) != std::string::npos) {
          if (hit) throw Error(ErrorKind::InvalidConfig, "ambiguous label in file name " + e.path.string());
          hit = l;
        }
      }
      if (!hit) throw Error(ErrorKind::InvalidConfig, "no label for " + e.path.string());
      r.label = *hit;
    }
    const int order = ++seen[{r.subject, r.label}];
    if (auto it = cfg.session_map.find(e.path.filename().string()); it != cfg.session_map.end()) {
      r.session = it->second;
    } else {
      r.session = e.session.value_or(order);
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

FeatureConfig feature_config(const PipelineConfig& cfg) {
  std::vector<dwt::WaveletFilterPair> table;
  if (!cfg.wavelet_table.empty()) table = dwt::load_wavelet_table(cfg.wavelet_table);
  FeatureConfig fc;
  fc.filters = dwt::find_wavelet(cfg.wavelet, table);
  fc.levels = cfg.levels;
  fc.mode = cfg.extension_mode;
  fc.band_policy = cfg.band_policy;
  fc.sampling_rate = cfg.sampling_rate_hz;
  return fc;
}

}  // namespace

FeatureTable extract_features(const PipelineConfig& cfg) {
  const auto inputs = resolve_inputs(cfg);
  const FeatureConfig fc = feature_config(cfg);

  ColumnSchema schema;
  schema.timestamp_column = cfg.timestamp_column;
  schema.label_column = cfg.label_column;
  for (Channel c : cfg.channels) {
    const auto it = cfg.channel_columns.find(c);
    schema.channel_columns.emplace_back(c, it != cfg.channel_columns.end() ? it->second
                                                                            : std::string(channel_name(c)));
  }

  std::vector<Segment> segments;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    schema.label = cfg.label_column.empty() ? std::optional(inputs[i].label) : std::nullopt;
    RecordingMeta meta{cfg.sampling_rate_hz, inputs[i].session, inputs[i].subject, i};
    const EegRecording rec = load_recording(inputs[i].path, schema, meta);
    auto segs = segment_recording(rec, cfg.window_length, cfg.overlap);
    std::move(segs.begin(), segs.end(), std::back_inserter(segments));
  }

  std::vector<std::pair<std::string, std::vector<Segment>>> parts;
  if (cfg.evaluation == Evaluation::Session) {
    DatasetSplit split = split_by_session(std::move(segments));
    parts.emplace_back("train", std::move(split.train));
    parts.emplace_back("test", std::move(split.test));
  } else {
    std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
      return std::tie(a.subject, a.label, a.source_session, a.recording_id, a.offset) <
             std::tie(b.subject, b.label, b.source_session, b.recording_id, b.offset);
    });
    parts.emplace_back("all", std::move(segments));
  }

  FeatureTable table;
  table.config_hash = config_hash(cfg);
  table.channels = cfg.channels;
  for (const auto& [split, segs] : parts) {
    for (const auto& s : segs) {
      table.rows.push_back({split, s.subject, s.source_session, s.recording_id, s.offset,
                            segment_features(s, fc)});
    }
  }
  return table;
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
  out << "# config_hash=" << table.config_hash << '\n';
  out << "split,subject,session,recording,offset";
  for (const auto& name : feature_names(table.channels)) out << ',' << name;
  out << ",label\n";
  for (const auto& r : table.rows) {
    out << r.split << ',' << r.subject << ',' << r.session << ',' << r.recording << ',' << r.offset;
    for (double v : r.vector.values) out << ',' << text::format_double(v);
    out << ',' << label_name(r.vector.label) << '\n';
  }
}

FeatureTable read_feature_table(std::istream& in) {
  FeatureTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# config_hash=", 0) != 0) {
    throw Error(ErrorKind::ParseError, "features.csv: missing config_hash line");
  }
  table.config_hash = std::string(text::trim(line.substr(14)));
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "features.csv: missing header");
  const auto header = text::split_csv(line);
  constexpr std::size_t kMeta = 5;
  if (header.size() < kMeta + 1 + kStatisticsPerChannel ||
      (header.size() - kMeta - 1) % kStatisticsPerChannel != 0 || header.back() != "label") {
    throw Error(ErrorKind::ParseError, "features.csv: unexpected header layout");
  }
  for (std::size_t i = kMeta; i + 1 < header.size(); i += kStatisticsPerChannel) {
    const std::string_view col = header[i];
    table.channels.push_back(channel_or_throw(std::string(col.substr(0, col.find('_')))));
  }
  const auto expect = feature_names(table.channels);
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (header[kMeta + i] != expect[i]) {
      throw Error(ErrorKind::ParseError, "features.csv: unexpected column " + std::string(header[kMeta + i]));
    }
  }
  std::size_t row_no = 2;
  while (std::getline(in, line)) {
    ++row_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    const auto where = "features.csv row " + std::to_string(row_no);
    if (f.size() != header.size()) throw Error(ErrorKind::RaggedRows, where + ": wrong field count");
    FeatureRow r;
    r.split = std::string(f[0]);
    r.subject = std::string(f[1]);
    const auto session = text::parse_finite(f[2]);
    const auto recording = text::parse_finite(f[3]);
    const auto offset = text::parse_finite(f[4]);
    const auto label = parse_label(f.back());
    if (!session || !recording || !offset || !label || *recording < 0 || *offset < 0) {
      throw Error(ErrorKind::ParseError, where + ": malformed metadata");
    }
    r.session = static_cast<int>(*session);
    r.recording = static_cast<std::size_t>(*recording);
    r.offset = static_cast<std::size_t>(*offset);
    r.vector.label = *label;
    r.vector.channel_order = table.channels;
    for (std::size_t i = kMeta; i + 1 < f.size(); ++i) {
      const auto v = text::parse_finite(f[i]);
      if (!v) throw Error(ErrorKind::NonNumericSample, where + ": non-numeric feature");
      r.vector.values.push_back(*v);
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Comparison table and plot

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out << "classifier";
  for (const auto& m : table.metrics) out << ',' << m;
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.classifier;
    for (double v : row.values) out << ',' << text::format_double(v);
    out << '\n';
  }
}

ComparisonTable read_comparison_csv(std::istream& in) {
  ComparisonTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, "comparison.csv is empty");
  const auto header = text::split_csv(line);
  if (header.size() < 2 || header.front() != "classifier") {
    throw Error(ErrorKind::ParseError, "comparison.csv: header must start with 'classifier'");
  }
  for (std::size_t i = 1; i < header.size(); ++i) table.metrics.emplace_back(header[i]);
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    if (f.size() != header.size()) throw Error(ErrorKind::RaggedRows, "comparison.csv: wrong field count");
    ComparisonRow row;
    row.classifier = std::string(f[0]);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto v = text::parse_finite(f[i]);
      if (!v) throw Error(ErrorKind::NonNumericSample, "comparison.csv: non-numeric value");
      row.values.push_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw Error(ErrorKind::EmptyFile, "comparison.csv has no rows");
  return table;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_comparison_svg(const ComparisonTable& table) {
  constexpr double kLeft = 60, kTop = 40, kPlotH = 260, kGroupW = 150, kBarGap = 4;
  constexpr const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  const std::size_t groups = table.metrics.size();
  const std::size_t bars = table.rows.size();
  const double width = kLeft + kGroupW * static_cast<double>(groups) + 140;
  const double height = kTop + kPlotH + 60;
  const double bar_w = (kGroupW - 30) / static_cast<double>(std::max<std::size_t>(bars, 1)) - kBarGap;

  std::ostringstream svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" font-size=\"11\">\n",
                width, height, width, height);
  svg << buf;
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"22\" font-size=\"14\">Classifier comparison</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    const double y = kTop + kPlotH * (1.0 - v);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                  kLeft, y, kLeft + kGroupW * static_cast<double>(groups), y, kLeft - 6, y + 4, v);
    svg << buf;
  }
  for (std::size_t g = 0; g < groups; ++g) {
    const double x0 = kLeft + kGroupW * static_cast<double>(g) + 15;
    svg << "<g class=\"metric-group\" data-metric=\"" << xml_escape(table.metrics[g]) << "\">\n";
    for (std::size_t b = 0; b < bars; ++b) {
      const double v = std::clamp(table.rows[b].values[g], 0.0, 1.0);
      const double h = kPlotH * v;
      const double x = x0 + static_cast<double>(b) * (bar_w + kBarGap);
      std::snprintf(buf, sizeof buf,
                    "<rect class=\"bar\" x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                    "fill=\"%s\"><title>%s %.4f</title></rect>\n",
                    x, kTop + kPlotH - h, bar_w, h, kColors[b % 4],
                    xml_escape(table.rows[b].classifier).c_str(), table.rows[b].values[g]);
      svg << buf;
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"9\">%.3f</text>\n",
                    x + bar_w / 2, kTop + kPlotH - h - 3, table.rows[b].values[g]);
      svg << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">",
                  x0 + (kGroupW - 30) / 2, kTop + kPlotH + 18);
    svg << buf << xml_escape(table.metrics[g]) << "</text>\n</g>\n";
  }
  for (std::size_t b = 0; b < bars; ++b) {
    const double y = kTop + 20.0 * static_cast<double>(b);
    const double x = kLeft + kGroupW * static_cast<double>(groups) + 20;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\">",
                  x, y, kColors[b % 4], x + 18, y + 10);
    svg << buf << xml_escape(table.rows[b].classifier) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Stages

namespace {

constexpr const char* kFeatures = "features.csv";
constexpr const char* kKnnModel = "knn_model.json";
constexpr const char* kRnnModel = "rnn_model.json";
constexpr const char* kRnnLoss = "rnn_loss.csv";
constexpr const char* kKnnReport = "knn_report.json";
constexpr const char* kRnnReport = "rnn_report.json";
constexpr const char* kConfusionKnn = "confusion_knn.csv";
constexpr const char* kConfusionRnn = "confusion_rnn.csv";
constexpr const char* kComparison = "comparison.csv";
constexpr const char* kComparisonSvg = "comparison.svg";
constexpr const char* kManifest = "run_manifest.json";

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot move " + tmp.string() + ": " + ec.message());
}

std::ifstream open_artifact(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "missing stage artifact " + path.string());
  return in;
}

json read_json(const fs::path& path) {
  auto in = open_artifact(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

void check_hash(const std::string& found, const std::string& expected, const fs::path& artifact) {
  if (found != expected) {
    throw Error(ErrorKind::StageMismatch, artifact.filename().string() + " was produced by config " +
                                              found + ", current config is " + expected);
  }
}

FeatureTable load_features(const PipelineConfig& cfg, const fs::path& out_dir) {
  auto in = open_artifact(out_dir / kFeatures);
  FeatureTable table = read_feature_table(in);
  check_hash(table.config_hash, config_hash(cfg), out_dir / kFeatures);
  return table;
}

std::string json_text(const json& doc) { return doc.dump(2) + "\n"; }

json scaling_json(const std::optional<ScalingParams>& p) {
  if (!p) return nullptr;
  return {{"mean", p->mean}, {"scale", p->scale}};
}

std::optional<ScalingParams> scaling_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  ScalingParams p;
  p.mean = j.at("mean").get<std::vector<double>>();
  p.scale = j.at("scale").get<std::vector<double>>();
  return p;
}

std::vector<double> scaled(const FeatureRow& row, const std::optional<ScalingParams>& p) {
  std::vector<double> v = row.vector.values;
  if (p) p->apply(v);
  return v;
}

LabeledDataset dataset_of(const FeatureTable& t, std::span<const std::size_t> rows) {
  LabeledDataset d;
  for (std::size_t i : rows) d.vectors.push_back(t.rows[i].vector);
  return d;
}

/// Train/test row partitions the classifiers are fitted and scored on.
struct Task {
  std::string subject;
  int fold = -1;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Task> make_tasks(const PipelineConfig& cfg, const FeatureTable& t, bool per_subject,
                             std::string_view stream) {
  std::vector<std::string> groups = {""};
  if (per_subject) {
    std::set<std::string> subjects;
    for (const auto& r : t.rows) subjects.insert(r.subject);
    groups.assign(subjects.begin(), subjects.end());
  }
  std::vector<Task> tasks;
  for (const auto& g : groups) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (!per_subject || t.rows[i].subject == g) members.push_back(i);
    }
    if (cfg.evaluation == Evaluation::Session) {
      Task task{g, -1, {}, {}};
      for (std::size_t i : members) (t.rows[i].split == "test" ? task.test : task.train).push_back(i);
      tasks.push_back(std::move(task));
      continue;
    }
    std::vector<EmotionLabel> labels;
    for (std::size_t i : members) labels.push_back(t.rows[i].vector.label);
    const auto fold_of =
        knn::stratified_folds(labels, cfg.eval_folds, derive_seed(cfg.seed, std::string(stream) + "/" + g));
    for (std::size_t f = 0; f < cfg.eval_folds; ++f) {
      Task task{g, static_cast<int>(f), {}, {}};
      for (std::size_t m = 0; m < members.size(); ++m) {
        (fold_of[m] == f ? task.test : task.train).push_back(members[m]);
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

/// Row indices of each recording in time order, cut into sequences.
std::vector<std::vector<std::size_t>> sequences_of(const FeatureTable& t,
                                                   std::span<const std::size_t> rows,
                                                   std::size_t length) {
  std::map<std::size_t, std::vector<std::size_t>> by_recording;
  for (std::size_t i : rows) by_recording[t.rows[i].recording].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [rec, idx] : by_recording) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return t.rows[a].offset < t.rows[b].offset; });
    for (std::size_t s = 0; s + length <= idx.size(); s += length) {
      out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                       idx.begin() + static_cast<std::ptrdiff_t>(s + length));
    }
  }
  return out;
}

rnn::FeatureSequence sequence_from(const FeatureTable& t, std::span<const std::size_t> rows,
                                   const std::optional<ScalingParams>& p) {
  rnn::FeatureSequence seq;
  for (std::size_t i : rows) seq.steps.push_back(scaled(t.rows[i], p));
  seq.label = t.rows[rows.back()].vector.label;
  return seq;
}

}  // namespace

void stage_features(const PipelineConfig& cfg, const fs::path& out_dir) {
  const FeatureTable table = extract_features(cfg);
  std::ostringstream out;
  write_feature_table(out, table);
  write_file(out_dir / kFeatures, out.str());
}

void stage_train_knn(const PipelineConfig& cfg, const fs::path& out_dir) {
  const FeatureTable t = load_features(cfg, out_dir);
  json models = json::array();
  for (const Task& task : make_tasks(cfg, t, cfg.knn.per_subject, "eval.folds")) {
    LabeledDataset train = dataset_of(t, task.train);
    if (train.empty()) throw Error(ErrorKind::EmptyDataset, "kNN task has no training rows");
    std::optional<ScalingParams> scaling;
    if (cfg.standardize) {
      scaling = fit_scaling(train);
      for (auto& v : train.vectors) scaling->apply(v.values);
    }
    const auto sel = knn::select_k(train, cfg.knn.candidates, cfg.knn.folds, cfg.knn.c,
                                   derive_seed(cfg.seed, "knn.folds/" + task.subject));
    const knn::KnnModel model(std::move(train), sel.best_k, cfg.knn.c);
    json per_k = json::array();
    for (const auto& [k, acc] : sel.per_k_accuracy) per_k.push_back({{"k", k}, {"accuracy", acc}});
    models.push_back({{"subject", task.subject},
                      {"fold", task.fold},
                      {"best_k", sel.best_k},
                      {"per_k_accuracy", per_k},
                      {"scaling", scaling_json(scaling)},
                      {"model", knn::to_json(model)},
                      {"test_rows", task.test}});
  }
  const json doc = {{"config_hash", t.config_hash},
                    {"evaluation", evaluation_name(cfg.evaluation)},
                    {"models", models}};
  write_file(out_dir / kKnnModel, json_text(doc));
}

void stage_train_rnn(const PipelineConfig& cfg, const fs::path& out_dir) {
  const FeatureTable t = load_features(cfg, out_dir);
  const std::size_t len = cfg.rnn.sequence_length;

  // Session mode trains one pooled network; fivefold splits whole sequences.
  struct RnnTask {
    int fold = -1;
    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> test;
  };
  std::vector<RnnTask> tasks;
  if (cfg.evaluation == Evaluation::Session) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      (t.rows[i].split == "test" ? test_rows : train_rows).push_back(i);
    }
    tasks.push_back({-1, sequences_of(t, train_rows, len), sequences_of(t, test_rows, len)});
  } else {
    std::vector<std::size_t> all(t.rows.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto seqs = sequences_of(t, all, len);
    std::vector<EmotionLabel> labels;
    for (const auto& s : seqs) labels.push_back(t.rows[s.back()].vector.label);
    const auto fold_of = knn::stratified_folds(labels, cfg.eval_folds, derive_seed(cfg.seed, "eval.folds.rnn"));
    for (std::size_t f = 0; f < cfg.eval_folds; ++f) {
      RnnTask task{static_cast<int>(f), {}, {}};
      for (std::size_t s = 0; s < seqs.size(); ++s) (fold_of[s] == f ? task.test : task.train).push_back(seqs[s]);
      tasks.push_back(std::move(task));
    }
  }

  json models = json::array();
  std::ostringstream loss_csv;
  loss_csv << "model,epoch,loss\n";
  for (std::size_t m = 0; m < tasks.size(); ++m) {
    const RnnTask& task = tasks[m];
    if (task.train.empty()) {
      throw Error(ErrorKind::EmptyDataset, "no training sequences of length " + std::to_string(len) +
                                               "; recordings are too short for rnn.sequence_length");
    }
    std::optional<ScalingParams> scaling;
    if (cfg.standardize) {
      std::vector<std::size_t> rows;
      for (const auto& s : task.train) rows.insert(rows.end(), s.begin(), s.end());
      scaling = fit_scaling(dataset_of(t, rows));
    }
    std::vector<rnn::FeatureSequence> train;
    for (const auto& s : task.train) train.push_back(sequence_from(t, s, scaling));
    rnn::TrainConfig tc = cfg.rnn;
    tc.seed = task.fold < 0 ? cfg.rnn.seed : derive_seed(cfg.rnn.seed, "fold" + std::to_string(task.fold));
    const rnn::TrainResult result = rnn::train(train, tc);
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
      loss_csv << m << ',' << e + 1 << ',' << text::format_double(result.loss_history[e]) << '\n';
    }
    models.push_back({{"fold", task.fold},
                      {"params", rnn::to_json(result.params)},
                      {"scaling", scaling_json(scaling)},
                      {"loss_history", result.loss_history},
                      {"test_sequences", task.test}});
  }
  const json doc = {{"config_hash", t.config_hash},
                    {"evaluation", evaluation_name(cfg.evaluation)},
                    {"sequence_length", len},
                    {"models", models}};
  write_file(out_dir / kRnnModel, json_text(doc));
  write_file(out_dir / kRnnLoss, loss_csv.str());
}

EvaluationSummary stage_evaluate(const PipelineConfig& cfg, const fs::path& out_dir) {
  const FeatureTable t = load_features(cfg, out_dir);
  const json knn_doc = read_json(out_dir / kKnnModel);
  const json rnn_doc = read_json(out_dir / kRnnModel);
  check_hash(knn_doc.value("config_hash", ""), t.config_hash, out_dir / kKnnModel);
  check_hash(rnn_doc.value("config_hash", ""), t.config_hash, out_dir / kRnnModel);

  const auto row_index = [&](std::size_t i) -> const FeatureRow& {
    if (i >= t.rows.size()) throw Error(ErrorKind::StageMismatch, "model refers to a missing feature row");
    return t.rows[i];
  };

  EvaluationSummary summary;
  json knn_models = json::array();
  std::vector<EmotionLabel> truth;
  std::vector<EmotionLabel> predicted;
  try {
    for (const auto& entry : knn_doc.at("models")) {
      const knn::KnnModel model = knn::model_from_json(entry.at("model"));
      const auto scaling = scaling_from(entry.at("scaling"));
      for (std::size_t i : entry.at("test_rows").get<std::vector<std::size_t>>()) {
        const FeatureRow& row = row_index(i);
        truth.push_back(row.vector.label);
        predicted.push_back(model.classify(scaled(row, scaling)).label);
      }
      knn_models.push_back({{"subject", entry.at("subject")},
                            {"fold", entry.at("fold")},
                            {"best_k", entry.at("best_k")},
                            {"per_k_accuracy", entry.at("per_k_accuracy")}});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("knn_model.json: ") + e.what());
  }
  summary.knn = metrics::report(metrics::confusion(truth, predicted));

  truth.clear();
  predicted.clear();
  json loss_histories = json::array();
  try {
    for (const auto& entry : rnn_doc.at("models")) {
      const rnn::RnnParameters params = rnn::params_from_json(entry.at("params"));
      const auto scaling = scaling_from(entry.at("scaling"));
      for (const auto& rows : entry.at("test_sequences").get<std::vector<std::vector<std::size_t>>>()) {
        if (rows.empty()) throw Error(ErrorKind::StageMismatch, "empty test sequence");
        for (std::size_t i : rows) row_index(i);
        const auto seq = sequence_from(t, rows, scaling);
        truth.push_back(seq.label);
        predicted.push_back(rnn::predict(params, seq));
      }
      loss_histories.push_back(entry.at("loss_history"));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("rnn_model.json: ") + e.what());
  }
  summary.rnn = metrics::report(metrics::confusion(truth, predicted));

  const json knn_report = {{"classifier", "knn"},
                           {"config_hash", t.config_hash},
                           {"evaluation", evaluation_name(cfg.evaluation)},
                           {"minkowski_c", cfg.knn.c},
                           {"models", knn_models},
                           {"report", metrics::to_json(summary.knn)}};
  const json rnn_report = {{"classifier", "rnn"},
                           {"config_hash", t.config_hash},
                           {"evaluation", evaluation_name(cfg.evaluation)},
                           {"hidden_size", cfg.rnn.hidden_size},
                           {"sequence_length", cfg.rnn.sequence_length},
                           {"loss_history", loss_histories},
                           {"report", metrics::to_json(summary.rnn)}};

  std::ostringstream cm_knn;
  std::ostringstream cm_rnn;
  metrics::write_confusion_csv(cm_knn, summary.knn.confusion);
  metrics::write_confusion_csv(cm_rnn, summary.rnn.confusion);

  ComparisonTable cmp;
  cmp.metrics = {"accuracy", "macro_accuracy", "macro_specificity", "macro_sensitivity", "macro_recall"};
  for (const auto& [name, r] : {std::pair<std::string, const metrics::EvalReport*>{"kNN", &summary.knn},
                                {"RNN", &summary.rnn}}) {
    cmp.rows.push_back({name, {r->accuracy, r->macro_accuracy, r->macro_specificity,
                               r->macro_sensitivity, r->macro_recall}});
  }
  std::ostringstream cmp_csv;
  write_comparison_csv(cmp_csv, cmp);

  write_file(out_dir / kKnnReport, json_text(knn_report));
  write_file(out_dir / kRnnReport, json_text(rnn_report));
  write_file(out_dir / kConfusionKnn, cm_knn.str());
  write_file(out_dir / kConfusionRnn, cm_rnn.str());
  write_file(out_dir / kComparison, cmp_csv.str());
  return summary;
}

void stage_plot(const fs::path& out_dir) {
  auto in = open_artifact(out_dir / kComparison);
  write_file(out_dir / kComparisonSvg, render_comparison_svg(read_comparison_csv(in)));
}

EvaluationSummary run(const PipelineConfig& cfg, const fs::path& out_dir) {
  const auto started = std::chrono::steady_clock::now();
  // Fail on unreadable inputs before anything touches the output directory.
  resolve_inputs(cfg);

  const bool existed = fs::exists(out_dir);
  const fs::path staging = out_dir / ".eegemo-staging";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging);
    stage_features(cfg, staging);
    stage_train_knn(cfg, staging);
    stage_train_rnn(cfg, staging);
    EvaluationSummary summary = stage_evaluate(cfg, staging);
    stage_plot(staging);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::vector<std::string> artifacts = {kFeatures,     kKnnModel,     kRnnModel,     kRnnLoss,
                                          kKnnReport,    kRnnReport,    kConfusionKnn, kConfusionRnn,
                                          kComparison,   kComparisonSvg, kManifest};
    const json manifest = {
        {"version", kVersion},
        {"config", to_json(cfg)},
        {"config_hash", config_hash(cfg)},
        {"seed", cfg.seed},
        {"sub_seeds",
         {{"knn.folds", derive_seed(cfg.seed, "knn.folds/")},
          {"rnn", cfg.rnn.seed},
          {"rnn.init", derive_seed(cfg.rnn.seed, "rnn.init")},
          {"rnn.batches", derive_seed(cfg.rnn.seed, "rnn.batches")}}},
        {"wall_time_seconds", wall},
        {"chance_level", 1.0 / kClassCount},
        {"accuracy", {{"knn", summary.knn.accuracy}, {"rnn", summary.rnn.accuracy}}},
        {"evaluated", {{"knn", summary.knn.confusion.total()}, {"rnn", summary.rnn.confusion.total()}}},
        {"artifacts", artifacts},
    };
    write_file(staging / kManifest, json_text(manifest));

    for (const auto& name : artifacts) {
      fs::rename(staging / name, out_dir / name, ec);
      if (ec) throw Error(ErrorKind::IoError, "cannot publish " + name + ": " + ec.message());
    }
    fs::remove_all(staging, ec);
    return summary;
  } catch (...) {
    fs::remove_all(staging, ec);
    if (!existed) fs::remove(out_dir, ec);  // only succeeds when empty
    throw;
  }
}

}  // namespace eegemo::pipeline
