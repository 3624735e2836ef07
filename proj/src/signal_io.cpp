#include "eegemo/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include "eegemo/error.hpp"
#include "eegemo/text.hpp"

namespace eegemo {

std::string_view channel_name(Channel channel) noexcept {
  switch (channel) {
    case Channel::TP9: return "TP9";
    case Channel::AF7: return "AF7";
    case Channel::AF8: return "AF8";
    case Channel::TP10: return "TP10";
  }
  return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
  const std::string key = text::lower(text::trim(name));
  for (Channel c : kAllChannels) {
    if (key == text::lower(channel_name(c))) return c;
  }
  return std::nullopt;
}

std::string_view label_name(EmotionLabel label) noexcept {
  switch (label) {
    case EmotionLabel::Positive: return "Positive";
    case EmotionLabel::Neutral: return "Neutral";
    case EmotionLabel::Negative: return "Negative";
  }
  return "?";
}

std::optional<EmotionLabel> parse_label(std::string_view text) {
  const std::string key = text::lower(text::trim(text));
  if (key == "positive" || key == "0") return EmotionLabel::Positive;
  if (key == "neutral" || key == "1") return EmotionLabel::Neutral;
  if (key == "negative" || key == "2") return EmotionLabel::Negative;
  return std::nullopt;
}

EmotionLabel label_from_index(int index) {
  if (index < 0 || index >= kClassCount) {
    throw Error(ErrorKind::UnknownLabel, "label index out of range: " + std::to_string(index));
  }
  return static_cast<EmotionLabel>(index);
}

void EegRecording::validate() const {
  if (channels.empty()) throw Error(ErrorKind::InvalidRecording, "recording has no channels");
  if (channels.size() != samples.size()) {
    throw Error(ErrorKind::InvalidRecording, "channel names and sample arrays disagree");
  }
  std::set<Channel> seen(channels.begin(), channels.end());
  if (seen.size() != channels.size()) {
    throw Error(ErrorKind::InvalidRecording, "duplicate channel");
  }
  if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
    throw Error(ErrorKind::InvalidRecording, "sampling rate must be positive");
  }
  const std::size_t n = samples.front().size();
  if (n == 0) throw Error(ErrorKind::InvalidRecording, "recording has no samples");
  for (const auto& s : samples) {
    if (s.size() != n) throw Error(ErrorKind::InvalidRecording, "channels differ in length");
  }
}

ColumnSchema ColumnSchema::muse_default() {
  ColumnSchema schema;
  for (Channel c : kAllChannels) schema.channel_columns.emplace_back(c, std::string(channel_name(c)));
  return schema;
}

namespace {

std::size_t find_column(const std::vector<std::string_view>& header, std::string_view name) {
  const std::string key = text::lower(name);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::lower(header[i]) == key) return i;
  }
  throw Error(ErrorKind::MissingColumn, "column not found: " + std::string(name));
}

bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!text::trim(line).empty()) return true;
  }
  return false;
}

}  // namespace

EegRecording parse_recording(std::istream& in, const ColumnSchema& schema,
                             const RecordingMeta& meta) {
  if (schema.channel_columns.empty()) {
    throw Error(ErrorKind::InvalidConfig, "schema selects no channels");
  }
  std::string header_line;
  if (!next_line(in, header_line)) throw Error(ErrorKind::EmptyFile, "file has no header row");
  // Strip a UTF-8 byte order mark.
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  const std::vector<std::string_view> header = text::split_csv(header_line);

  // Channels are kept in the fixed fusion order regardless of schema order.
  auto columns = schema.channel_columns;
  std::sort(columns.begin(), columns.end());
  std::vector<std::size_t> channel_idx;
  EegRecording rec;
  for (const auto& [channel, column] : columns) {
    if (!rec.channels.empty() && rec.channels.back() == channel) {
      throw Error(ErrorKind::InvalidConfig, "channel selected twice");
    }
    channel_idx.push_back(find_column(header, column));
    rec.channels.push_back(channel);
  }
  if (!schema.timestamp_column.empty()) find_column(header, schema.timestamp_column);
  std::optional<std::size_t> label_idx;
  if (!schema.label_column.empty()) label_idx = find_column(header, schema.label_column);
  if (!label_idx && !schema.label) {
    throw Error(ErrorKind::InvalidConfig, "schema declares neither a label nor a label column");
  }

  rec.samples.resize(rec.channels.size());
  std::optional<EmotionLabel> row_label;
  std::string line;
  std::size_t row = 1;
  while (next_line(in, line)) {
    ++row;
    const auto fields = text::split_csv(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::RaggedRows, "row " + std::to_string(row) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < channel_idx.size(); ++c) {
      const auto value = text::parse_finite(fields[channel_idx[c]]);
      if (!value) {
        throw Error(ErrorKind::NonNumericSample,
                    "row " + std::to_string(row) + " column " + std::string(header[channel_idx[c]]) +
                        ": '" + std::string(fields[channel_idx[c]]) + "'");
      }
      rec.samples[c].push_back(*value);
    }
    if (label_idx) {
      const auto label = parse_label(fields[*label_idx]);
      if (!label) {
        throw Error(ErrorKind::UnknownLabel, "row " + std::to_string(row) + ": unknown label '" +
                                                 std::string(fields[*label_idx]) + "'");
      }
      if (row_label && *row_label != *label) {
        throw Error(ErrorKind::MixedLabels, "row " + std::to_string(row) + " changes label");
      }
      row_label = label;
    }
  }
  if (rec.samples.front().empty()) throw Error(ErrorKind::EmptyFile, "file has no data rows");

  rec.label = row_label ? *row_label : *schema.label;
  rec.sampling_rate = meta.sampling_rate;
  rec.session_id = meta.session_id;
  rec.subject = meta.subject;
  rec.recording_id = meta.recording_id;
  rec.validate();
  return rec;
}

EegRecording load_recording(const std::filesystem::path& path, const ColumnSchema& schema,
                            const RecordingMeta& meta) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  try {
    return parse_recording(in, schema, meta);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_recording(std::ostream& out, const EegRecording& rec) {
  rec.validate();
  for (const Channel c : rec.channels) out << channel_name(c) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < rec.sample_count(); ++i) {
    for (const auto& s : rec.samples) out << text::format_double(s[i]) << ',';
    out << label_name(rec.label) << '\n';
  }
}

std::size_t segment_stride(std::size_t window_length, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "overlap must lie in [0, 1)");
  }
  const double stride = std::round(static_cast<double>(window_length) * (1.0 - overlap));
  if (stride < 1.0) throw Error(ErrorKind::InvalidConfig, "window stride rounds to zero");
  return static_cast<std::size_t>(stride);
}

std::vector<Segment> segment_recording(const EegRecording& rec, std::size_t window_length,
                                       double overlap) {
  rec.validate();
  if (window_length == 0) throw Error(ErrorKind::InvalidConfig, "window length must be positive");
  const std::size_t n = rec.sample_count();
  if (window_length > n) {
    throw Error(ErrorKind::WindowTooLarge, "window of " + std::to_string(window_length) +
                                               " samples exceeds recording of " +
                                               std::to_string(n));
  }
  const std::size_t stride = segment_stride(window_length, overlap);
  const std::size_t count = (n - window_length) / stride + 1;

  std::vector<Segment> segments;
  segments.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Segment seg;
    seg.channels = rec.channels;
    seg.window_length = window_length;
    seg.source_session = rec.session_id;
    seg.label = rec.label;
    seg.subject = rec.subject;
    seg.recording_id = rec.recording_id;
    seg.offset = s * stride;
    for (const auto& channel : rec.samples) {
      const auto first = channel.begin() + static_cast<std::ptrdiff_t>(seg.offset);
      seg.channel_data.emplace_back(first, first + static_cast<std::ptrdiff_t>(window_length));
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

DatasetSplit split_by_session(std::vector<Segment> segments) {
  const auto key = [](const Segment& s) {
    return std::tie(s.subject, s.label, s.source_session, s.recording_id, s.offset);
  };
  std::sort(segments.begin(), segments.end(),
            [&](const Segment& a, const Segment& b) { return key(a) < key(b); });

  std::map<std::pair<std::string, EmotionLabel>, std::set<int>> sessions;
  for (const auto& s : segments) sessions[{s.subject, s.label}].insert(s.source_session);
  for (const auto& [group, ids] : sessions) {
    if (ids.size() < 2) {
      std::string who = group.first.empty() ? "" : " (subject " + group.first + ")";
      throw Error(ErrorKind::InsufficientSessions,
                  "label " + std::string(label_name(group.second)) + who + " has " +
                      std::to_string(ids.size()) + " session(s); at least 2 are required");
    }
  }

  DatasetSplit split;
  for (auto& s : segments) {
    const int latest = *sessions.at({s.subject, s.label}).rbegin();
    (s.source_session == latest ? split.test : split.train).push_back(std::move(s));
  }
  return split;
}

}  // namespace eegemo
