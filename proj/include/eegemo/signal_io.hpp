#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace eegemo {

/// Muse headband electrode positions, in the fixed fusion order.
enum class Channel { TP9 = 0, AF7 = 1, AF8 = 2, TP10 = 3 };

inline constexpr std::array<Channel, 4> kAllChannels = {Channel::TP9, Channel::AF7,
                                                        Channel::AF8, Channel::TP10};

std::string_view channel_name(Channel channel) noexcept;
std::optional<Channel> parse_channel(std::string_view name);

/// Integer encoding is stable and used for every downstream array index.
enum class EmotionLabel { Positive = 0, Neutral = 1, Negative = 2 };

inline constexpr int kClassCount = 3;

std::string_view label_name(EmotionLabel label) noexcept;
/// Case-insensitive; also accepts the integer encodings "0", "1", "2".
std::optional<EmotionLabel> parse_label(std::string_view text);
EmotionLabel label_from_index(int index);
inline int label_index(EmotionLabel label) noexcept { return static_cast<int>(label); }

struct EegRecording {
  std::vector<Channel> channels;
  std::vector<std::vector<double>> samples;  // samples[c] belongs to channels[c]
  double sampling_rate = 256.0;
  int session_id = 1;
  EmotionLabel label = EmotionLabel::Neutral;
  std::string subject;
  std::size_t recording_id = 0;

  std::size_t sample_count() const noexcept {
    return samples.empty() ? 0 : samples.front().size();
  }

  /// Throws InvalidRecording when a type invariant does not hold.
  void validate() const;
};

struct ColumnSchema {
  std::string timestamp_column;  // empty: no timestamp column expected
  std::vector<std::pair<Channel, std::string>> channel_columns;
  std::string label_column;            // per-row labels; must be constant
  std::optional<EmotionLabel> label;   // per-file label

  /// TP9, AF7, AF8, TP10 read from identically named columns.
  static ColumnSchema muse_default();
};

struct RecordingMeta {
  double sampling_rate = 256.0;
  int session_id = 1;
  std::string subject;
  std::size_t recording_id = 0;
};

EegRecording load_recording(const std::filesystem::path& path, const ColumnSchema& schema,
                            const RecordingMeta& meta = {});
EegRecording parse_recording(std::istream& in, const ColumnSchema& schema,
                             const RecordingMeta& meta = {});

/// Writes a header of channel names plus a "label" column. Values are printed
/// in shortest round-trip form, so reloading reproduces every sample exactly.
void write_recording(std::ostream& out, const EegRecording& rec);

struct Segment {
  std::vector<Channel> channels;
  std::vector<std::vector<double>> channel_data;
  std::size_t window_length = 0;
  int source_session = 1;
  EmotionLabel label = EmotionLabel::Neutral;
  std::string subject;
  std::size_t recording_id = 0;
  std::size_t offset = 0;  // first sample index within the recording
};

std::size_t segment_stride(std::size_t window_length, double overlap);

std::vector<Segment> segment_recording(const EegRecording& rec, std::size_t window_length,
                                       double overlap);

struct DatasetSplit {
  std::vector<Segment> train;
  std::vector<Segment> test;
};

/// Per (subject, label) group the latest session is held out for testing and
/// every earlier session trains. Output is ordered independently of input order.
DatasetSplit split_by_session(std::vector<Segment> segments);

}  // namespace eegemo
