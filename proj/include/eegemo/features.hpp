#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegemo/dwt.hpp"
#include "eegemo/signal_io.hpp"

namespace eegemo {

inline constexpr std::size_t kStatisticsPerChannel = 5;
inline constexpr std::array<std::string_view, kStatisticsPerChannel> kStatisticNames = {
    "abs_max", "mean_abs", "std_dev", "avg_power", "avg_energy"};

struct ChannelFeatures {
  double abs_max = 0.0;
  double mean_abs = 0.0;
  double std_dev = 0.0;    // population
  double avg_power = 0.0;  // sum c^2 / coefficient count
  double avg_energy = 0.0; // sum c^2 / originating segment length

  std::array<double, kStatisticsPerChannel> as_array() const noexcept {
    return {abs_max, mean_abs, std_dev, avg_power, avg_energy};
  }
};

/// `segment_length` is the sample count of the window the coefficients came
/// from; it only enters avg_energy. Throws EmptyInput / NonNumericSample.
ChannelFeatures channel_statistics(std::span<const double> coeffs, std::size_t segment_length);

enum class BandPolicy { AllBands, ThetaOnly };

std::string_view band_policy_name(BandPolicy policy) noexcept;
BandPolicy parse_band_policy(std::string_view name);

struct FeatureConfig {
  dwt::WaveletFilterPair filters = dwt::builtin_wavelet("db4");
  std::size_t levels = 5;
  dwt::ExtensionMode mode = dwt::ExtensionMode::Symmetric;
  BandPolicy band_policy = BandPolicy::AllBands;
  double sampling_rate = 256.0;
};

struct FeatureVector {
  std::vector<double> values;  // 5 statistics per channel, channel blocks in channel_order
  EmotionLabel label = EmotionLabel::Neutral;
  std::vector<Channel> channel_order;
};

struct LabeledDataset {
  static constexpr int class_count = kClassCount;
  std::vector<FeatureVector> vectors;

  std::size_t size() const noexcept { return vectors.size(); }
  bool empty() const noexcept { return vectors.empty(); }
  std::size_t dimension() const noexcept {
    return vectors.empty() ? 0 : vectors.front().values.size();
  }
  /// Shared length and channel order, finite entries, and 5 values per channel
  /// when a channel order is attached. Throws DimensionMismatch.
  void validate() const;
};

/// "TP9_abs_max", "TP9_mean_abs", ... in vector order.
std::vector<std::string> feature_names(std::span<const Channel> channels);

/// Coefficient sets selected by the band policy, in d1..dL, aL order.
std::vector<double> selected_coefficients(const dwt::WaveletDecomposition& dec,
                                          const FeatureConfig& cfg);

FeatureVector segment_features(const Segment& seg, const FeatureConfig& cfg);

struct ScalingParams {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a zero-variance dimension left untouched

  void apply(std::span<double> values) const;
};

ScalingParams fit_scaling(const LabeledDataset& train);

struct StandardizedSplit {
  LabeledDataset train;
  LabeledDataset test;
  ScalingParams params;
};

/// z-scores both partitions with moments estimated on `train` only.
StandardizedSplit standardize(const LabeledDataset& train, const LabeledDataset& test);

}  // namespace eegemo
