#include "eegemo/features.hpp"

#include <algorithm>
#include <cmath>

#include "eegemo/error.hpp"
#include "eegemo/text.hpp"

namespace eegemo {

ChannelFeatures channel_statistics(std::span<const double> coeffs, std::size_t segment_length) {
  if (coeffs.empty()) throw Error(ErrorKind::EmptyInput, "no coefficients to summarise");
  if (segment_length == 0) throw Error(ErrorKind::EmptyInput, "segment length must be positive");
  const auto n = static_cast<double>(coeffs.size());
  double abs_max = 0.0;
  double abs_sum = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw Error(ErrorKind::NonNumericSample, "non-finite coefficient");
    abs_max = std::max(abs_max, std::abs(c));
    abs_sum += std::abs(c);
    sum += c;
    sum_sq += c * c;
  }
  const double mean = sum / n;
  double var = 0.0;
  for (double c : coeffs) var += (c - mean) * (c - mean);

  ChannelFeatures f;
  f.abs_max = abs_max;
  f.mean_abs = abs_sum / n;
  f.std_dev = std::sqrt(var / n);
  f.avg_power = sum_sq / n;
  f.avg_energy = sum_sq / static_cast<double>(segment_length);
  return f;
}

std::string_view band_policy_name(BandPolicy policy) noexcept {
  return policy == BandPolicy::AllBands ? "all" : "theta";
}

BandPolicy parse_band_policy(std::string_view name) {
  const std::string key = text::lower(name);
  if (key == "all" || key == "all-bands") return BandPolicy::AllBands;
  if (key == "theta" || key == "theta-only") return BandPolicy::ThetaOnly;
  throw Error(ErrorKind::InvalidConfig, "unknown band policy: " + std::string(name));
}

void LabeledDataset::validate() const {
  if (vectors.empty()) return;
  const auto& first = vectors.front();
  if (!first.channel_order.empty() &&
      first.values.size() != kStatisticsPerChannel * first.channel_order.size()) {
    throw Error(ErrorKind::DimensionMismatch, "feature length disagrees with channel count");
  }
  for (const auto& v : vectors) {
    if (v.values.size() != first.values.size() || v.channel_order != first.channel_order) {
      throw Error(ErrorKind::DimensionMismatch, "feature vectors differ in layout");
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw Error(ErrorKind::NonNumericSample, "non-finite feature");
    }
  }
}

std::vector<std::string> feature_names(std::span<const Channel> channels) {
  std::vector<std::string> names;
  for (Channel c : channels) {
    for (auto stat : kStatisticNames) {
      names.push_back(std::string(channel_name(c)) + "_" + std::string(stat));
    }
  }
  return names;
}

std::vector<double> selected_coefficients(const dwt::WaveletDecomposition& dec,
                                          const FeatureConfig& cfg) {
  std::vector<double> out;
  if (cfg.band_policy == BandPolicy::AllBands) {
    for (const auto& d : dec.details) out.insert(out.end(), d.begin(), d.end());
    out.insert(out.end(), dec.approximation.begin(), dec.approximation.end());
    return out;
  }
  const auto bands = dwt::subband_map(cfg.sampling_rate, dec.levels());
  for (const auto& band : bands) {
    if (band.rhythm != dwt::Rhythm::Theta) continue;
    const auto& set = band.is_approximation ? dec.approximation : dec.details[band.level - 1];
    out.insert(out.end(), set.begin(), set.end());
  }
  if (out.empty()) {
    throw Error(ErrorKind::NoThetaBand,
                "no coefficient set covers theta at fs=" + text::format_double(cfg.sampling_rate) +
                    " Hz with " + std::to_string(dec.levels()) + " levels");
  }
  return out;
}

FeatureVector segment_features(const Segment& seg, const FeatureConfig& cfg) {
  if (seg.channels.size() != seg.channel_data.size() || seg.channels.empty()) {
    throw Error(ErrorKind::DimensionMismatch, "segment channel layout is inconsistent");
  }
  FeatureVector fv;
  fv.label = seg.label;
  fv.channel_order = seg.channels;
  fv.values.reserve(kStatisticsPerChannel * seg.channels.size());
  for (const auto& window : seg.channel_data) {
    const auto dec = dwt::wavedec(window, cfg.filters, cfg.levels, cfg.mode);
    const auto coeffs = selected_coefficients(dec, cfg);
    const auto stats = channel_statistics(coeffs, window.size()).as_array();
    fv.values.insert(fv.values.end(), stats.begin(), stats.end());
  }
  return fv;
}

void ScalingParams::apply(std::span<double> values) const {
  if (values.size() != mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "scaling dimension mismatch");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (scale[i] > 0.0) values[i] = (values[i] - mean[i]) / scale[i];
  }
}

ScalingParams fit_scaling(const LabeledDataset& train) {
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "cannot fit scaling on no data");
  train.validate();
  const std::size_t dim = train.dimension();
  const auto n = static_cast<double>(train.size());
  ScalingParams p;
  p.mean.assign(dim, 0.0);
  p.scale.assign(dim, 0.0);
  for (const auto& v : train.vectors) {
    for (std::size_t i = 0; i < dim; ++i) p.mean[i] += v.values[i];
  }
  for (double& m : p.mean) m /= n;
  for (const auto& v : train.vectors) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = v.values[i] - p.mean[i];
      p.scale[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double sd = std::sqrt(p.scale[i] / n);
    // Relative threshold: a constant column can pick up rounding-level spread.
    p.scale[i] = sd > 1e-12 * std::max(1.0, std::abs(p.mean[i])) ? sd : 0.0;
  }
  return p;
}

StandardizedSplit standardize(const LabeledDataset& train, const LabeledDataset& test) {
  StandardizedSplit out{train, test, fit_scaling(train)};
  test.validate();
  for (auto& v : out.train.vectors) out.params.apply(v.values);
  for (auto& v : out.test.vectors) out.params.apply(v.values);
  return out;
}

}  // namespace eegemo
