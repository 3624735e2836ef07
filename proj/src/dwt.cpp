#include "eegemo/dwt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "eegemo/error.hpp"
#include "eegemo/text.hpp"

namespace eegemo::dwt {

std::string_view mode_name(ExtensionMode mode) noexcept {
  return mode == ExtensionMode::Symmetric ? "symmetric" : "periodic";
}

ExtensionMode parse_mode(std::string_view name) {
  const std::string key = text::lower(name);
  if (key == "symmetric") return ExtensionMode::Symmetric;
  if (key == "periodic" || key == "periodization") return ExtensionMode::Periodic;
  throw Error(ErrorKind::InvalidConfig, "unknown extension mode: " + std::string(name));
}

WaveletFilterPair WaveletFilterPair::from_lowpass(std::string name, std::vector<double> lowpass) {
  const std::size_t len = lowpass.size();
  if (len < 2 || len % 2 != 0) {
    throw Error(ErrorKind::InvalidFilter, name + ": filter length must be even and >= 2");
  }
  double energy = 0.0;
  for (double v : lowpass) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidFilter, name + ": non-finite tap");
    energy += v * v;
  }
  if (std::abs(energy - 1.0) > 1e-10) {
    throw Error(ErrorKind::InvalidFilter, name + ": lowpass energy is not 1");
  }
  for (std::size_t shift = 2; shift < len; shift += 2) {
    double dot = 0.0;
    for (std::size_t n = 0; n + shift < len; ++n) dot += lowpass[n] * lowpass[n + shift];
    if (std::abs(dot) > 1e-10) {
      throw Error(ErrorKind::InvalidFilter, name + ": lowpass not orthogonal to its even shifts");
    }
  }
  WaveletFilterPair pair;
  pair.name = std::move(name);
  pair.highpass.resize(len);
  for (std::size_t n = 0; n < len; ++n) {
    pair.highpass[n] = (n % 2 == 0 ? 1.0 : -1.0) * lowpass[len - 1 - n];
  }
  pair.lowpass = std::move(lowpass);
  return pair;
}

WaveletFilterPair builtin_wavelet(std::string_view name) {
  const std::string key = text::lower(name);
  if (key == "haar" || key == "db1") {
    const double r = 1.0 / std::sqrt(2.0);
    return WaveletFilterPair::from_lowpass(key, {r, r});
  }
  if (key == "db2") {
    return WaveletFilterPair::from_lowpass(
        key, {0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037});
  }
  if (key == "db4") {
    return WaveletFilterPair::from_lowpass(
        key, {0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
              -0.18703481171909309, 0.030841381835560764, 0.0328830116668852,
              -0.010597401785069032});
  }
  throw Error(ErrorKind::UnknownWavelet, "no built-in wavelet named " + std::string(name));
}

std::vector<WaveletFilterPair> load_wavelet_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open wavelet table " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  std::vector<WaveletFilterPair> table;
  try {
    for (const auto& entry : doc.at("wavelets")) {
      table.push_back(WaveletFilterPair::from_lowpass(text::lower(entry.at("name").get<std::string>()),
                                                      entry.at("lowpass").get<std::vector<double>>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return table;
}

WaveletFilterPair find_wavelet(std::string_view name, std::span<const WaveletFilterPair> extra) {
  const std::string key = text::lower(name);
  for (const auto& w : extra) {
    if (w.name == key) return w;
  }
  return builtin_wavelet(key);
}

std::size_t coefficient_count(std::size_t input_length, std::size_t filter_length,
                              ExtensionMode mode) noexcept {
  if (mode == ExtensionMode::Periodic) return (input_length + 1) / 2;
  return (input_length + filter_length) / 2;  // ceil((n + F - 1) / 2)
}

namespace {

// Half-point symmetric reflection: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) x(n-2) ...
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  return r < static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(r)
                                            : static_cast<std::size_t>(period - 1 - r);
}

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

}  // namespace

DwtStep dwt_step(std::span<const double> signal, const WaveletFilterPair& filters,
                 ExtensionMode mode) {
  const std::size_t n = signal.size();
  if (n < 2) throw Error(ErrorKind::SignalTooShort, "dwt_step needs at least 2 samples");
  const std::size_t taps = filters.size();
  const std::size_t out_len = coefficient_count(n, taps, mode);

  DwtStep out;
  out.approx.assign(out_len, 0.0);
  out.detail.assign(out_len, 0.0);
  // Periodization of an odd-length signal repeats the last sample.
  const std::size_t period = n + (n % 2);
  for (std::size_t m = 0; m < out_len; ++m) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      const auto k = static_cast<std::ptrdiff_t>(2 * m) - static_cast<std::ptrdiff_t>(j);
      std::size_t idx = 0;
      if (mode == ExtensionMode::Symmetric) {
        idx = reflect(k, n);
      } else {
        idx = std::min(wrap(k, period), n - 1);
      }
      a += signal[idx] * filters.lowpass[j];
      d += signal[idx] * filters.highpass[j];
    }
    out.approx[m] = a;
    out.detail[m] = d;
  }
  return out;
}

std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                              const WaveletFilterPair& filters, ExtensionMode mode,
                              std::size_t output_length) {
  if (approx.size() != detail.size() ||
      approx.size() != coefficient_count(output_length, filters.size(), mode)) {
    throw Error(ErrorKind::ShapeMismatch, "coefficient lengths do not match the output length");
  }
  const std::size_t taps = filters.size();
  const std::size_t period = output_length + (output_length % 2);
  std::vector<double> out(period, 0.0);
  for (std::size_t m = 0; m < approx.size(); ++m) {
    for (std::size_t j = 0; j < taps; ++j) {
      const auto k = static_cast<std::ptrdiff_t>(2 * m) - static_cast<std::ptrdiff_t>(j);
      std::size_t idx = 0;
      if (mode == ExtensionMode::Symmetric) {
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(output_length)) continue;
        idx = static_cast<std::size_t>(k);
      } else {
        idx = wrap(k, period);
      }
      out[idx] += approx[m] * filters.lowpass[j] + detail[m] * filters.highpass[j];
    }
  }
  out.resize(output_length);
  return out;
}

std::size_t max_level(std::size_t length, std::size_t filter_length, ExtensionMode mode) noexcept {
  std::size_t dyadic = 0;
  while ((std::size_t{2} << dyadic) <= length) ++dyadic;  // floor(log2(length))
  std::size_t level = 0;
  std::size_t n = length;
  // Periodization stays orthogonal even when the filter wraps the signal
  // several times, so only the symmetric mode needs the filter-span rule.
  const std::size_t min_input = mode == ExtensionMode::Symmetric ? std::max<std::size_t>(filter_length, 2) : 2;
  while (level < dyadic && n >= min_input) {
    n = coefficient_count(n, filter_length, mode);
    ++level;
  }
  return level;
}

WaveletDecomposition wavedec(std::span<const double> signal, const WaveletFilterPair& filters,
                             std::size_t levels, ExtensionMode mode) {
  if (levels == 0) throw Error(ErrorKind::TooManyLevels, "decomposition depth must be >= 1");
  const std::size_t limit = max_level(signal.size(), filters.size(), mode);
  if (levels > limit) {
    throw Error(ErrorKind::TooManyLevels,
                std::to_string(levels) + " levels requested; a " + std::to_string(signal.size()) +
                    "-sample signal with " + filters.name + " supports at most " +
                    std::to_string(limit));
  }
  WaveletDecomposition dec;
  dec.extension_mode = mode;
  dec.wavelet = filters.name;
  std::vector<double> current(signal.begin(), signal.end());
  for (std::size_t level = 0; level < levels; ++level) {
    dec.input_lengths.push_back(current.size());
    DwtStep step = dwt_step(current, filters, mode);
    dec.details.push_back(std::move(step.detail));
    current = std::move(step.approx);
  }
  dec.approximation = std::move(current);
  return dec;
}

std::vector<double> waverec(const WaveletDecomposition& dec, const WaveletFilterPair& filters) {
  const std::size_t levels = dec.levels();
  if (levels == 0 || dec.input_lengths.size() != levels) {
    throw Error(ErrorKind::ShapeMismatch, "decomposition has inconsistent level bookkeeping");
  }
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t expect =
        coefficient_count(dec.input_lengths[l], filters.size(), dec.extension_mode);
    const std::size_t next = l + 1 < levels ? dec.input_lengths[l + 1] : dec.approximation.size();
    if (dec.details[l].size() != expect || next != expect) {
      throw Error(ErrorKind::ShapeMismatch,
                  "level " + std::to_string(l + 1) + " holds " +
                      std::to_string(dec.details[l].size()) + " detail coefficients, expected " +
                      std::to_string(expect));
    }
  }
  std::vector<double> current = dec.approximation;
  for (std::size_t l = levels; l-- > 0;) {
    current = idwt_step(current, dec.details[l], filters, dec.extension_mode, dec.input_lengths[l]);
  }
  return current;
}

std::string_view rhythm_name(Rhythm rhythm) noexcept {
  switch (rhythm) {
    case Rhythm::Delta: return "delta";
    case Rhythm::Theta: return "theta";
    case Rhythm::Alpha: return "alpha";
    case Rhythm::Beta: return "beta";
    case Rhythm::Gamma: return "gamma";
    case Rhythm::None: return "none";
  }
  return "none";
}

namespace {

struct RhythmBand {
  Rhythm rhythm;
  double low;
  double high;
};

constexpr RhythmBand kBands[] = {
    {Rhythm::Theta, 4.0, 8.0},   {Rhythm::Delta, 0.0, 4.0},
    {Rhythm::Alpha, 8.0, 13.0},  {Rhythm::Beta, 13.0, 30.0},
    {Rhythm::Gamma, 30.0, INFINITY},
};

Rhythm classify_band(double low, double high) {
  const double width = high - low;
  for (const auto& band : kBands) {
    const double inside = std::min(high, band.high) - std::max(low, band.low);
    if (inside > 0.0 && inside >= 0.5 * width) return band.rhythm;
  }
  return Rhythm::None;
}

}  // namespace

std::vector<SubbandEntry> subband_map(double sampling_rate_hz, std::size_t levels) {
  if (!(sampling_rate_hz > 0.0) || levels == 0) {
    throw Error(ErrorKind::InvalidConfig, "subband_map needs fs > 0 and at least one level");
  }
  std::vector<SubbandEntry> entries;
  double high = sampling_rate_hz / 2.0;
  for (std::size_t l = 1; l <= levels; ++l) {
    SubbandEntry e;
    e.id = "d" + std::to_string(l);
    e.level = l;
    e.high_hz = high;
    e.low_hz = high / 2.0;
    e.rhythm = classify_band(e.low_hz, e.high_hz);
    entries.push_back(e);
    high /= 2.0;
  }
  SubbandEntry a;
  a.id = "a" + std::to_string(levels);
  a.level = levels;
  a.is_approximation = true;
  a.low_hz = 0.0;
  a.high_hz = high;
  a.rhythm = classify_band(a.low_hz, a.high_hz);
  entries.push_back(a);
  return entries;
}

}  // namespace eegemo::dwt
