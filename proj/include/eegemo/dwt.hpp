#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eegemo::dwt {

enum class ExtensionMode {
  Symmetric,  // half-point reflection, full-convolution output length
  Periodic,   // periodization, output length ceil(n / 2)
};

std::string_view mode_name(ExtensionMode mode) noexcept;
ExtensionMode parse_mode(std::string_view name);

/// Orthonormal two-channel analysis bank. The highpass filter is always the
/// quadrature mirror of the lowpass: g[n] = (-1)^n h[L-1-n].
struct WaveletFilterPair {
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t size() const noexcept { return lowpass.size(); }

  /// Builds g from h and checks even length, unit energy and orthogonality to
  /// even shifts (1e-10). Throws InvalidFilter.
  static WaveletFilterPair from_lowpass(std::string name, std::vector<double> lowpass);
};

/// haar (alias db1), db2, db4.
WaveletFilterPair builtin_wavelet(std::string_view name);

/// Reads a coefficient table {"wavelets": [{"name": ..., "lowpass": [...]}]}.
std::vector<WaveletFilterPair> load_wavelet_table(const std::filesystem::path& path);

/// Looks in `extra` first, then the built-ins. Throws UnknownWavelet.
WaveletFilterPair find_wavelet(std::string_view name, std::span<const WaveletFilterPair> extra = {});

std::size_t coefficient_count(std::size_t input_length, std::size_t filter_length,
                              ExtensionMode mode) noexcept;

struct DwtStep {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// One analysis level:
///   approx[n] = sum_k x[k] h[2n-k],  detail[n] = sum_k x[k] g[2n-k]
/// with x extended past its ends according to `mode`.
DwtStep dwt_step(std::span<const double> signal, const WaveletFilterPair& filters,
                 ExtensionMode mode);

/// Synthesis (adjoint) of dwt_step back to `output_length` samples.
std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                              const WaveletFilterPair& filters, ExtensionMode mode,
                              std::size_t output_length);

struct WaveletDecomposition {
  std::vector<std::vector<double>> details;  // d1 .. dL
  std::vector<double> approximation;         // aL
  std::vector<std::size_t> input_lengths;    // signal length entering each level
  ExtensionMode extension_mode = ExtensionMode::Symmetric;
  std::string wavelet;

  std::size_t levels() const noexcept { return details.size(); }
};

/// Largest depth accepted by wavedec for a signal of `length` samples:
/// L <= floor(log2(length)), every level's input has at least 2 samples, and
/// in symmetric mode it must also span the filter.
std::size_t max_level(std::size_t length, std::size_t filter_length, ExtensionMode mode) noexcept;

WaveletDecomposition wavedec(std::span<const double> signal, const WaveletFilterPair& filters,
                             std::size_t levels, ExtensionMode mode);

std::vector<double> waverec(const WaveletDecomposition& dec, const WaveletFilterPair& filters);

enum class Rhythm { Delta, Theta, Alpha, Beta, Gamma, None };

std::string_view rhythm_name(Rhythm rhythm) noexcept;

struct SubbandEntry {
  std::string id;  // "d1".."dL" or "aL"
  std::size_t level = 0;
  bool is_approximation = false;
  double low_hz = 0.0;   // exclusive
  double high_hz = 0.0;  // inclusive
  Rhythm rhythm = Rhythm::None;
};

/// Entries ordered d1..dL then aL, matching WaveletDecomposition. A set is
/// labelled with the rhythm holding at least half of its bandwidth (theta is
/// checked first); otherwise None. Rhythm edges: delta (0,4], theta (4,8],
/// alpha (8,13], beta (13,30], gamma above 30 Hz.
std::vector<SubbandEntry> subband_map(double sampling_rate_hz, std::size_t levels);

}  // namespace eegemo::dwt
