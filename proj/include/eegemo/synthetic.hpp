#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegemo/signal_io.hpp"

namespace eegemo::synthetic {

/// Three-class stand-in for Muse recordings. Every channel is a mixture of
/// sinusoids (theta, alpha, beta carriers) whose amplitudes depend on class
/// and channel, slowly modulated and buried in Gaussian noise.
struct Options {
  std::vector<std::string> subjects = {"subjecta"};
  int sessions = 3;
  double seconds = 64.0;
  double sampling_rate = 256.0;
  double noise_uv = 4.0;
  /// Scales the class-dependent part of the amplitudes; 1 is well separated,
  /// values near 0 make the classes hard to tell apart.
  double separation = 1.0;
  /// Amplitude drift between windows, as a fraction of the carrier amplitude.
  double drift = 0.1;
  std::uint64_t seed = 7;
};

EegRecording generate(EmotionLabel label, int session, const std::string& subject,
                      const Options& opt);

/// Writes "<subject>-<label>-<session>.csv" files in the Muse export layout
/// (timestamps, TP9, AF7, AF8, TP10, Right AUX) plus a ready-to-run
/// config.json next to them. Returns the config path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Options& opt);

}  // namespace eegemo::synthetic
