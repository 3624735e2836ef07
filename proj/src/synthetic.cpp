#include "eegemo/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "eegemo/error.hpp"
#include "eegemo/random.hpp"
#include "eegemo/text.hpp"

namespace eegemo::synthetic {

namespace {

// theta, alpha, beta; off the integer grid so one-second windows do not all
// start at the same carrier phase.
constexpr std::array<double, 3> kCarrierHz = {6.3, 10.7, 21.4};

// Class-dependent amplitude (uV) added on top of a 10 uV floor, indexed
// [class][channel][carrier].
constexpr double kBase = 10.0;
constexpr std::array<std::array<std::array<double, 3>, 4>, kClassCount> kClassAmplitude = {{
    // Positive: strong theta everywhere, temporal alpha.
    {{{28, 16, 0}, {28, 0, 0}, {28, 0, 0}, {28, 16, 0}}},
    // Neutral: weak frontal alpha, the quietest class.
    {{{0, 4, 0}, {0, 16, 0}, {0, 16, 0}, {0, 4, 0}}},
    // Negative: strong beta everywhere, right frontal theta.
    {{{0, 0, 40}, {0, 0, 40}, {12, 0, 40}, {0, 0, 40}}},
}};

}  // namespace

EegRecording generate(EmotionLabel label, int session, const std::string& subject,
                      const Options& opt) {
  if (!(opt.seconds > 0.0) || !(opt.sampling_rate > 0.0) || opt.sessions < 1) {
    throw Error(ErrorKind::InvalidConfig, "synthetic options must be positive");
  }
  const std::string stream = subject + "/" + std::string(label_name(label)) + "/" + std::to_string(session);
  Rng rng(derive_seed(opt.seed, stream));

  EegRecording rec;
  rec.channels.assign(kAllChannels.begin(), kAllChannels.end());
  rec.sampling_rate = opt.sampling_rate;
  rec.session_id = session;
  rec.label = label;
  rec.subject = subject;
  const auto n = static_cast<std::size_t>(std::llround(opt.seconds * opt.sampling_rate));
  rec.samples.assign(4, std::vector<double>(n, 0.0));

  const int cls = label_index(label);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    std::array<double, 3> amp{};
    std::array<double, 3> phase{};
    std::array<double, 3> drift_phase{};
    const double session_gain = 1.0 + 0.05 * (2.0 * rng.uniform() - 1.0);
    for (std::size_t k = 0; k < 3; ++k) {
      amp[k] = session_gain * (kBase + opt.separation * kClassAmplitude[cls][ch][k]);
      phase[k] = 2.0 * M_PI * rng.uniform();
      drift_phase[k] = 2.0 * M_PI * rng.uniform();
    }
    auto& out = rec.samples[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / opt.sampling_rate;
      double v = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const double mod = 1.0 + opt.drift * std::sin(2.0 * M_PI * t / 7.3 + drift_phase[k]);
        v += amp[k] * mod * std::sin(2.0 * M_PI * kCarrierHz[k] * t + phase[k]);
      }
      v += opt.noise_uv * rng.normal();
      // Muse exports carry three decimals.
      out[i] = std::round(v * 1000.0) / 1000.0;
    }
  }
  return rec;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const Options& opt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json files = nlohmann::json::array();
  for (const auto& subject : opt.subjects) {
    for (int cls = 0; cls < kClassCount; ++cls) {
      const EmotionLabel label = label_from_index(cls);
      for (int s = 1; s <= opt.sessions; ++s) {
        const EegRecording rec = generate(label, s, subject, opt);
        const std::string name =
            subject + "-" + text::lower(label_name(label)) + "-" + std::to_string(s) + ".csv";
        std::ofstream out(dir / name);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + (dir / name).string());
        out << "timestamps,TP9,AF7,AF8,TP10,Right AUX\n";
        for (std::size_t i = 0; i < rec.sample_count(); ++i) {
          out << text::format_double(static_cast<double>(i) / opt.sampling_rate);
          for (const auto& channel : rec.samples) out << ',' << text::format_double(channel[i]);
          out << ",0\n";
        }
        files.push_back({{"path", name},
                         {"label", std::string(label_name(label))},
                         {"session", s},
                         {"subject", subject}});
      }
    }
  }
  nlohmann::json config = {
      {"data", {{"files", files}, {"schema", {{"timestamp_column", "timestamps"}}}}},
      {"sampling_rate_hz", opt.sampling_rate},
      {"seed", 42},
  };
  const auto path = dir / "config.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << config.dump(2) << '\n';
  return path;
}

}  // namespace eegemo::synthetic
