#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "eegemo/signal_io.hpp"

namespace eegemo::metrics {

/// counts[i][j] = number of samples of true class i predicted as class j,
/// classes ordered Positive, Neutral, Negative.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts{};

  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;
};

ConfusionMatrix confusion(std::span<const EmotionLabel> truth, std::span<const EmotionLabel> predicted);
/// Integer-coded variant; rejects codes outside {0,1,2} with UnknownLabel.
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted);

struct BinaryTally {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
};

/// One-vs-rest reduction for `positive_class`.
BinaryTally binarize(const ConfusionMatrix& cm, int positive_class);

/// A rate whose denominator was zero is reported as 0 with `degenerate` set.
struct Rate {
  double value = 0.0;
  bool degenerate = false;
};

/// (TN + TP) / (TN + FN + TP + FP). Throws EmptyTally.
double accuracy(const BinaryTally& t);

/// TP / (TP + FP). This is what is conventionally called precision.
Rate specificity(const BinaryTally& t);

/// TN / (TN + FN). This is what is conventionally called negative predictive value.
Rate sensitivity(const BinaryTally& t);

/// Conventional recall, TP / (TP + FN).
Rate recall(const BinaryTally& t);

struct ClassReport {
  Rate specificity;  // TP / (TP + FP)
  Rate sensitivity;  // TN / (TN + FN)
  Rate recall;       // TP / (TP + FN)
  Rate precision;    // same quantity as specificity, conventional name
  double accuracy = 0.0;  // one-vs-rest (TN + TP) / total
  std::size_t support = 0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::array<ClassReport, kClassCount> per_class{};
  double accuracy = 0.0;  // trace / total
  double macro_accuracy = 0.0;
  double macro_specificity = 0.0;
  double macro_sensitivity = 0.0;
  double macro_recall = 0.0;
};

/// Throws EmptyMatrix.
EvalReport report(const ConfusionMatrix& cm);

nlohmann::json to_json(const EvalReport& r);

/// Aligned plain-text classification report.
std::string format_report(const EvalReport& r);

/// Header row "true\predicted,Positive,Neutral,Negative" then one row per true class.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace eegemo::metrics
