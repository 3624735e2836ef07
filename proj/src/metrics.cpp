#include "eegemo/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <vector>

#include "eegemo/error.hpp"

namespace eegemo::metrics {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t n = 0;
  for (int i = 0; i < kClassCount; ++i) n += counts[i][i];
  return n;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(truth.size()) + " true labels vs " +
                                               std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= kClassCount || p < 0 || p >= kClassCount) {
      throw Error(ErrorKind::UnknownLabel, "label code outside {0,1,2} at position " + std::to_string(i));
    }
    ++cm.counts[t][p];
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const EmotionLabel> truth,
                          std::span<const EmotionLabel> predicted) {
  std::vector<int> t;
  std::vector<int> p;
  for (auto l : truth) t.push_back(label_index(l));
  for (auto l : predicted) p.push_back(label_index(l));
  return confusion(std::span<const int>(t), std::span<const int>(p));
}

BinaryTally binarize(const ConfusionMatrix& cm, int positive_class) {
  if (positive_class < 0 || positive_class >= kClassCount) {
    throw Error(ErrorKind::UnknownLabel, "positive class outside {0,1,2}");
  }
  const int p = positive_class;
  BinaryTally t;
  for (int i = 0; i < kClassCount; ++i) {
    for (int j = 0; j < kClassCount; ++j) {
      const std::size_t v = cm.counts[i][j];
      if (i == p && j == p) t.tp += v;
      else if (i == p) t.fn += v;
      else if (j == p) t.fp += v;
      else t.tn += v;
    }
  }
  return t;
}

namespace {

Rate ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

double accuracy(const BinaryTally& t) {
  if (t.total() == 0) throw Error(ErrorKind::EmptyTally, "accuracy of an empty tally");
  return static_cast<double>(t.tn + t.tp) / static_cast<double>(t.tn + t.fn + t.tp + t.fp);
}

Rate specificity(const BinaryTally& t) { return ratio(t.tp, t.tp + t.fp); }

Rate sensitivity(const BinaryTally& t) { return ratio(t.tn, t.tn + t.fn); }

Rate recall(const BinaryTally& t) { return ratio(t.tp, t.tp + t.fn); }

EvalReport report(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "report on an empty confusion matrix");
  EvalReport r;
  r.confusion = cm;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (int c = 0; c < kClassCount; ++c) {
    const BinaryTally t = binarize(cm, c);
    ClassReport& cr = r.per_class[c];
    cr.specificity = specificity(t);
    cr.sensitivity = sensitivity(t);
    cr.recall = recall(t);
    cr.precision = cr.specificity;
    cr.accuracy = accuracy(t);
    cr.support = t.tp + t.fn;
    r.macro_accuracy += cr.accuracy;
    r.macro_specificity += cr.specificity.value;
    r.macro_sensitivity += cr.sensitivity.value;
    r.macro_recall += cr.recall.value;
  }
  r.macro_accuracy /= kClassCount;
  r.macro_specificity /= kClassCount;
  r.macro_sensitivity /= kClassCount;
  r.macro_recall /= kClassCount;
  return r;
}

namespace {

nlohmann::json rate_json(const Rate& r) {
  nlohmann::json j = {{"value", r.value}};
  if (r.degenerate) j["degenerate"] = true;
  return j;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json doc;
  doc["classes"] = {"Positive", "Neutral", "Negative"};
  doc["confusion"] = r.confusion.counts;
  doc["total"] = r.confusion.total();
  doc["accuracy"] = r.accuracy;
  doc["macro"] = {{"accuracy", r.macro_accuracy},
                  {"specificity", r.macro_specificity},
                  {"sensitivity", r.macro_sensitivity},
                  {"recall", r.macro_recall}};
  auto& per = doc["per_class"];
  for (int c = 0; c < kClassCount; ++c) {
    const auto& cr = r.per_class[c];
    per[std::string(label_name(label_from_index(c)))] = {
        {"specificity", rate_json(cr.specificity)},
        {"sensitivity", rate_json(cr.sensitivity)},
        {"recall", rate_json(cr.recall)},
        {"precision", rate_json(cr.precision)},
        {"accuracy", cr.accuracy},
        {"support", cr.support}};
  }
  return doc;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %12s %12s %10s %10s %8s\n", "class", "specificity",
                "sensitivity", "recall", "accuracy", "support");
  out << line;
  for (int c = 0; c < kClassCount; ++c) {
    const auto& cr = r.per_class[c];
    std::snprintf(line, sizeof line, "%-10s %11.4f%s %11.4f%s %10.4f %10.4f %8zu\n",
                  std::string(label_name(label_from_index(c))).c_str(), cr.specificity.value,
                  cr.specificity.degenerate ? "*" : " ", cr.sensitivity.value,
                  cr.sensitivity.degenerate ? "*" : " ", cr.recall.value, cr.accuracy, cr.support);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-10s %11.4f  %11.4f  %10.4f %10.4f %8zu\n", "macro",
                r.macro_specificity, r.macro_sensitivity, r.macro_recall, r.macro_accuracy,
                r.confusion.total());
  out << line;
  std::snprintf(line, sizeof line, "overall accuracy %.4f\n", r.accuracy);
  out << line;
  if (std::any_of(r.per_class.begin(), r.per_class.end(), [](const ClassReport& cr) {
        return cr.specificity.degenerate || cr.sensitivity.degenerate;
      })) {
    out << "* zero denominator, reported as 0\n";
  }
  return out.str();
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\predicted";
  for (int c = 0; c < kClassCount; ++c) out << ',' << label_name(label_from_index(c));
  out << '\n';
  for (int i = 0; i < kClassCount; ++i) {
    out << label_name(label_from_index(i));
    for (int j = 0; j < kClassCount; ++j) out << ',' << cm.counts[i][j];
    out << '\n';
  }
}

}  // namespace eegemo::metrics
