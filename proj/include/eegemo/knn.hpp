#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eegemo/features.hpp"

namespace eegemo::knn {

/// (sum_i |x_i - y_i|^c)^(1/c). Throws DimensionMismatch / InvalidExponent (c < 1).
double minkowski_distance(std::span<const double> x, std::span<const double> y, double c);

struct Classification {
  EmotionLabel label = EmotionLabel::Positive;
  std::vector<std::size_t> neighbor_ids;  // training indices, nearest first
};

/// Exhaustive-search classifier.
///
/// Neighbours are ranked by (distance, training index), so equal distances at
/// the k-th place resolve to the earlier training point. A vote tie goes to
/// the class whose tied neighbours have the smaller summed distance, then to
/// the smaller class index.
class KnnModel {
 public:
  KnnModel(LabeledDataset train, std::size_t k, double c = 2.0);

  Classification classify(std::span<const double> query) const;
  std::vector<EmotionLabel> predict(const LabeledDataset& queries) const;

  const LabeledDataset& train() const noexcept { return train_; }
  std::size_t k() const noexcept { return k_; }
  double c() const noexcept { return c_; }

 private:
  LabeledDataset train_;
  std::size_t k_;
  double c_;
};

struct KSelection {
  std::size_t best_k = 1;
  std::vector<std::pair<std::size_t, double>> per_k_accuracy;  // candidate order
  std::vector<std::size_t> fold_of;                            // fold index per sample
};

/// Stratified fold assignment: each class is shuffled with the seed and dealt
/// round-robin, continuing the count across classes so fold sizes differ by
/// at most one.
std::vector<std::size_t> stratified_folds(std::span<const EmotionLabel> labels, std::size_t folds,
                                          std::uint64_t seed);

/// Mean validation accuracy over the folds for each candidate k; the best k
/// is the argmax with ties going to the smaller k.
KSelection select_k(const LabeledDataset& data, std::span<const std::size_t> candidates,
                    std::size_t folds, double c, std::uint64_t seed);

nlohmann::json to_json(const KnnModel& model);
KnnModel model_from_json(const nlohmann::json& doc);

}  // namespace eegemo::knn
