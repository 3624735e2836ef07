#include "eegemo/knn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "eegemo/error.hpp"
#include "eegemo/random.hpp"

namespace eegemo::knn {

double minkowski_distance(std::span<const double> x, std::span<const double> y, double c) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "minkowski_distance: vectors differ in length");
  }
  if (!(c >= 1.0)) throw Error(ErrorKind::InvalidExponent, "Minkowski exponent must be >= 1");
  double sum = 0.0;
  if (c == 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - y[i]);
    return sum;
  }
  if (c == 2.0) {
    for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(sum);
  }
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::pow(std::abs(x[i] - y[i]), c);
  return std::pow(sum, 1.0 / c);
}

KnnModel::KnnModel(LabeledDataset train, std::size_t k, double c)
    : train_(std::move(train)), k_(k), c_(c) {
  if (train_.empty()) throw Error(ErrorKind::EmptyModel, "kNN model has no training vectors");
  train_.validate();
  if (k_ == 0 || k_ > train_.size()) {
    throw Error(ErrorKind::InvalidK, "k=" + std::to_string(k_) + " with " +
                                         std::to_string(train_.size()) + " training vectors");
  }
  if (!(c_ >= 1.0)) throw Error(ErrorKind::InvalidExponent, "Minkowski exponent must be >= 1");
}

Classification KnnModel::classify(std::span<const double> query) const {
  if (query.size() != train_.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "query dimension does not match the model");
  }
  std::vector<std::pair<double, std::size_t>> ranked(train_.size());
  for (std::size_t i = 0; i < train_.size(); ++i) {
    ranked[i] = {minkowski_distance(query, train_.vectors[i].values, c_), i};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k_), ranked.end());

  std::array<std::size_t, kClassCount> votes{};
  std::array<double, kClassCount> dist_sum{};
  Classification out;
  for (std::size_t r = 0; r < k_; ++r) {
    const auto [dist, idx] = ranked[r];
    const int cls = label_index(train_.vectors[idx].label);
    ++votes[cls];
    dist_sum[cls] += dist;
    out.neighbor_ids.push_back(idx);
  }
  int best = 0;
  for (int cls = 1; cls < kClassCount; ++cls) {
    if (votes[cls] > votes[best] ||
        (votes[cls] == votes[best] && votes[cls] > 0 && dist_sum[cls] < dist_sum[best])) {
      best = cls;
    }
  }
  out.label = label_from_index(best);
  return out;
}

std::vector<EmotionLabel> KnnModel::predict(const LabeledDataset& queries) const {
  std::vector<EmotionLabel> out;
  out.reserve(queries.size());
  for (const auto& q : queries.vectors) out.push_back(classify(q.values).label);
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const EmotionLabel> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 folds");
  if (labels.size() < folds) {
    throw Error(ErrorKind::TooFewSamples, std::to_string(labels.size()) + " samples for " +
                                              std::to_string(folds) + " folds");
  }
  Rng rng(seed);
  std::vector<std::size_t> fold_of(labels.size(), 0);
  std::size_t dealt = 0;
  for (int cls = 0; cls < kClassCount; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (label_index(labels[i]) == cls) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) fold_of[idx] = dealt++ % folds;
  }
  return fold_of;
}

KSelection select_k(const LabeledDataset& data, std::span<const std::size_t> candidates,
                    std::size_t folds, double c, std::uint64_t seed) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidConfig, "no k candidates");
  KSelection out;
  std::vector<EmotionLabel> labels;
  for (const auto& v : data.vectors) labels.push_back(v.label);
  out.fold_of = stratified_folds(labels, folds, seed);

  std::vector<LabeledDataset> train(folds);
  std::vector<LabeledDataset> valid(folds);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < folds; ++f) {
      (out.fold_of[i] == f ? valid[f] : train[f]).vectors.push_back(data.vectors[i]);
    }
  }

  double best_acc = -1.0;
  for (std::size_t k : candidates) {
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      const KnnModel model(train[f], k, c);
      std::size_t correct = 0;
      for (const auto& v : valid[f].vectors) {
        if (model.classify(v.values).label == v.label) ++correct;
      }
      acc_sum += static_cast<double>(correct) / static_cast<double>(valid[f].size());
    }
    const double acc = acc_sum / static_cast<double>(folds);
    out.per_k_accuracy.emplace_back(k, acc);
    if (acc > best_acc || (acc == best_acc && k < out.best_k)) {
      best_acc = acc;
      out.best_k = k;
    }
  }
  return out;
}

nlohmann::json to_json(const KnnModel& model) {
  nlohmann::json doc;
  doc["k"] = model.k();
  doc["c"] = model.c();
  std::vector<std::string> channels;
  for (Channel ch : model.train().vectors.front().channel_order) {
    channels.emplace_back(channel_name(ch));
  }
  doc["channels"] = channels;
  auto& rows = doc["train"];
  rows = nlohmann::json::array();
  for (const auto& v : model.train().vectors) {
    rows.push_back({{"label", label_index(v.label)}, {"values", v.values}});
  }
  return doc;
}

KnnModel model_from_json(const nlohmann::json& doc) {
  try {
    std::vector<Channel> channels;
    for (const auto& name : doc.at("channels")) {
      const auto ch = parse_channel(name.get<std::string>());
      if (!ch) throw Error(ErrorKind::ParseError, "unknown channel in model");
      channels.push_back(*ch);
    }
    LabeledDataset train;
    for (const auto& row : doc.at("train")) {
      FeatureVector v;
      v.label = label_from_index(row.at("label").get<int>());
      v.values = row.at("values").get<std::vector<double>>();
      v.channel_order = channels;
      train.vectors.push_back(std::move(v));
    }
    return KnnModel(std::move(train), doc.at("k").get<std::size_t>(), doc.at("c").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed kNN model: ") + e.what());
  }
}

}  // namespace eegemo::knn
