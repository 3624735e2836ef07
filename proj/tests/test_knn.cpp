#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "eegemo/error.hpp"
#include "eegemo/knn.hpp"
#include "oracles.hpp"

using namespace eegemo;
using namespace eegemo::knn;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no eegemo::Error thrown");
  return ErrorKind::IoError;
}

LabeledDataset make_dataset(const std::vector<std::vector<double>>& points, const std::vector<int>& labels) {
  LabeledDataset d;
  for (std::size_t i = 0; i < points.size(); ++i) d.vectors.push_back({points[i], label_from_index(labels[i]), {}});
  return d;
}

struct RandomSet {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
};

RandomSet random_set(Rng& rng, std::size_t n, std::size_t dim) {
  RandomSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.points.push_back(oracle::random_signal(rng, dim, 3.0));
    s.labels.push_back(static_cast<int>(rng.below(3)));
  }
  return s;
}

}  // namespace

TEST_CASE("minkowski distance examples") {
  const std::vector<double> o = {0, 0};
  const std::vector<double> p = {3, 4};
  CHECK(minkowski_distance(o, p, 2.0) == 5.0);
  CHECK(minkowski_distance(o, p, 1.0) == 7.0);
  CHECK(minkowski_distance(o, p, 3.0) == doctest::Approx(std::cbrt(91.0)));
  for (double c : {1.0, 1.5, 2.0, 3.0, 7.0}) CHECK(minkowski_distance(p, p, c) == 0.0);
  // absolute differences keep fractional exponents well defined
  CHECK(minkowski_distance(std::vector<double>{1}, std::vector<double>{-2}, 1.5) == doctest::Approx(3.0));
}

TEST_CASE("minkowski distance rejects bad input") {
  CHECK(kind_of([] { minkowski_distance(std::vector<double>{1, 2}, std::vector<double>{1}, 2.0); }) ==
        ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { minkowski_distance(std::vector<double>{1}, std::vector<double>{1}, 0.5); }) ==
        ErrorKind::InvalidExponent);
}

TEST_CASE("metric axioms hold on random vectors") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + rng.below(10);
    const double c = 1.0 + rng.uniform(0.0, 4.0);
    const auto x = oracle::random_signal(rng, dim, 5.0);
    const auto y = oracle::random_signal(rng, dim, 5.0);
    const auto z = oracle::random_signal(rng, dim, 5.0);
    const double xy = minkowski_distance(x, y, c);
    CHECK(xy >= 0.0);
    CHECK(std::fabs(xy - minkowski_distance(y, x, c)) <= 1e-12);
    CHECK(minkowski_distance(x, z, c) <= xy + minkowski_distance(y, z, c) + 1e-9);
  }
}

TEST_CASE("distance does not grow with the exponent") {
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = oracle::random_signal(rng, 6, 5.0);
    const auto y = oracle::random_signal(rng, 6, 5.0);
    double prev = minkowski_distance(x, y, 1.0);
    for (double c = 1.25; c <= 6.0; c += 0.25) {
      const double d = minkowski_distance(x, y, c);
      CHECK(d <= prev + 1e-12);
      prev = d;
    }
  }
}

TEST_CASE("single training point") {
  const KnnModel model(make_dataset({{1.0, 2.0}}, {2}), 1);
  CHECK(model.classify(std::vector<double>{50.0, -3.0}).label == EmotionLabel::Negative);
}

TEST_CASE("crafted five-point set with k=3") {
  //   distances from the query (0,0): 1, 2, 2.5, 3, 10
  const auto data = make_dataset({{3, 0}, {0, 1}, {10, 0}, {0, -2}, {2.5, 0}}, {1, 0, 1, 2, 1});
  const KnnModel model(data, 3);
  const auto out = model.classify(std::vector<double>{0, 0});
  // nearest three: (0,1) Positive, (0,-2) Negative, (2.5,0) Neutral; one vote each,
  // Positive has the smallest summed distance.
  CHECK(out.neighbor_ids == std::vector<std::size_t>{1, 3, 4});
  CHECK(out.label == EmotionLabel::Positive);
  const KnnModel five(data, 5);
  CHECK(five.classify(std::vector<double>{0, 0}).label == EmotionLabel::Neutral);
}

TEST_CASE("vote ties go to the smaller summed distance") {
  // k=2: one Negative at distance 1, one Positive at distance 1.5
  const auto data = make_dataset({{-1.5, 0}, {1, 0}, {9, 9}}, {0, 2, 0});
  const KnnModel model(data, 2);
  CHECK(model.classify(std::vector<double>{0, 0}).label == EmotionLabel::Negative);
}

TEST_CASE("fully symmetric tie goes to the smaller class index") {
  const auto data = make_dataset({{1, 0}, {-1, 0}}, {2, 1});
  const KnnModel model(data, 2);
  CHECK(model.classify(std::vector<double>{0, 0}).label == EmotionLabel::Neutral);
}

TEST_CASE("distance ties at the k-th place keep the earlier training point") {
  const auto data = make_dataset({{0, 1}, {1, 0}, {0, -1}}, {2, 1, 0});
  const KnnModel model(data, 1);
  const auto out = model.classify(std::vector<double>{0, 0});
  CHECK(out.neighbor_ids == std::vector<std::size_t>{0});
  CHECK(out.label == EmotionLabel::Negative);
}

TEST_CASE("model construction errors") {
  CHECK(kind_of([] { KnnModel(LabeledDataset{}, 1); }) == ErrorKind::EmptyModel);
  const auto data = make_dataset({{0, 1}, {1, 0}}, {0, 1});
  CHECK(kind_of([&] { KnnModel(data, 0); }) == ErrorKind::InvalidK);
  CHECK(kind_of([&] { KnnModel(data, 3); }) == ErrorKind::InvalidK);
  CHECK(kind_of([&] { KnnModel(data, 1, 0.9); }) == ErrorKind::InvalidExponent);
  const KnnModel model(data, 1);
  CHECK(kind_of([&] { model.classify(std::vector<double>{1.0}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("classify matches the exhaustive oracle") {
  Rng rng(23);
  for (double c : {1.0, 2.0, 3.0}) {
    for (std::size_t k : {1u, 3u, 5u}) {
      const auto set = random_set(rng, 20 + rng.below(181), 4);
      const KnnModel model(make_dataset(set.points, set.labels), k, c);
      for (int q = 0; q < 100; ++q) {
        const auto query = oracle::random_signal(rng, 4, 3.0);
        CHECK(label_index(model.classify(query).label) ==
              oracle::brute_force_knn(set.points, set.labels, query, k, c));
      }
    }
  }
}

TEST_CASE("training order does not change the answer") {
  Rng rng(24);
  const auto set = random_set(rng, 60, 3);
  const KnnModel model(make_dataset(set.points, set.labels), 5);
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  RandomSet shuffled;
  for (std::size_t i : perm) {
    shuffled.points.push_back(set.points[i]);
    shuffled.labels.push_back(set.labels[i]);
  }
  const KnnModel other(make_dataset(shuffled.points, shuffled.labels), 5);
  for (int q = 0; q < 300; ++q) {
    const auto query = oracle::random_signal(rng, 3, 3.0);
    CHECK(model.classify(query).label == other.classify(query).label);
  }
}

TEST_CASE("stratified folds are balanced and reproducible") {
  std::vector<EmotionLabel> labels;
  for (int i = 0; i < 47; ++i) labels.push_back(label_from_index(i % 3 == 0 ? 0 : (i % 5 == 0 ? 2 : 1)));
  const auto a = stratified_folds(labels, 5, 9);
  const auto b = stratified_folds(labels, 5, 9);
  CHECK(a == b);
  std::array<std::size_t, 5> sizes{};
  for (std::size_t f : a) ++sizes[f];
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  for (int cls = 0; cls < 3; ++cls) {
    std::array<std::size_t, 5> per{};
    std::size_t total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (label_index(labels[i]) == cls) {
        ++per[a[i]];
        ++total;
      }
    }
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
    CHECK(total > 0);
  }
  CHECK(kind_of([&] { stratified_folds(std::span(labels).first(3), 5, 1); }) == ErrorKind::TooFewSamples);
  CHECK(kind_of([&] { stratified_folds(labels, 1, 1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("separated clusters select with perfect accuracy") {
  Rng rng(25);
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < 12; ++i) {
      points.push_back({100.0 * cls + rng.uniform(-1, 1), -50.0 * cls + rng.uniform(-1, 1)});
      labels.push_back(cls);
    }
  }
  const auto data = make_dataset(points, labels);
  const std::vector<std::size_t> candidates = {1, 3, 5, 7};
  const auto sel = select_k(data, candidates, 5, 2.0, 77);
  for (const auto& [k, acc] : sel.per_k_accuracy) CHECK(acc == 1.0);
  CHECK(sel.best_k == 1);  // ties go to the smaller k

  const auto again = select_k(data, candidates, 5, 2.0, 77);
  CHECK(again.fold_of == sel.fold_of);
  CHECK(again.per_k_accuracy == sel.per_k_accuracy);
}

TEST_CASE("select_k prefers the better candidate") {
  // Noisy labels near a boundary make k=1 worse than a larger vote.
  Rng rng(26);
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
  for (int i = 0; i < 150; ++i) {
    const double x = rng.uniform(-1, 1);
    int label = x < 0 ? 0 : 2;
    if (rng.uniform() < 0.25) label = 1;
    points.push_back({x, rng.uniform(-1, 1)});
    labels.push_back(label);
  }
  const std::vector<std::size_t> candidates = {1, 15};
  const auto sel = select_k(make_dataset(points, labels), candidates, 5, 2.0, 5);
  CHECK(sel.per_k_accuracy[1].second > sel.per_k_accuracy[0].second);
  CHECK(sel.best_k == 15);
}

TEST_CASE("model JSON round trip") {
  Rng rng(27);
  const auto set = random_set(rng, 30, 4);
  const KnnModel model(make_dataset(set.points, set.labels), 3, 1.0);
  const KnnModel back = model_from_json(nlohmann::json::parse(to_json(model).dump()));
  CHECK(back.k() == 3);
  CHECK(back.c() == 1.0);
  for (int q = 0; q < 50; ++q) {
    const auto query = oracle::random_signal(rng, 4, 3.0);
    CHECK(back.classify(query).label == model.classify(query).label);
  }
  CHECK(kind_of([] { model_from_json(nlohmann::json::object()); }) == ErrorKind::ParseError);
}
