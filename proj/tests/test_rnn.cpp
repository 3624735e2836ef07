#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "eegemo/error.hpp"
#include "eegemo/rnn.hpp"
#include "oracles.hpp"

using namespace eegemo;
using namespace eegemo::rnn;

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

FeatureSequence random_sequence(Rng& rng, std::size_t steps, std::size_t input, int label) {
  FeatureSequence s;
  for (std::size_t t = 0; t < steps; ++t) s.steps.push_back(oracle::random_signal(rng, input, 1.5));
  s.label = label_from_index(label);
  return s;
}

std::vector<double> flatten(const RnnParameters& p) {
  std::vector<double> out;
  p.for_each([&](double v) { out.push_back(v); });
  return out;
}

// Three Gaussian blobs with centres 10 sigma apart, repeated over T steps.
std::vector<FeatureSequence> blobs(Rng& rng, std::size_t per_class, std::size_t steps) {
  const std::array<std::array<double, 2>, 3> centres = {{{0, 0}, {10, 0}, {5, 8.66}}};
  std::vector<FeatureSequence> out;
  for (int cls = 0; cls < 3; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      FeatureSequence s;
      s.label = label_from_index(cls);
      for (std::size_t t = 0; t < steps; ++t) {
        // scaled by 1/5 so the inputs sit in tanh's working range
        s.steps.push_back({(centres[cls][0] + rng.normal()) / 5.0, (centres[cls][1] + rng.normal()) / 5.0});
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("zero parameters give the uniform distribution") {
  Rng rng(1);
  const auto p = RnnParameters::zeros(4, 6);
  const auto out = forward(p, random_sequence(rng, 3, 4, 0));
  for (int c = 0; c < 3; ++c) {
    CHECK(out.logits[c] == 0.0);
    CHECK(out.probabilities[c] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("without recurrence a single step is a feed-forward layer") {
  Rng rng(2);
  auto p = oracle::random_params(rng, 3, 4);
  std::fill(p.w_rec.data.begin(), p.w_rec.data.end(), 0.0);
  const auto seq = random_sequence(rng, 1, 3, 1);
  const auto out = forward(p, seq);
  for (std::size_t c = 0; c < 3; ++c) {
    double logit = p.b_out[c];
    for (std::size_t j = 0; j < 4; ++j) {
      double z = p.b_h[j];
      for (std::size_t i = 0; i < 3; ++i) z += p.w_in(j, i) * seq.steps[0][i];
      logit += p.w_out(c, j) * std::tanh(z);
    }
    CHECK(std::fabs(out.logits[c] - logit) <= 1e-12);
  }
}

TEST_CASE("forward matches the hand-rolled recurrence") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_params(rng, 5, 7);
    const auto seq = random_sequence(rng, 3, 5, trial % 3);
    const auto expect = oracle::hand_forward(p, seq.steps);
    const auto got = forward(p, seq).probabilities;
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::fabs(got[c] - expect[c]) <= 1e-12);
  }
}

TEST_CASE("loss values") {
  CHECK(loss({0.0, 1.0, 0.0}, EmotionLabel::Neutral) == 0.0);
  CHECK(loss({1.0 / 3, 1.0 / 3, 1.0 / 3}, EmotionLabel::Negative) == doctest::Approx(std::log(3.0)));
  const double clamped = loss({1.0, 0.0, 0.0}, EmotionLabel::Negative);
  CHECK(std::isfinite(clamped));
  CHECK(clamped <= -std::log(1e-12) + 1e-9);
}

TEST_CASE("softmax is a simplex point and shift invariant") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = std::pow(10.0, rng.uniform(-2, 3));
    const ClassVector z = {scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1)};
    const auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
    const double shift = rng.uniform(-50, 50);
    const auto q = softmax({z[0] + shift, z[1] + shift, z[2] + shift});
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::fabs(p[c] - q[c]) <= 1e-12);
  }
  const auto extreme = softmax({1e300, -1e300, 0.0});
  CHECK(extreme[0] == 1.0);
}

TEST_CASE("backpropagation matches central differences") {
  for (std::size_t hidden : {2u, 8u}) {
    for (std::size_t steps : {1u, 5u}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed * 131 + hidden * 7 + steps);
        const auto p = oracle::random_params(rng, 3, hidden, 0.7);
        const auto seq = random_sequence(rng, steps, 3, static_cast<int>(seed % 3));
        const auto analytic = flatten(backward(p, seq, seq.label));
        const auto numeric = oracle::finite_difference_gradient(p, seq.steps, label_index(seq.label));
        REQUIRE(analytic.size() == numeric.size());
        for (std::size_t i = 0; i < analytic.size(); ++i) {
          CHECK(std::fabs(analytic[i] - numeric[i]) / std::max(1.0, std::fabs(analytic[i])) <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("zero input and zero hidden bias leave the input weights untouched") {
  Rng rng(5);
  auto p = oracle::random_params(rng, 3, 4);
  std::fill(p.b_h.begin(), p.b_h.end(), 0.0);
  FeatureSequence seq;
  seq.steps.assign(4, std::vector<double>(3, 0.0));
  seq.label = EmotionLabel::Neutral;
  for (double g : backward(p, seq, seq.label).w_in.data) CHECK(g == 0.0);
}

TEST_CASE("a single step has no recurrent gradient") {
  Rng rng(6);
  const auto p = oracle::random_params(rng, 3, 4);
  const auto seq = random_sequence(rng, 1, 3, 2);
  for (double g : backward(p, seq, seq.label).w_rec.data) CHECK(g == 0.0);
}

TEST_CASE("argmax and its tie rule") {
  CHECK(argmax_label({0.2, 0.5, 0.3}) == EmotionLabel::Neutral);
  CHECK(argmax_label({1.0 / 3, 1.0 / 3, 1.0 / 3}) == EmotionLabel::Positive);
  CHECK(argmax_label({0.1, 0.45, 0.45}) == EmotionLabel::Neutral);
}

TEST_CASE("separable blobs are learned") {
  Rng rng(7);
  const auto train_set = blobs(rng, 30, 4);
  const auto test_set = blobs(rng, 30, 4);
  TrainConfig cfg;
  cfg.hidden_size = 8;
  cfg.seed = 3;
  const auto result = train(train_set, cfg);
  REQUIRE(result.loss_history.size() == 200);
  CHECK(result.loss_history.back() < result.loss_history.front());
  auto accuracy = [&](const std::vector<FeatureSequence>& data) {
    std::size_t hit = 0;
    for (const auto& s : data) hit += predict(result.params, s) == s.label;
    return static_cast<double>(hit) / static_cast<double>(data.size());
  };
  CHECK(accuracy(train_set) >= 0.95);
  CHECK(accuracy(test_set) >= 0.95);
}

TEST_CASE("zero epochs return the initialization") {
  Rng rng(8);
  const auto data = blobs(rng, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 11;
  const auto result = train(data, cfg);
  CHECK(result.loss_history.empty());
  CHECK(flatten(result.params) == flatten(initialize(2, cfg.hidden_size, derive_seed(11, "rnn.init"))));
}

TEST_CASE("training is reproducible per seed") {
  Rng rng(9);
  const auto data = blobs(rng, 10, 3);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 5;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(flatten(a.params) == flatten(b.params));
  cfg.seed = 6;
  CHECK(train(data, cfg).loss_history != a.loss_history);
}

TEST_CASE("a tiny step lowers the full-batch loss") {
  int decreased = 0;
  const int seeds = 30;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(1000 + seed);
    std::vector<FeatureSequence> data;
    for (int i = 0; i < 12; ++i) data.push_back(random_sequence(rng, 3, 4, static_cast<int>(rng.below(3))));
    TrainConfig cfg;
    cfg.hidden_size = 5;
    cfg.learning_rate = 1e-4;
    cfg.batch_size = data.size();
    cfg.epochs = 2;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto r = train(data, cfg);
    decreased += r.loss_history[1] <= r.loss_history[0];
  }
  CHECK(decreased >= 0.9 * seeds);
}

TEST_CASE("initialization bounds") {
  const auto p = initialize(20, 16, 42);
  const double in_bound = 1.0 / std::sqrt(20.0);
  const double rec_bound = 1.0 / std::sqrt(16.0);
  for (double v : p.w_in.data) CHECK(std::fabs(v) <= in_bound);
  for (double v : p.w_rec.data) CHECK(std::fabs(v) <= rec_bound);
  for (double v : p.w_out.data) CHECK(std::fabs(v) <= rec_bound);
  for (double v : p.b_h) CHECK(v == 0.0);
  for (double v : p.b_out) CHECK(v == 0.0);
}

TEST_CASE("sequences are cut per stride with the last step's label") {
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 11; ++i) rows.push_back({{static_cast<double>(i)}, label_from_index(i / 4 % 3), {}});
  const auto seqs = chunk_sequences(rows, 4);
  REQUIRE(seqs.size() == 2);  // 11 rows: two full chunks, three left over
  CHECK(seqs[0].steps.front()[0] == 0.0);
  CHECK(seqs[1].steps.front()[0] == 4.0);
  CHECK(seqs[1].label == EmotionLabel::Neutral);
  CHECK(kind_of([&] { chunk_sequences(rows, 0); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("shape and input errors") {
  Rng rng(10);
  const auto p = oracle::random_params(rng, 3, 4);
  CHECK(kind_of([&] { forward(p, random_sequence(rng, 2, 5, 0)); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { forward(p, FeatureSequence{}); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { train(std::vector<FeatureSequence>{}, TrainConfig{}); }) == ErrorKind::EmptyDataset);
  auto broken = p;
  broken.b_h.pop_back();
  CHECK(kind_of([&] { broken.validate(); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("parameter JSON round trip") {
  Rng rng(12);
  const auto p = oracle::random_params(rng, 6, 3);
  const auto back = params_from_json(nlohmann::json::parse(to_json(p).dump()));
  CHECK(flatten(back) == flatten(p));
  CHECK(kind_of([] { params_from_json(nlohmann::json::object()); }) == ErrorKind::ParseError);
}
