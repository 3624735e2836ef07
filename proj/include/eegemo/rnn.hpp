#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "eegemo/features.hpp"
#include "eegemo/signal_io.hpp"

namespace eegemo::rnn {

/// Dense row-major matrix; only what the recurrent layer needs.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Single tanh recurrent layer followed by a linear readout over the three
/// emotion classes:
///   h_t = tanh(w_in x_t + w_rec h_{t-1} + b_h),  h_0 = 0
///   logits = w_out h_T + b_out
struct RnnParameters {
  Matrix w_in;   // hidden x input
  Matrix w_rec;  // hidden x hidden
  std::vector<double> b_h;
  Matrix w_out;  // classes x hidden
  std::vector<double> b_out;

  static RnnParameters zeros(std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size() const noexcept { return w_in.cols; }
  std::size_t hidden_size() const noexcept { return w_in.rows; }

  /// Throws DimensionMismatch on inconsistent shapes, InvalidConfig on non-finite entries.
  void validate() const;

  /// Visits every coefficient in a fixed order (w_in, w_rec, b_h, w_out, b_out).
  template <typename F>
  void for_each(F&& f) {
    for (double& v : w_in.data) f(v);
    for (double& v : w_rec.data) f(v);
    for (double& v : b_h) f(v);
    for (double& v : w_out.data) f(v);
    for (double& v : b_out) f(v);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (double v : w_in.data) f(v);
    for (double v : w_rec.data) f(v);
    for (double v : b_h) f(v);
    for (double v : w_out.data) f(v);
    for (double v : b_out) f(v);
  }
};

struct FeatureSequence {
  std::vector<std::vector<double>> steps;
  EmotionLabel label = EmotionLabel::Positive;
};

/// Consecutive vectors (assumed to come from one recording, in time order)
/// cut into sequences of `length` steps with stride `length`; a trailing
/// partial chunk is dropped. Each sequence takes the label of its last step.
std::vector<FeatureSequence> chunk_sequences(std::span<const FeatureVector> ordered,
                                             std::size_t length);

using ClassVector = std::array<double, kClassCount>;

struct ForwardPass {
  std::vector<std::vector<double>> hidden;  // h_1 .. h_T
  ClassVector logits{};
  ClassVector probabilities{};
};

/// Max-shifted, so it is finite for any finite logits.
ClassVector softmax(const ClassVector& logits);

ForwardPass forward(const RnnParameters& params, const FeatureSequence& seq);

inline constexpr double kProbabilityFloor = 1e-12;

/// Cross-entropy -log(max(p_label, 1e-12)).
double loss(const ClassVector& probabilities, EmotionLabel label);

/// Exact gradient of loss(forward(params, seq), label) by backpropagation
/// through time. Same shapes as `params`.
RnnParameters backward(const RnnParameters& params, const FeatureSequence& seq,
                       EmotionLabel label);

/// Argmax with ties to the smaller class index.
EmotionLabel argmax_label(const ClassVector& probabilities);
EmotionLabel predict(const RnnParameters& params, const FeatureSequence& seq);

struct TrainConfig {
  std::size_t hidden_size = 16;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
  std::size_t sequence_length = 8;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
RnnParameters initialize(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed);

struct TrainResult {
  RnnParameters params;
  std::vector<double> loss_history;  // mean per-sample loss for each epoch
};

/// Mini-batch gradient descent. Batches are drawn from a per-epoch shuffle,
/// the batch-mean gradient is clipped to global norm `grad_clip`, and the
/// reduction order is fixed so a seed reproduces the run exactly.
TrainResult train(std::span<const FeatureSequence> dataset, const TrainConfig& cfg);

nlohmann::json to_json(const RnnParameters& params);
RnnParameters params_from_json(const nlohmann::json& doc);

}  // namespace eegemo::rnn
