#include "eegemo/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegemo/error.hpp"
#include "eegemo/random.hpp"

namespace eegemo::rnn {

RnnParameters RnnParameters::zeros(std::size_t input_size, std::size_t hidden_size) {
  RnnParameters p;
  p.w_in = Matrix(hidden_size, input_size);
  p.w_rec = Matrix(hidden_size, hidden_size);
  p.b_h.assign(hidden_size, 0.0);
  p.w_out = Matrix(kClassCount, hidden_size);
  p.b_out.assign(kClassCount, 0.0);
  return p;
}

void RnnParameters::validate() const {
  const std::size_t h = hidden_size();
  if (h == 0 || input_size() == 0 || w_rec.rows != h || w_rec.cols != h || b_h.size() != h ||
      w_out.rows != kClassCount || w_out.cols != h || b_out.size() != kClassCount ||
      w_in.data.size() != w_in.rows * w_in.cols || w_rec.data.size() != h * h ||
      w_out.data.size() != kClassCount * h) {
    throw Error(ErrorKind::DimensionMismatch, "RNN parameter shapes are inconsistent");
  }
  bool finite = true;
  for_each([&](double v) { finite = finite && std::isfinite(v); });
  if (!finite) throw Error(ErrorKind::InvalidConfig, "RNN parameters contain non-finite values");
}

std::vector<FeatureSequence> chunk_sequences(std::span<const FeatureVector> ordered,
                                             std::size_t length) {
  if (length == 0) throw Error(ErrorKind::InvalidConfig, "sequence length must be positive");
  std::vector<FeatureSequence> out;
  for (std::size_t start = 0; start + length <= ordered.size(); start += length) {
    FeatureSequence seq;
    for (std::size_t t = 0; t < length; ++t) seq.steps.push_back(ordered[start + t].values);
    seq.label = ordered[start + length - 1].label;
    out.push_back(std::move(seq));
  }
  return out;
}

ClassVector softmax(const ClassVector& logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  ClassVector p{};
  double sum = 0.0;
  for (int c = 0; c < kClassCount; ++c) {
    p[c] = std::exp(logits[c] - shift);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace {

void check_sequence(const RnnParameters& params, const FeatureSequence& seq) {
  if (seq.steps.empty()) throw Error(ErrorKind::DimensionMismatch, "empty sequence");
  for (const auto& x : seq.steps) {
    if (x.size() != params.input_size()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "sequence step has " + std::to_string(x.size()) + " features, network expects " +
                      std::to_string(params.input_size()));
    }
  }
}

// dst += alpha * src, coefficient by coefficient.
void add_scaled(RnnParameters& dst, const RnnParameters& src, double alpha) {
  const auto axpy = [alpha](std::vector<double>& d, const std::vector<double>& s) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * s[i];
  };
  axpy(dst.w_in.data, src.w_in.data);
  axpy(dst.w_rec.data, src.w_rec.data);
  axpy(dst.b_h, src.b_h);
  axpy(dst.w_out.data, src.w_out.data);
  axpy(dst.b_out, src.b_out);
}

}  // namespace

ForwardPass forward(const RnnParameters& params, const FeatureSequence& seq) {
  check_sequence(params, seq);
  const std::size_t hs = params.hidden_size();
  const std::size_t in = params.input_size();
  ForwardPass out;
  std::vector<double> prev(hs, 0.0);
  for (const auto& x : seq.steps) {
    std::vector<double> h(hs);
    for (std::size_t i = 0; i < hs; ++i) {
      double z = params.b_h[i];
      for (std::size_t j = 0; j < in; ++j) z += params.w_in(i, j) * x[j];
      for (std::size_t j = 0; j < hs; ++j) z += params.w_rec(i, j) * prev[j];
      h[i] = std::tanh(z);
    }
    out.hidden.push_back(h);
    prev = std::move(h);
  }
  for (int c = 0; c < kClassCount; ++c) {
    double z = params.b_out[c];
    for (std::size_t j = 0; j < hs; ++j) z += params.w_out(c, j) * prev[j];
    out.logits[c] = z;
  }
  out.probabilities = softmax(out.logits);
  return out;
}

double loss(const ClassVector& probabilities, EmotionLabel label) {
  return -std::log(std::max(probabilities[label_index(label)], kProbabilityFloor));
}

RnnParameters backward(const RnnParameters& params, const FeatureSequence& seq,
                       EmotionLabel label) {
  const ForwardPass fp = forward(params, seq);
  const std::size_t hs = params.hidden_size();
  const std::size_t in = params.input_size();
  RnnParameters grad = RnnParameters::zeros(in, hs);

  const int y = label_index(label);
  // Below the floor the clamped loss is flat.
  if (fp.probabilities[y] < kProbabilityFloor) return grad;

  ClassVector dlogits = fp.probabilities;
  dlogits[y] -= 1.0;
  const auto& h_last = fp.hidden.back();
  std::vector<double> dh(hs, 0.0);
  for (int c = 0; c < kClassCount; ++c) {
    grad.b_out[c] = dlogits[c];
    for (std::size_t j = 0; j < hs; ++j) {
      grad.w_out(c, j) = dlogits[c] * h_last[j];
      dh[j] += params.w_out(c, j) * dlogits[c];
    }
  }

  const std::vector<double> zero(hs, 0.0);
  std::vector<double> dz(hs);
  for (std::size_t t = seq.steps.size(); t-- > 0;) {
    const auto& h = fp.hidden[t];
    const auto& h_prev = t > 0 ? fp.hidden[t - 1] : zero;
    const auto& x = seq.steps[t];
    for (std::size_t i = 0; i < hs; ++i) dz[i] = dh[i] * (1.0 - h[i] * h[i]);
    for (std::size_t i = 0; i < hs; ++i) {
      grad.b_h[i] += dz[i];
      for (std::size_t j = 0; j < in; ++j) grad.w_in(i, j) += dz[i] * x[j];
      for (std::size_t j = 0; j < hs; ++j) grad.w_rec(i, j) += dz[i] * h_prev[j];
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t i = 0; i < hs; ++i) {
      for (std::size_t j = 0; j < hs; ++j) dh[j] += params.w_rec(i, j) * dz[i];
    }
  }
  return grad;
}

EmotionLabel argmax_label(const ClassVector& probabilities) {
  int best = 0;
  for (int c = 1; c < kClassCount; ++c) {
    if (probabilities[c] > probabilities[best]) best = c;
  }
  return label_from_index(best);
}

EmotionLabel predict(const RnnParameters& params, const FeatureSequence& seq) {
  return argmax_label(forward(params, seq).probabilities);
}

RnnParameters initialize(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed) {
  if (input_size == 0 || hidden_size == 0) {
    throw Error(ErrorKind::InvalidConfig, "RNN sizes must be positive");
  }
  RnnParameters p = RnnParameters::zeros(input_size, hidden_size);
  Rng rng(seed);
  const auto fill = [&](Matrix& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.data) v = rng.uniform(-bound, bound);
  };
  fill(p.w_in, input_size);
  fill(p.w_rec, hidden_size);
  fill(p.w_out, hidden_size);
  return p;
}

TrainResult train(std::span<const FeatureSequence> dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "no training sequences");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0 || !(cfg.grad_clip > 0.0) ||
      cfg.hidden_size == 0) {
    throw Error(ErrorKind::InvalidConfig, "learning rate, batch size, clip and hidden size must be positive");
  }
  const std::size_t input_size = dataset.front().steps.empty() ? 0 : dataset.front().steps.front().size();
  TrainResult result;
  result.params = initialize(input_size, cfg.hidden_size, derive_seed(cfg.seed, "rnn.init"));
  for (const auto& seq : dataset) check_sequence(result.params, seq);

  Rng order_rng(derive_seed(cfg.seed, "rnn.batches"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      RnnParameters acc = RnnParameters::zeros(input_size, cfg.hidden_size);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& seq = dataset[order[b]];
        epoch_loss += loss(forward(result.params, seq).probabilities, seq.label);
        add_scaled(acc, backward(result.params, seq, seq.label), 1.0);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      double norm_sq = 0.0;
      acc.for_each([&](double& v) {
        v *= inv;
        norm_sq += v * v;
      });
      const double norm = std::sqrt(norm_sq);
      const double clip = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
      add_scaled(result.params, acc, -clip * cfg.learning_rate);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return result;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) {
    throw Error(ErrorKind::ShapeMismatch, "matrix data does not match its shape");
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const RnnParameters& params) {
  return {{"input_size", params.input_size()},
          {"hidden_size", params.hidden_size()},
          {"w_in", matrix_json(params.w_in)},
          {"w_rec", matrix_json(params.w_rec)},
          {"b_h", params.b_h},
          {"w_out", matrix_json(params.w_out)},
          {"b_out", params.b_out}};
}

RnnParameters params_from_json(const nlohmann::json& doc) {
  RnnParameters p;
  try {
    p.w_in = matrix_from(doc.at("w_in"));
    p.w_rec = matrix_from(doc.at("w_rec"));
    p.b_h = doc.at("b_h").get<std::vector<double>>();
    p.w_out = matrix_from(doc.at("w_out"));
    p.b_out = doc.at("b_out").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed RNN checkpoint: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace eegemo::rnn
