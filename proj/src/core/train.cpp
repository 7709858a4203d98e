#include "cbq/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cbq/error.hpp"
#include "cbq/rng.hpp"

namespace cbq::train {

std::vector<double> QuantizedWeights::reconstruct() const {
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = centroids[labels[i]];
  return out;
}

std::vector<double> ToyModel::hidden_weights() const {
  return hidden_q ? hidden_q->reconstruct() : hidden.weights;
}

std::vector<double> ToyModel::output_weights() const {
  return output_q ? output_q->reconstruct() : output.weights;
}

void TrainConfig::validate() const {
  if (!(base_learning_rate > 0.0)) throw Error(ErrorCode::BadConfig, "learning rate must be > 0");
  if (!(quantized_lr_multiplier >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "learning-rate multiplier must be >= 0");
  }
  if (batch_size == 0 || samples == 0 || input_dim == 0 || hidden_dim == 0 || output_dim == 0) {
    throw Error(ErrorCode::BadConfig, "sizes must be positive");
  }
  if (!(noise >= 0.0)) throw Error(ErrorCode::BadConfig, "noise must be >= 0");
}

namespace {

void check_shapes(const ToyModel& m, const Batch& b) {
  if (m.hidden.outputs != m.output.inputs) {
    throw Error(ErrorCode::ShapeMismatch, "hidden width differs between layers");
  }
  if (b.inputs.size() != b.count * m.hidden.inputs) {
    throw Error(ErrorCode::ShapeMismatch, "batch inputs do not match model input width");
  }
  if (!b.targets.empty() && b.targets.size() != b.count * m.output.outputs) {
    throw Error(ErrorCode::ShapeMismatch, "batch targets do not match model output width");
  }
}

Batch slice(const Batch& all, std::span<const std::size_t> rows, std::size_t in, std::size_t out) {
  Batch b;
  b.count = rows.size();
  b.inputs.reserve(rows.size() * in);
  b.targets.reserve(rows.size() * out);
  for (std::size_t r : rows) {
    b.inputs.insert(b.inputs.end(), all.inputs.begin() + r * in, all.inputs.begin() + (r + 1) * in);
    b.targets.insert(b.targets.end(), all.targets.begin() + r * out,
                     all.targets.begin() + (r + 1) * out);
  }
  return b;
}

void apply(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void run_epoch(ToyModel& model, const Batch& data, const TrainConfig& cfg, Rng& order_rng) {
  std::vector<std::size_t> order(data.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    const Batch b = slice(data, std::span(order).subspan(start, stop - start), cfg.input_dim,
                          cfg.output_dim);
    train_step(model, b, cfg);
  }
}

QuantizedWeights quantize_weights(const std::vector<double>& w, const QuantConfig& cfg,
                                  std::string_view name) {
  const std::vector<float> values(w.begin(), w.end());
  QuantizedVector q = quantize(values, cfg, StreamKey{name, 0});
  QuantizedWeights out;
  out.labels = std::move(q.indices);
  out.centroids.assign(q.codebook.centroids.begin(), q.codebook.centroids.end());
  return out;
}

}  // namespace

ForwardCache forward(const ToyModel& model, const Batch& batch) {
  check_shapes(model, batch);
  const std::size_t in = model.hidden.inputs;
  const std::size_t hid = model.hidden.outputs;
  const std::size_t out = model.output.outputs;
  const auto w1 = model.hidden_weights();
  const auto w2 = model.output_weights();

  ForwardCache cache;
  cache.hidden.resize(batch.count * hid);
  cache.predictions.resize(batch.count * out);
  for (std::size_t s = 0; s < batch.count; ++s) {
    const double* x = batch.inputs.data() + s * in;
    double* h = cache.hidden.data() + s * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      double z = model.hidden.bias[j];
      for (std::size_t i = 0; i < in; ++i) z += w1[j * in + i] * x[i];
      h[j] = std::tanh(z);
    }
    double* y = cache.predictions.data() + s * out;
    for (std::size_t o = 0; o < out; ++o) {
      double z = model.output.bias[o];
      for (std::size_t j = 0; j < hid; ++j) z += w2[o * hid + j] * h[j];
      y[o] = z;
    }
  }
  return cache;
}

double loss(const ToyModel& model, const Batch& batch) {
  const auto cache = forward(model, batch);
  double total = 0.0;
  for (std::size_t i = 0; i < cache.predictions.size(); ++i) {
    const double e = cache.predictions[i] - batch.targets[i];
    total += e * e;
  }
  return total / static_cast<double>(cache.predictions.size());
}

Gradients backward(const ToyModel& model, const Batch& batch, const ForwardCache& cache) {
  check_shapes(model, batch);
  const std::size_t in = model.hidden.inputs;
  const std::size_t hid = model.hidden.outputs;
  const std::size_t out = model.output.outputs;
  const auto w2 = model.output_weights();

  Gradients g;
  g.hidden_weights.assign(hid * in, 0.0);
  g.hidden_bias.assign(hid, 0.0);
  g.output_weights.assign(out * hid, 0.0);
  g.output_bias.assign(out, 0.0);

  const double scale = 2.0 / static_cast<double>(batch.count * out);
  std::vector<double> d_out(out);
  std::vector<double> d_hidden(hid);
  for (std::size_t s = 0; s < batch.count; ++s) {
    const double* x = batch.inputs.data() + s * in;
    const double* h = cache.hidden.data() + s * hid;
    for (std::size_t o = 0; o < out; ++o) {
      d_out[o] = scale * (cache.predictions[s * out + o] - batch.targets[s * out + o]);
      g.output_bias[o] += d_out[o];
      for (std::size_t j = 0; j < hid; ++j) g.output_weights[o * hid + j] += d_out[o] * h[j];
    }
    for (std::size_t j = 0; j < hid; ++j) {
      double back = 0.0;
      for (std::size_t o = 0; o < out; ++o) back += w2[o * hid + j] * d_out[o];
      d_hidden[j] = back * (1.0 - h[j] * h[j]);
      g.hidden_bias[j] += d_hidden[j];
      for (std::size_t i = 0; i < in; ++i) g.hidden_weights[j * in + i] += d_hidden[j] * x[i];
    }
  }

  if (model.hidden_q) {
    g.hidden_centroids = centroid_gradients(g.hidden_weights, model.hidden_q->labels,
                                            model.hidden_q->centroids.size());
  }
  if (model.output_q) {
    g.output_centroids = centroid_gradients(g.output_weights, model.output_q->labels,
                                            model.output_q->centroids.size());
  }
  return g;
}

std::vector<double> centroid_gradients(std::span<const double> weight_grads,
                                       std::span<const Label> labels, std::size_t n_clusters) {
  if (weight_grads.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "gradient and label vectors differ in length");
  }
  std::vector<double> sums(n_clusters, 0.0);
  std::vector<std::size_t> counts(n_clusters, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_clusters) throw Error(ErrorCode::CorruptIndex, "label exceeds cluster count");
    sums[labels[i]] += weight_grads[i];
    ++counts[labels[i]];
  }
  for (std::size_t j = 0; j < n_clusters; ++j) {
    sums[j] = counts[j] > 0 ? sums[j] / static_cast<double>(counts[j]) : 0.0;
  }
  return sums;
}

double train_step(ToyModel& model, const Batch& batch, const TrainConfig& cfg) {
  const auto cache = forward(model, batch);
  double total = 0.0;
  for (std::size_t i = 0; i < cache.predictions.size(); ++i) {
    const double e = cache.predictions[i] - batch.targets[i];
    total += e * e;
  }
  const Gradients g = backward(model, batch, cache);

  const double lr = cfg.base_learning_rate;
  const double lr_q = cfg.base_learning_rate * cfg.quantized_lr_multiplier;
  apply(model.hidden.bias, g.hidden_bias, lr);
  apply(model.output.bias, g.output_bias, lr);
  if (model.hidden_q) {
    apply(model.hidden_q->centroids, g.hidden_centroids, lr_q);
  } else {
    apply(model.hidden.weights, g.hidden_weights, lr);
  }
  if (model.output_q) {
    apply(model.output_q->centroids, g.output_centroids, lr_q);
  } else {
    apply(model.output.weights, g.output_weights, lr);
  }
  return total / static_cast<double>(cache.predictions.size());
}

void quantize_model(ToyModel& model, const QuantConfig& cfg, bool include_output_layer) {
  model.hidden_q = quantize_weights(model.hidden.weights, cfg, "hidden");
  if (include_output_layer) model.output_q = quantize_weights(model.output.weights, cfg, "output");
}

Batch make_regression_task(const TrainConfig& cfg, std::uint64_t task_seed) {
  cfg.validate();
  Rng rng(derive_stream_seed(task_seed, "task", 0));
  const std::size_t teacher = std::max<std::size_t>(2, cfg.hidden_dim / 2);
  std::vector<double> a(cfg.output_dim * teacher);
  std::vector<double> b(teacher * cfg.input_dim);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal() / std::sqrt(static_cast<double>(cfg.input_dim));

  Batch data;
  data.count = cfg.samples;
  data.inputs.resize(cfg.samples * cfg.input_dim);
  data.targets.resize(cfg.samples * cfg.output_dim);
  for (auto& x : data.inputs) x = rng.normal();
  std::vector<double> h(teacher);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    const double* x = data.inputs.data() + s * cfg.input_dim;
    for (std::size_t t = 0; t < teacher; ++t) {
      double z = 0.0;
      for (std::size_t i = 0; i < cfg.input_dim; ++i) z += b[t * cfg.input_dim + i] * x[i];
      h[t] = std::tanh(z);
    }
    for (std::size_t o = 0; o < cfg.output_dim; ++o) {
      double y = 0.0;
      for (std::size_t t = 0; t < teacher; ++t) y += a[o * teacher + t] * h[t];
      data.targets[s * cfg.output_dim + o] = y + cfg.noise * rng.normal();
    }
  }
  return data;
}

ToyModel init_model(const TrainConfig& cfg, std::uint64_t task_seed) {
  cfg.validate();
  Rng rng(derive_stream_seed(task_seed, "init", 0));
  ToyModel m(cfg.input_dim, cfg.hidden_dim, cfg.output_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  for (auto& w : m.hidden.weights) w = s1 * rng.normal();
  for (auto& w : m.output.weights) w = s2 * rng.normal();
  return m;
}

std::string format_record(const CurveRecord& r) {
  char loss_text[64];
  std::snprintf(loss_text, sizeof(loss_text), "%.9g", r.loss);
  return std::to_string(r.epoch) + "," + std::string(scheme_name(r.scheme)) + "," +
         std::to_string(r.bits) + "," + std::to_string(r.seed) + "," + loss_text;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const QuantConfig& qcfg,
                                 std::uint64_t task_seed) {
  cfg.validate();
  qcfg.validate();
  const Batch data = make_regression_task(cfg, task_seed);
  ToyModel base = init_model(cfg, task_seed);

  Rng pretrain_rng(derive_stream_seed(cfg.data_seed, "pretrain", task_seed));
  for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) run_epoch(base, data, cfg, pretrain_rng);

  ExperimentResult result;
  result.full_precision_loss = loss(base, data);

  for (Scheme scheme : {Scheme::Linear, Scheme::KMeans}) {
    QuantConfig arm_cfg = qcfg;
    arm_cfg.scheme = scheme;
    arm_cfg.group_count = 1;

    ArmResult arm;
    arm.scheme = scheme;
    arm.bits = arm_cfg.bits;
    ToyModel model = base;
    quantize_model(model, arm_cfg, cfg.quantize_output_layer);
    auto labels_of = [&] {
      std::vector<IndexVector> labels{model.hidden_q->labels};
      if (model.output_q) labels.push_back(model.output_q->labels);
      return labels;
    };
    arm.labels_before = labels_of();

    arm.quantized_loss = loss(model, data);
    arm.curve.push_back({0, scheme, arm.bits, task_seed, arm.quantized_loss});
    // Both arms see the same minibatch order.
    Rng order_rng(derive_stream_seed(cfg.data_seed, "finetune", task_seed));
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
      run_epoch(model, data, cfg, order_rng);
      arm.curve.push_back({e, scheme, arm.bits, task_seed, loss(model, data)});
    }
    arm.final_loss = arm.curve.back().loss;
    arm.labels_after = labels_of();
    result.arms.push_back(std::move(arm));
  }
  return result;
}

}  // namespace cbq::train
