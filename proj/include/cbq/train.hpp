#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbq/quant.hpp"

namespace cbq::train {

// Row-major (out x in) weights plus bias.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : inputs(in), outputs(out), weights(in * out, 0.0), bias(out, 0.0) {}
};

// A weight matrix replaced by a frozen label vector and trainable centroids.
struct QuantizedWeights {
  IndexVector labels;
  std::vector<double> centroids;

  std::vector<double> reconstruct() const;
};

// in -> tanh(W1 x + b1) -> W2 h + b2
struct ToyModel {
  DenseLayer hidden;
  DenseLayer output;
  std::optional<QuantizedWeights> hidden_q;
  std::optional<QuantizedWeights> output_q;

  ToyModel() = default;
  ToyModel(std::size_t in, std::size_t hidden_units, std::size_t out)
      : hidden(in, hidden_units), output(hidden_units, out) {}

  // Weights actually used by the forward pass.
  std::vector<double> hidden_weights() const;
  std::vector<double> output_weights() const;
};

struct Batch {
  std::size_t count = 0;
  std::vector<double> inputs;   // count x in
  std::vector<double> targets;  // count x out
};

struct ForwardCache {
  std::vector<double> hidden;       // count x hidden, post-tanh
  std::vector<double> predictions;  // count x out
};

struct Gradients {
  std::vector<double> hidden_weights;
  std::vector<double> hidden_bias;
  std::vector<double> output_weights;
  std::vector<double> output_bias;
  std::vector<double> hidden_centroids;  // empty unless hidden layer is quantized
  std::vector<double> output_centroids;
};

struct TrainConfig {
  double base_learning_rate = 0.05;
  double quantized_lr_multiplier = 10.0;
  std::size_t epochs = 200;           // fine-tuning epochs after quantization
  std::size_t pretrain_epochs = 300;  // full-precision epochs before quantization
  std::size_t batch_size = 32;
  std::uint64_t data_seed = 0;        // minibatch order
  std::size_t samples = 512;
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 2;
  double noise = 0.01;
  bool quantize_output_layer = false;

  // Throws Error{BadConfig}.
  void validate() const;
};

// Throws Error{ShapeMismatch}.
ForwardCache forward(const ToyModel& model, const Batch& batch);

// Mean over samples and outputs of the squared error.
double loss(const ToyModel& model, const Batch& batch);

Gradients backward(const ToyModel& model, const Batch& batch, const ForwardCache& cache);

// Mean of the member parameters' gradients per cluster, 0 for empty clusters.
std::vector<double> centroid_gradients(std::span<const double> weight_grads,
                                       std::span<const Label> labels, std::size_t n_clusters);

// Plain gradient descent. Full-precision parameters move by base_learning_rate,
// centroids by base_learning_rate * quantized_lr_multiplier. Returns the loss
// before the update.
double train_step(ToyModel& model, const Batch& batch, const TrainConfig& cfg);

// Replaces the hidden weights (and the output weights if requested) by a
// per-tensor quantization under cfg.
void quantize_model(ToyModel& model, const QuantConfig& cfg, bool include_output_layer);

// Synthetic regression task y = A tanh(B x) + noise.
Batch make_regression_task(const TrainConfig& cfg, std::uint64_t task_seed);

ToyModel init_model(const TrainConfig& cfg, std::uint64_t task_seed);

struct CurveRecord {
  std::size_t epoch = 0;
  Scheme scheme = Scheme::KMeans;
  unsigned bits = 0;
  std::uint64_t seed = 0;
  double loss = 0.0;
};

// "epoch,scheme,bits,seed,loss" with the loss at 9 significant digits.
std::string format_record(const CurveRecord& r);

struct ArmResult {
  Scheme scheme = Scheme::KMeans;
  unsigned bits = 0;
  double quantized_loss = 0.0;  // right after quantization, before fine-tuning
  double final_loss = 0.0;
  std::vector<CurveRecord> curve;  // epoch 0 = quantized_loss
  std::vector<IndexVector> labels_before;
  std::vector<IndexVector> labels_after;
};

struct ExperimentResult {
  double full_precision_loss = 0.0;
  std::vector<ArmResult> arms;  // linear then kmeans
};

// Pretrains one full-precision model, then quantizes and fine-tunes a copy of
// it under each scheme with the same bits/seed/iterations taken from qcfg.
ExperimentResult run_experiment(const TrainConfig& cfg, const QuantConfig& qcfg,
                                std::uint64_t task_seed);

}  // namespace cbq::train
