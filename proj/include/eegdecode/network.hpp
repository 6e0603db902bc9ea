#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eegdecode/autodiff.hpp"
#include "eegdecode/data.hpp"

namespace eegdecode {

/// Shape and regularization knobs of the convolutional-recurrent classifier.
struct ArchConfig {
  std::size_t n_channels = 9;
  std::size_t n_time = 256;
  std::size_t segment_len = 16;
  std::size_t n_temporal_filters = 8;  // F1
  std::size_t depth_multiplier = 2;    // D
  std::size_t lstm_hidden = 32;        // H
  std::size_t n_classes = 3;
  double dropout_rate = 0.25;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  void validate() const;
  std::size_t n_segments() const { return n_time / segment_len; }
  /// Width of the per-segment feature vector fed to the LSTM (F1 * D).
  std::size_t feature_width() const { return n_temporal_filters * depth_multiplier; }

  bool operator==(const ArchConfig&) const = default;
};

struct Array {
  ad::Shape shape;
  std::vector<double> data;

  bool operator==(const Array&) const = default;
};

struct BatchNormParams {
  Array gamma, beta;
  Array running_mean, running_var;

  bool operator==(const BatchNormParams&) const = default;
};

/// One LSTM direction. Each W_* is [H, H + K] acting on [h_{t-1}, x_t].
struct LstmParams {
  Array w_f, w_i, w_o, w_c;
  Array b_f, b_i, b_o, b_c;

  bool operator==(const LstmParams&) const = default;
};

struct ModelParams {
  ArchConfig arch;
  Array temporal_w;  // [F1, 1, n_t]
  Array temporal_b;  // [F1]
  BatchNormParams bn_temporal;
  Array spatial_w;  // [F1, D, n_c]
  BatchNormParams bn_spatial;
  LstmParams lstm_fwd, lstm_bwd;
  Array out_w;  // [n_classes, 2H]
  Array out_b;  // [n_classes]

  struct Entry {
    std::string name;
    Array* array;
  };
  struct ConstEntry {
    std::string name;
    const Array* array;
  };
  /// Arrays updated by the optimizer, in a fixed order.
  std::vector<Entry> trainable();
  std::vector<ConstEntry> trainable() const;
  /// Every array including BN running statistics, in checkpoint order.
  std::vector<ConstEntry> all_arrays() const;
  std::vector<Entry> all_arrays();

  bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, forget-gate biases 1, other biases 0, BN at identity.
ModelParams init_params(const ArchConfig& cfg, std::uint64_t seed);

/// Number of trainable scalars.
std::size_t param_count(const ArchConfig& cfg);

/// Trainable scalars of the same front end with the BiLSTM replaced by a
/// temporal convolution spanning all segments, producing 2H features.
std::size_t param_count_conv_head(const ArchConfig& cfg);

/// Splits X [n_c x n_T] (row-major) into n_T / n_t consecutive [n_c x n_t] blocks.
std::vector<std::vector<double>> segment(std::span<const double> x, std::size_t n_channels,
                                         std::size_t n_time, std::size_t segment_len);

enum class Mode { Train, Infer };

struct BatchNormTensors {
  ad::Tensor gamma, beta;
};

struct LstmTensors {
  ad::Tensor weights_t;  // [H + K, 4H], gate blocks f, i, o, c
  ad::Tensor bias;       // [1, 4H]
  std::size_t hidden = 0;
};

/// Parameters placed on a graph; variables when trainable, constants otherwise.
struct ParamTensors {
  ad::Tensor temporal_w, temporal_b;
  BatchNormTensors bn_temporal;
  ad::Tensor spatial_w;
  BatchNormTensors bn_spatial;
  LstmTensors lstm_fwd, lstm_bwd;
  ad::Tensor out_w, out_b;
  /// Leaves in ModelParams::trainable() order.
  std::vector<ad::Tensor> leaves;
};

ParamTensors bind_params(ad::Graph& g, const ModelParams& p, bool trainable);

LstmTensors bind_lstm(ad::Graph& g, const LstmParams& p, bool trainable,
                      std::vector<ad::Tensor>* leaves = nullptr);

struct LstmState {
  ad::Tensor h;  // [B, H]
  ad::Tensor c;  // [B, H]
};

/// Layer 1. x: [B, C, T] -> [B*C*S, F1], rows ordered (b, c, s).
ad::Tensor temporal_conv(const ad::Tensor& x, const ad::Tensor& w, const ad::Tensor& b,
                         std::size_t segment_len);

/// Layer 2. y: [B, C, S, F1], w: [F1, D, C] -> [B*S, F1*D].
ad::Tensor spatial_depthwise_conv(const ad::Tensor& y, const ad::Tensor& w);

/// Training mode uses batch statistics (reported through `stats`); inference
/// uses the running statistics stored in `p`.
ad::Tensor batch_norm(const ad::Tensor& x, const BatchNormTensors& t, const BatchNormParams& p,
                      Mode mode, double eps, ad::BatchStats* stats = nullptr);

/// One step: gates from W[h_{t-1}, x_t] + b, then c_t and h_t.
LstmState lstm_cell(const ad::Tensor& x, const LstmState& state, const LstmTensors& w);

/// Forward direction over steps 0..T-1 and backward direction over T-1..0,
/// both from zero state; returns [h_fwd(T-1), h_bwd(0)] as [B, 2H].
ad::Tensor bilstm(std::span<const ad::Tensor> steps, const LstmTensors& fwd,
                  const LstmTensors& bwd);

struct ForwardOptions {
  Mode mode = Mode::Infer;
  std::uint64_t dropout_seed = 0;
  /// Train mode only; disabling it is how gradient checks freeze dropout
  /// without touching BN behaviour.
  bool dropout = true;
};

struct ForwardResult {
  ad::Tensor logits;  // [B, n_classes]
  ad::Tensor probs;   // [B, n_classes]
  ad::BatchStats bn_temporal_stats;
  ad::BatchStats bn_spatial_stats;
};

/// x: [B, n_c, n_T]. Pipeline: segment, temporal conv, BN, depthwise spatial
/// conv, ELU, BN, dropout, per-segment flatten, BiLSTM, dropout, dense, softmax.
ForwardResult forward(const ad::Tensor& x, const ParamTensors& t, const ModelParams& p,
                      const ForwardOptions& options);

/// Exponential moving average of the BN running statistics toward the batch
/// statistics of a training-mode forward pass.
void update_running_stats(ModelParams& p, const ForwardResult& r);

/// Inference-mode class probabilities for every trial, [n_trials * n_classes].
std::vector<double> predict_proba(const ModelParams& p, const EpochSet& es,
                                  std::size_t batch_size = 256);

/// Argmax of predict_proba, ties to the lowest class index.
std::vector<int> predict(const ModelParams& p, const EpochSet& es);

/// Copies trials into a [B, C, T] constant.
ad::Tensor batch_input(ad::Graph& g, const EpochSet& es, std::span<const std::size_t> trials);

}  // namespace eegdecode
