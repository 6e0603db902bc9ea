#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegdecode/autodiff.hpp"
#include "eegdecode/data.hpp"
#include "eegdecode/network.hpp"

namespace eegdecode {

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  double lr_initial = 0.1;
  double lr_reduced = 0.01;
  /// Consecutive validation-accuracy decreases that trigger the one-time drop.
  std::size_t patience_for_drop = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double fine_tune_fraction = 0.2;
  /// Fine-tuning only: keep the convolutional front end (temporal/spatial
  /// kernels and both BN sites) fixed and adapt the BiLSTM and head.
  bool fine_tune_freeze_front_end = false;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_acc;
  std::vector<double> val_acc;
  std::vector<double> lr;
  /// Validation accuracy of the starting parameters, before any update.
  double initial_val_acc = 0.0;
  /// 1-based epoch whose parameters were returned; 0 means the starting ones.
  std::size_t best_epoch = 0;

  std::size_t epochs() const { return lr.size(); }
  /// Equal lengths, accuracies in [0, 1], lr non-increasing with at most two values.
  void validate() const;

  bool operator==(const TrainHistory&) const = default;
};

/// Raised when a loss turns NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t epoch, std::size_t batch, double loss);
  std::size_t epoch;
  std::size_t batch;
};

/// Mean negative log-probability of the labelled class; probs is [n x K] row-major.
double cross_entropy(std::span<const double> probs, std::span<const int> labels,
                     std::size_t n_classes);

/// Same quantity on the graph, from logits through log-sum-exp.
ad::Tensor cross_entropy_loss(const ad::Tensor& logits, std::span<const int> labels);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of every parameter block. Increments state.t.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double lr,
               const TrainConfig& cfg);

/// Learning rate for the epoch after the given validation accuracies.
double lr_schedule(std::span<const double> val_acc, const TrainConfig& cfg);

/// Fraction of positions where predictions equal labels. Throws on empty or
/// mismatched input.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Adam on shuffled mini-batches for cfg.max_epochs epochs, returning the
/// parameters of the best validation epoch (ties to the earliest).
TrainResult train(const ArchConfig& arch, const EpochSet& train_set, const EpochSet& val_set,
                  const TrainConfig& cfg);

/// Same loop starting from `init` with a fixed learning rate; the starting
/// parameters compete as epoch 0 for the best-validation checkpoint.
TrainResult continue_training(const ModelParams& init, const EpochSet& train_set,
                              const EpochSet& val_set, const TrainConfig& cfg, double lr);

struct FineTuneResult {
  ModelParams params;
  TrainHistory history;
  /// Indices into the pool: trials used for updates and for checkpoint selection.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Takes a stratified `fraction` of the pool, holds a quarter of it (at least
/// one trial per class) out for checkpoint selection, and continues training
/// `base` at lr_reduced on the rest. Unselected pool trials are never read.
FineTuneResult fine_tune(const ModelParams& base, const EpochSet& pool, double fraction,
                         const TrainConfig& cfg);

}  // namespace eegdecode
