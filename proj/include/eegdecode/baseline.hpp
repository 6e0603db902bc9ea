#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eegdecode/data.hpp"

namespace eegdecode {

struct Band {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

inline constexpr Band kAlphaBand{8.0, 12.0};
inline constexpr Band kGammaBand{30.0, 80.0};

/// Hann-windowed periodogram power inside [low, high], per Hz: the one-sided
/// sum of 2|X_k|^2 / (n * sum w^2) over in-band bins, divided by the band width.
/// Integrating it over (0, Nyquist) recovers the signal variance.
double band_power(std::span<const double> signal, Band band, double rate_hz);

/// Trials x (2 * channels) matrix of log alpha and log gamma power per channel
/// over the post-stimulus part [0, 800) ms of each trial. Column order:
/// alpha for every channel, then gamma for every channel.
std::vector<std::vector<double>> band_power_features(const EpochSet& es,
                                                     double post_from_ms = 0.0,
                                                     double post_to_ms = 800.0);

struct SvmConfig {
  double c = 1.0;
  std::size_t max_iterations = 20000;
  double tolerance = 1e-6;  // relative objective change
  std::uint64_t seed = 0;
};

struct LinearSvmModel {
  std::size_t n_classes = 0;
  /// Standardization fit on the training set; zero-variance columns are
  /// dropped and listed in `dropped_features`.
  std::vector<std::size_t> kept_features;
  std::vector<std::size_t> dropped_features;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  /// One row per class over the kept features.
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  std::vector<std::size_t> iterations;  // per one-vs-rest problem
  SvmConfig config;
};

/// One-vs-rest linear SVMs. Each minimizes
///   lambda/2 |w|^2 + (1/n) sum_i max(0, 1 - y_i (w . x_i + b)),  lambda = 1 / (C n)
/// by full-batch projected subgradient steps 1 / (lambda t + 1), stopping when
/// the objective's relative change drops below the tolerance. The lowest
/// objective iterate is kept. The seed draws the small initial weights.
LinearSvmModel svm_fit(const std::vector<std::vector<double>>& features,
                       std::span<const int> labels, const SvmConfig& cfg = {});

/// Per-class scores of one feature row.
std::vector<double> svm_scores(const LinearSvmModel& model, std::span<const double> row);

/// Argmax of the scores, ties to the lowest class index.
std::vector<int> svm_predict(const LinearSvmModel& model,
                             const std::vector<std::vector<double>>& features);

}  // namespace eegdecode
