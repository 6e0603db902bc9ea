#include "eegdecode/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "eegdecode/rng.hpp"
#include "eegdecode/spectral.hpp"

namespace eegdecode {

double band_power(std::span<const double> signal, Band band, double rate_hz) {
  const double nyquist = rate_hz / 2.0;
  if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz <= nyquist)) {
    throw std::invalid_argument("band [" + std::to_string(band.low_hz) + ", " +
                                std::to_string(band.high_hz) + "] Hz is not inside (0, " +
                                std::to_string(nyquist) + "]");
  }
  const std::size_t n = signal.size();
  if (n < 2) throw std::invalid_argument("band_power: need at least 2 samples");
  std::vector<double> windowed(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    windowed[i] = w * signal[i];
    energy += w * w;
  }
  const auto spectrum = spectral::rfft(windowed);
  double power = 0.0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    const double f = static_cast<double>(k) * rate_hz / static_cast<double>(n);
    if (f < band.low_hz || f > band.high_hz) continue;
    const bool nyquist_bin = n % 2 == 0 && k == n / 2;
    power += (nyquist_bin ? 1.0 : 2.0) * std::norm(spectrum[k]);
  }
  return power / (static_cast<double>(n) * energy) / (band.high_hz - band.low_hz);
}

std::vector<std::vector<double>> band_power_features(const EpochSet& es, double post_from_ms,
                                                     double post_to_ms) {
  const double rate = es.sample_rate_hz;
  const auto first = std::lround((post_from_ms - es.window_start_ms) * rate / 1000.0);
  const auto last = std::lround((post_to_ms - es.window_start_ms) * rate / 1000.0);
  if (first < 0 || last > static_cast<long>(es.n_time) || last - first < 2) {
    throw std::invalid_argument("post-stimulus window lies outside the epoch");
  }
  const std::size_t C = es.n_channels();
  std::vector<std::vector<double>> out(es.n_trials(), std::vector<double>(2 * C));
  for (std::size_t i = 0; i < es.n_trials(); ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::span<const double> x = es.trial(i).subspan(c * es.n_time + static_cast<std::size_t>(first),
                                                           static_cast<std::size_t>(last - first));
      out[i][c] = std::log(std::max(band_power(x, kAlphaBand, rate), 1e-30));
      out[i][C + c] = std::log(std::max(band_power(x, kGammaBand, rate), 1e-30));
    }
  }
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Binary {
  std::vector<double> w;
  double b = 0.0;
  std::size_t iterations = 0;
};

Binary fit_binary(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                  const SvmConfig& cfg, Rng& rng) {
  const std::size_t n = x.size(), d = x.front().size();
  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  Binary cur;
  cur.w.resize(d);
  for (double& v : cur.w) v = rng.uniform(-1e-3, 1e-3);

  auto objective = [&](const Binary& m, std::vector<double>* grad_w, double* grad_b) {
    double hinge = 0.0;
    if (grad_w) std::fill(grad_w->begin(), grad_w->end(), 0.0);
    if (grad_b) *grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = y[i] * (dot(m.w, x[i]) + m.b);
      if (margin < 1.0) {
        hinge += 1.0 - margin;
        if (grad_w) {
          for (std::size_t j = 0; j < d; ++j) (*grad_w)[j] -= y[i] * x[i][j];
          *grad_b -= y[i];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad_w) {
      for (std::size_t j = 0; j < d; ++j) (*grad_w)[j] = (*grad_w)[j] * inv_n + lambda * m.w[j];
      *grad_b *= inv_n;
    }
    return 0.5 * lambda * dot(m.w, m.w) + hinge * inv_n;
  };

  std::vector<double> gw(d);
  double gb = 0.0;
  double prev = objective(cur, &gw, &gb);
  Binary best = cur;
  double best_obj = prev;
  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    const double step = 1.0 / (lambda * static_cast<double>(t) + 1.0);
    for (std::size_t j = 0; j < d; ++j) cur.w[j] -= step * gw[j];
    cur.b -= step * gb;
    const double norm = std::sqrt(dot(cur.w, cur.w));
    if (norm > radius) {
      for (double& v : cur.w) v *= radius / norm;
    }
    cur.iterations = t;
    const double obj = objective(cur, &gw, &gb);
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }
    best.iterations = t;
    if (std::abs(obj - prev) <= cfg.tolerance * std::max(std::abs(prev), 1e-300)) break;
    prev = obj;
  }
  return best;
}

}  // namespace

LinearSvmModel svm_fit(const std::vector<std::vector<double>>& features,
                       std::span<const int> labels, const SvmConfig& cfg) {
  if (features.size() != labels.size() || features.empty()) {
    throw std::invalid_argument("svm_fit: need one label per feature row");
  }
  if (!(cfg.c > 0.0) || !(cfg.tolerance > 0.0) || cfg.max_iterations == 0) {
    throw std::invalid_argument("svm_fit: C, tolerance and iteration cap must be positive");
  }
  const std::size_t n = features.size(), d = features.front().size();
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != d) throw std::invalid_argument("svm_fit: ragged feature rows");
    if (labels[i] < 0) throw std::invalid_argument("svm_fit: negative label");
    max_label = std::max(max_label, labels[i]);
  }
  const std::size_t K = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> present(K, 0);
  for (int l : labels) ++present[static_cast<std::size_t>(l)];
  if (std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw std::invalid_argument("svm_fit: training set contains a single class");
  }

  LinearSvmModel m;
  m.n_classes = K;
  m.config = cfg;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& row : features) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& row : features) var += (row[j] - mean) * (row[j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      m.dropped_features.push_back(j);
      continue;
    }
    m.kept_features.push_back(j);
    m.feature_mean.push_back(mean);
    m.feature_std.push_back(sd);
  }
  if (m.kept_features.empty()) throw std::invalid_argument("svm_fit: every feature is constant");

  std::vector<std::vector<double>> z(n, std::vector<double>(m.kept_features.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m.kept_features.size(); ++j) {
      z[i][j] = (features[i][m.kept_features[j]] - m.feature_mean[j]) / m.feature_std[j];
    }
  }
  Rng rng(cfg.seed);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<int>(k) ? 1.0 : -1.0;
    Binary fit = fit_binary(z, y, cfg, rng);
    m.weights.push_back(std::move(fit.w));
    m.bias.push_back(fit.b);
    m.iterations.push_back(fit.iterations);
  }
  return m;
}

std::vector<double> svm_scores(const LinearSvmModel& model, std::span<const double> row) {
  const std::size_t d = model.kept_features.size();
  std::vector<double> z(d);
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t col = model.kept_features[j];
    if (col >= row.size()) throw std::invalid_argument("svm_scores: feature row too short");
    z[j] = (row[col] - model.feature_mean[j]) / model.feature_std[j];
  }
  std::vector<double> scores(model.n_classes);
  for (std::size_t k = 0; k < model.n_classes; ++k) scores[k] = dot(model.weights[k], z) + model.bias[k];
  return scores;
}

std::vector<int> svm_predict(const LinearSvmModel& model,
                             const std::vector<std::vector<double>>& features) {
  std::vector<int> out;
  out.reserve(features.size());
  for (const auto& row : features) {
    const auto s = svm_scores(model, row);
    out.push_back(static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()));
  }
  return out;
}

}  // namespace eegdecode
