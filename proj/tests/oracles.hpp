#pragma once

// Straight-line reference implementations used as independent oracles by the
// unit tests and the acceptance runner. Nothing here calls into the library's
// numerical code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// |H(f)| of an FIR kernel by direct summation.
inline double fir_gain(std::span<const double> taps, double f, double rate) {
  std::complex<double> acc = 0.0;
  const double w = 2.0 * std::numbers::pi * f / rate;
  for (std::size_t k = 0; k < taps.size(); ++k) {
    acc += taps[k] * std::polar(1.0, -w * static_cast<double>(k));
  }
  return std::abs(acc);
}

struct Interval {
  double lo, hi;
};

struct ResponseSummary {
  double passband_dev_db = 0.0;  // max |20 log10 |H||
  double stopband_db = -1e9;     // max 20 log10 |H|
};

// Dense grid over the given pass and stop intervals.
inline ResponseSummary fir_response(std::span<const double> taps, double rate,
                                    const std::vector<Interval>& pass,
                                    const std::vector<Interval>& stop, double step_hz = 0.05) {
  ResponseSummary s;
  auto db = [&](double f) { return 20.0 * std::log10(std::max(fir_gain(taps, f, rate), 1e-300)); };
  for (const auto& iv : pass) {
    for (double f = iv.lo; f <= iv.hi + 1e-12; f += step_hz) s.passband_dev_db = std::max(s.passband_dev_db, std::abs(db(f)));
  }
  for (const auto& iv : stop) {
    for (double f = iv.lo; f <= iv.hi + 1e-12; f += step_hz) s.stopband_db = std::max(s.stopband_db, db(f));
  }
  return s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step for a single sample. W_* are [H][H + K] row-major acting on
// [h_prev, x].
struct Cell {
  std::vector<double> h, c;
};

inline Cell lstm_cell(const std::vector<double>& x, const Cell& prev, std::size_t H,
                      const std::vector<double>& wf, const std::vector<double>& wi,
                      const std::vector<double>& wo, const std::vector<double>& wc,
                      const std::vector<double>& bf, const std::vector<double>& bi,
                      const std::vector<double>& bo, const std::vector<double>& bc) {
  const std::size_t K = x.size();
  std::vector<double> hx(prev.h);
  hx.insert(hx.end(), x.begin(), x.end());
  auto affine = [&](const std::vector<double>& w, const std::vector<double>& b, std::size_t j) {
    double s = b[j];
    for (std::size_t q = 0; q < H + K; ++q) s += w[j * (H + K) + q] * hx[q];
    return s;
  };
  Cell out;
  out.h.resize(H);
  out.c.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double f = sigmoid(affine(wf, bf, j));
    const double i = sigmoid(affine(wi, bi, j));
    const double o = sigmoid(affine(wo, bo, j));
    const double ct = std::tanh(affine(wc, bc, j));
    out.c[j] = f * prev.c[j] + i * ct;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

// Batch normalization of one feature column with batch statistics.
inline std::vector<double> batch_norm(const std::vector<double>& x, double gamma, double beta,
                                      double eps) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  std::vector<double> y;
  for (double v : x) y.push_back(gamma * (v - mu) / std::sqrt(var + eps) + beta);
  return y;
}

// Exact two-sided signed-rank p-value by enumerating all 2^m sign patterns.
// Zero differences dropped, ties share midranks, p = min(1, 2 P(T <= W)).
struct BruteWilcoxon {
  double w = 0.0;
  double p = 1.0;
  std::size_t m = 0;
};

inline BruteWilcoxon wilcoxon_brute(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  }
  const std::size_t m = d.size();
  std::vector<double> rank(m);
  for (std::size_t i = 0; i < m; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double wp = 0, wm = 0;
  for (std::size_t i = 0; i < m; ++i) (d[i] > 0 ? wp : wm) += rank[i];
  BruteWilcoxon r;
  r.m = m;
  r.w = std::min(wp, wm);
  std::uint64_t count = 0;
  const std::uint64_t total = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double t = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask >> i & 1) t += rank[i];
    }
    if (t <= r.w + 1e-9) ++count;
  }
  r.p = std::min(1.0, 2.0 * static_cast<double>(count) / static_cast<double>(total));
  return r;
}

// Adam on a single scalar, textbook form.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g, double lr, double b1 = 0.9, double b2 = 0.999,
              double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
