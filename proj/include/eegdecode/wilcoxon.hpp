#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace eegdecode {

inline constexpr std::size_t kWilcoxonMaxPairs = 25;

struct WilcoxonResult {
  double w = 0.0;        // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;  // two-sided, exact
  std::size_t n_nonzero = 0;
};

/// Thrown when every paired difference is zero.
class NoNonzeroDifferencesError : public std::invalid_argument {
 public:
  NoNonzeroDifferencesError() : std::invalid_argument("no nonzero differences") {}
};

/// Exact two-sided signed-rank test. Zero differences are dropped, tied |d|
/// share midranks, and p = min(1, 2 * P(T <= W)) over all 2^m equally likely
/// sign patterns, counted by dynamic programming over doubled ranks.
/// Refuses more than kWilcoxonMaxPairs pairs.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace eegdecode
