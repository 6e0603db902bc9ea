#include "eegdecode/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace eegdecode {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  if (a.size() > kWilcoxonMaxPairs) {
    throw std::invalid_argument("wilcoxon: " + std::to_string(a.size()) +
                                " pairs exceeds the exact-test limit of " +
                                std::to_string(kWilcoxonMaxPairs));
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (!std::isfinite(diff)) throw std::invalid_argument("wilcoxon: non-finite difference");
    if (diff != 0.0) d.push_back(diff);
  }
  if (d.empty()) throw NoNonzeroDifferencesError();
  const std::size_t m = d.size();

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  // Doubled midranks stay integral: tie group [i, j) gets rank (i + 1 + j).
  std::vector<std::size_t> rank2(m);
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i + 1;
    while (j < m && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = i + 1 + j;
    i = j;
  }

  WilcoxonResult r;
  r.n_nonzero = m;
  std::size_t plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) plus2 += rank2[i];
  }
  const std::size_t minus2 = total2 - plus2;
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(minus2) / 2.0;
  const std::size_t w2 = std::min(plus2, minus2);
  r.w = static_cast<double>(w2) / 2.0;

  // counts[s] = number of sign patterns whose positive doubled-rank sum is s.
  std::vector<double> counts(total2 + 1, 0.0);
  counts[0] = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = total2 + 1; s-- > rank2[i];) counts[s] += counts[s - rank2[i]];
  }
  double tail = 0.0;
  for (std::size_t s = 0; s <= w2; ++s) tail += counts[s];
  r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(m)));
  return r;
}

}  // namespace eegdecode
