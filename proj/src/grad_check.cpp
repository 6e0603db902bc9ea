#include "eegdecode/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegdecode/rng.hpp"

namespace eegdecode::ad {

namespace {

double evaluate(const GraphBuilder& f, const std::vector<Leaf>& leaves) {
  Graph g;
  std::vector<Tensor> vars;
  vars.reserve(leaves.size());
  for (const auto& l : leaves) vars.push_back(g.variable(l.shape, l.values));
  return f(g, vars).item();
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& f, const std::vector<Leaf>& leaves,
                           const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  double base_loss = 0.0;
  {
    Graph g;
    std::vector<Tensor> vars;
    for (const auto& l : leaves) vars.push_back(g.variable(l.shape, l.values));
    Tensor loss = f(g, vars);
    base_loss = loss.item();
    g.backward(loss);
    for (const auto& v : vars) {
      auto gr = v.grad();
      analytic.emplace_back(gr.begin(), gr.end());
      if (analytic.back().empty()) analytic.back().assign(v.size(), 0.0);
    }
  }
  if (evaluate(f, leaves) != base_loss) {
    throw NonDeterministicError("grad_check: two forward passes with identical inputs disagree");
  }

  GradCheckResult result;
  result.leaf_max_rel.assign(leaves.size(), 0.0);
  Rng rng(options.seed);
  std::vector<Leaf> work = leaves;
  for (std::size_t li = 0; li < work.size(); ++li) {
    const std::size_t n = work[li].values.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_leaf > 0 && options.coords_per_leaf < n) {
      rng.shuffle(coords);
      coords.resize(options.coords_per_leaf);
    }
    for (std::size_t c : coords) {
      double& x = work[li].values[c];
      const double orig = x;
      x = orig + options.eps;
      const double up = evaluate(f, work);
      x = orig - options.eps;
      const double down = evaluate(f, work);
      x = orig;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[li][c];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.coords_checked;
      result.leaf_max_rel[li] = std::max(result.leaf_max_rel[li], rel);
      result.max_abs_error = std::max(result.max_abs_error, std::abs(a - numeric));
      if (rel > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        if (rel >= result.max_rel_error) {
          result.worst_leaf = li;
          result.worst_coord = c;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace eegdecode::ad
