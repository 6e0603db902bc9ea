#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "eegdecode/autodiff.hpp"

namespace eegdecode::ad {

/// Builds a scalar loss from variables created for each leaf, in order.
using GraphBuilder = std::function<Tensor(Graph&, std::span<const Tensor>)>;

struct Leaf {
  Shape shape;
  std::vector<double> values;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates sampled per leaf; 0 checks every coordinate.
  std::size_t coords_per_leaf = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  /// Largest relative error per leaf, and largest |a - n| overall.
  std::vector<double> leaf_max_rel;
  double max_abs_error = 0.0;
};

class NonDeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compares reverse-mode gradients against central differences:
/// |a - n| / max(1e-8, |a| + |n|), maximized over the checked coordinates.
/// Throws NonDeterministicError when two identical forward passes disagree.
GradCheckResult grad_check(const GraphBuilder& f, const std::vector<Leaf>& leaves,
                           const GradCheckOptions& options = {});

}  // namespace eegdecode::ad
