#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eegdecode/data.hpp"

namespace eegdecode {

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Seeded train/validation/test partition of a trial set.
struct SplitPlan {
  std::uint64_t seed = 0;
  SplitFractions fractions;
  bool stratify_by_label = true;

  void validate() const;
};

/// Sorted, pairwise-disjoint trial index sets.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct EpochSplit {
  EpochSet train;
  EpochSet validation;
  EpochSet test;
};

/// When stratified, each class is shuffled and cut by rounding
/// n_class * fraction for the test and validation roles; training takes the rest.
SplitIndices split_indices(std::span<const int> labels, const SplitPlan& plan);

EpochSplit split(const EpochSet& es, const SplitPlan& plan);

/// K stratified folds, each sorted. Every class needs at least k trials.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t k, std::uint64_t seed);

/// Per class, keeps round(count * fraction) trials chosen by seed. Throws when
/// any class would keep fewer than one trial.
std::vector<std::size_t> stratified_sample(std::span<const int> labels, double fraction,
                                           std::uint64_t seed);

/// Complement of `chosen` within [0, n), sorted.
std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> chosen);

/// Throws std::logic_error if any index appears in both sets.
void require_disjoint(std::span<const std::size_t> a, std::span<const std::size_t> b,
                      const char* context);

}  // namespace eegdecode
