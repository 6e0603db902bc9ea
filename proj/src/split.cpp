#include "eegdecode/split.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "eegdecode/rng.hpp"

namespace eegdecode {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(std::span<const int> labels) {
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= kNumClasses) throw std::invalid_argument("label outside 0..2");
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }
  return by_class;
}

std::size_t rounded_share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

}  // namespace

void SplitPlan::validate() const {
  const auto& f = fractions;
  if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0) {
    throw std::invalid_argument("split fractions must be non-negative");
  }
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

SplitIndices split_indices(std::span<const int> labels, const SplitPlan& plan) {
  plan.validate();
  Rng rng(plan.seed);
  std::vector<std::vector<std::size_t>> groups;
  if (plan.stratify_by_label) {
    groups = indices_by_class(labels);
  } else {
    groups.emplace_back(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) groups[0][i] = i;
  }

  SplitIndices out;
  for (auto& g : groups) {
    rng.shuffle(g);
    const std::size_t n_test = std::min(g.size(), rounded_share(g.size(), plan.fractions.test));
    const std::size_t n_val =
        std::min(g.size() - n_test, rounded_share(g.size(), plan.fractions.validation));
    out.test.insert(out.test.end(), g.begin(), g.begin() + n_test);
    out.validation.insert(out.validation.end(), g.begin() + n_test, g.begin() + n_test + n_val);
    out.train.insert(out.train.end(), g.begin() + n_test + n_val, g.end());
  }
  const auto& f = plan.fractions;
  if ((f.train > 0 && out.train.empty()) || (f.validation > 0 && out.validation.empty()) ||
      (f.test > 0 && out.test.empty())) {
    throw std::invalid_argument("too few trials for requested split fractions");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

EpochSplit split(const EpochSet& es, const SplitPlan& plan) {
  const auto idx = split_indices(es.labels, plan);
  return {subset(es, idx.train), subset(es, idx.validation), subset(es, idx.test)};
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  auto by_class = indices_by_class(labels);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (!by_class[c].empty() && by_class[c].size() < k) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) + " trials, fewer than " +
                                  std::to_string(k) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& g : by_class) {
    rng.shuffle(g);
    for (std::size_t i : g) {
      folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::size_t> stratified_sample(std::span<const int> labels, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("sample fraction must lie in (0, 1]");
  }
  auto by_class = indices_by_class(labels);
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& g = by_class[c];
    rng.shuffle(g);
    const std::size_t n = rounded_share(g.size(), fraction);
    if (n < 1) {
      throw std::invalid_argument("fraction " + std::to_string(fraction) +
                                  " selects no trials of class " + std::to_string(c));
    }
    out.insert(out.end(), g.begin(), g.begin() + n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> chosen) {
  std::vector<char> taken(n, 0);
  for (std::size_t i : chosen) taken.at(i) = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

void require_disjoint(std::span<const std::size_t> a, std::span<const std::size_t> b,
                      const char* context) {
  std::vector<std::size_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::size_t> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  if (!common.empty()) {
    throw std::logic_error(std::string("index leakage in ") + context + ": trial " +
                           std::to_string(common.front()) + " appears in both sets");
  }
}

}  // namespace eegdecode
