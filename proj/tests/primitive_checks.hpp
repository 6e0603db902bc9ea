#pragma once

// One small random graph per autodiff primitive, each reduced to a scalar by a
// fixed random projection so every output coordinate contributes.

#include <string>
#include <vector>

#include "eegdecode/autodiff.hpp"
#include "eegdecode/grad_check.hpp"
#include "eegdecode/rng.hpp"

namespace primcheck {

using namespace eegdecode;
using ad::Graph;
using ad::Leaf;
using ad::Shape;
using ad::Tensor;

struct Case {
  std::string name;
  ad::GraphBuilder build;
  std::vector<Leaf> leaves;
};

inline Leaf random_leaf(Shape shape, std::uint64_t seed, double lo = -1.5, double hi = 1.5) {
  Rng rng(seed);
  Leaf l{shape, std::vector<double>(ad::numel(shape))};
  for (double& v : l.values) v = rng.uniform(lo, hi);
  return l;
}

// sum(y * r) with a seeded random r of y's shape.
inline Tensor project(Graph& g, const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> r(y.size());
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  return ad::sum(ad::mul(y, g.constant(y.shape(), r)));
}

inline std::vector<Case> cases() {
  std::vector<Case> out;
  auto unary = [&](std::string name, Tensor (*op)(const Tensor&), double lo, double hi) {
    out.push_back({name,
                   [op](Graph& g, std::span<const Tensor> x) { return project(g, op(x[0]), 91); },
                   {random_leaf({3, 4}, 1, lo, hi)}});
  };
  out.push_back({"add", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::add(x[0], x[1]), 1); },
                 {random_leaf({4, 5}, 2), random_leaf({4, 5}, 3)}});
  out.push_back({"add broadcast", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::add(x[0], x[1]), 2); },
                 {random_leaf({4, 5}, 4), random_leaf({1, 5}, 5)}});
  out.push_back({"sub", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::sub(x[0], x[1]), 3); },
                 {random_leaf({3, 2, 4}, 6), random_leaf({4}, 7)}});
  out.push_back({"mul", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::mul(x[0], x[1]), 4); },
                 {random_leaf({6, 3}, 8), random_leaf({6, 3}, 9)}});
  out.push_back({"mul broadcast", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::mul(x[1], x[0]), 5); },
                 {random_leaf({6, 3}, 10), random_leaf({3}, 11)}});
  out.push_back({"scale", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::scale(x[0], -2.5), 6); },
                 {random_leaf({7}, 12)}});
  out.push_back({"matmul", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::matmul(x[0], x[1]), 7); },
                 {random_leaf({3, 5}, 13), random_leaf({5, 4}, 14)}});
  out.push_back({"transpose", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::transpose(x[0]), 8); },
                 {random_leaf({3, 5}, 15)}});
  out.push_back({"reshape", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::reshape(x[0], {5, 3}), 9); },
                 {random_leaf({3, 5}, 16)}});
  out.push_back({"permute", [](Graph& g, std::span<const Tensor> x) {
                   const std::size_t axes[] = {2, 0, 1};
                   return project(g, ad::permute(x[0], axes), 10);
                 },
                 {random_leaf({2, 3, 4}, 17)}});
  out.push_back({"concat", [](Graph& g, std::span<const Tensor> x) {
                   const std::array<Tensor, 2> parts{x[0], x[1]};
                   return project(g, ad::concat(parts, 1), 11);
                 },
                 {random_leaf({3, 2}, 18), random_leaf({3, 4}, 19)}});
  out.push_back({"slice", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::slice(x[0], 1, 1, 3), 12); },
                 {random_leaf({3, 5}, 20)}});
  out.push_back({"reduce_sum", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::reduce_sum(x[0], 0), 13); },
                 {random_leaf({4, 3}, 21)}});
  out.push_back({"reduce_mean", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::reduce_mean(x[0], 1), 14); },
                 {random_leaf({4, 3}, 22)}});
  out.push_back({"mean", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::mean(x[0]), 15); },
                 {random_leaf({4, 3}, 23)}});
  unary("sigmoid", [](const Tensor& t) { return ad::sigmoid(t); }, -3, 3);
  unary("tanh", [](const Tensor& t) { return ad::tanh(t); }, -2, 2);
  unary("elu", [](const Tensor& t) { return ad::elu(t); }, -3, 3);
  unary("exp", [](const Tensor& t) { return ad::exp(t); }, -2, 2);
  unary("log", [](const Tensor& t) { return ad::log(t); }, 0.2, 3);
  unary("softmax", [](const Tensor& t) { return ad::softmax(t, 1); }, -2, 2);
  unary("log_softmax", [](const Tensor& t) { return ad::log_softmax(t, 1); }, -2, 2);
  out.push_back({"softmax axis 0", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::softmax(x[0], 0), 16); },
                 {random_leaf({3, 4}, 24)}});
  out.push_back({"depthwise_mix", [](Graph& g, std::span<const Tensor> x) { return project(g, ad::depthwise_mix(x[0], x[1]), 17); },
                 {random_leaf({2, 3, 4, 2}, 25), random_leaf({2, 2, 3}, 26)}});
  out.push_back({"batch_norm_train", [](Graph& g, std::span<const Tensor> x) {
                   return project(g, ad::batch_norm_train(x[0], x[1], x[2], 1e-5), 18);
                 },
                 {random_leaf({6, 3}, 27), random_leaf({3}, 28, 0.5, 1.5), random_leaf({3}, 29)}});
  out.push_back({"batch_norm_infer", [](Graph& g, std::span<const Tensor> x) {
                   const std::vector<double> rm = {0.1, -0.2, 0.3}, rv = {0.5, 1.5, 2.0};
                   return project(g, ad::batch_norm_infer(x[0], x[1], x[2], rm, rv, 1e-5), 19);
                 },
                 {random_leaf({6, 3}, 30), random_leaf({3}, 31), random_leaf({3}, 32)}});
  return out;
}

}  // namespace primcheck
