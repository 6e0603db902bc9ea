#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// Dense 64-bit tensors with tape-based reverse-mode differentiation.
///
/// A Graph records every primitive application in creation order, which is
/// already a topological order: inputs always exist before their consumers.
/// Tensor is a cheap handle (graph pointer + node id) into that record.
namespace eegdecode::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string_view op, const Shape& a, const Shape& b);
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

class Graph;

class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  std::span<const double> values() const;
  /// Empty until backward() has reached this node.
  std::span<const double> grad() const;
  bool requires_grad() const;
  std::size_t size() const { return numel(shape()); }
  double item() const;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Tensor(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  struct Node;
  using Backward = std::function<void(Graph&, const Node&)>;

  struct Node {
    std::string_view op;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    Backward backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Tensor constant(Shape shape, std::vector<double> values);
  /// Leaf that receives a gradient.
  Tensor variable(Shape shape, std::vector<double> values);

  /// Reverse sweep from a scalar loss. Leaf grads are (re)computed from zero.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  /// Appends a node. `backward` is dropped when no input needs a gradient.
  Tensor record(std::string_view op, Shape shape, std::vector<double> value,
                std::vector<std::size_t> inputs, Backward backward);

  /// Gradient buffer of an input node, allocated on first use.
  std::vector<double>& grad_of(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  std::vector<Node> nodes_;
};

// Elementwise binary ops. Broadcasting: the operand with fewer elements may
// have leading extents of 1 and must otherwise match the trailing extents of
// the other operand, e.g. [1, F] or [F] against [N, F].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// [m, k] x [k, n] -> [m, n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::span<const std::size_t> axes);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

/// Reductions keep the reduced axis with extent 1.
Tensor reduce_sum(const Tensor& a, std::size_t axis);
Tensor reduce_mean(const Tensor& a, std::size_t axis);
/// Sum / mean of all elements, shape [1].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// Max-shifted softmax along `axis`.
Tensor softmax(const Tensor& a, std::size_t axis);
/// x - logsumexp(x) along `axis`.
Tensor log_softmax(const Tensor& a, std::size_t axis);

// Fused primitives used by the network.

/// Depthwise channel mixing. x: [B, C, S, F], w: [F, D, C] -> [B*S, F*D] with
/// out[(b,s), f*D+d] = sum_c w[f,d,c] * x[b,c,s,f]. No mixing across f.
Tensor depthwise_mix(const Tensor& x, const Tensor& w);

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased (divide by m)
};

/// Per-feature batch normalization of x: [N, F] with gamma, beta: [F].
/// Training: normalizes by batch statistics (N >= 2) and writes them to
/// `stats_out` when given. Inference: uses the supplied running statistics.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStats* stats_out = nullptr);
Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        std::span<const double> running_mean,
                        std::span<const double> running_var, double eps);

}  // namespace eegdecode::ad
