#include "eegdecode/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <numeric>

namespace eegdecode::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Graph& same_graph(const Tensor& a, const Tensor& b, std::string_view op) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) {
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
  }
  return a.graph();
}

struct AxisSplit {
  std::size_t outer = 1, dim = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, std::string_view op) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.dim = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Which operand repeats, if any, under the leading-1 broadcasting rule.
enum class Repeat { None, A, B };

bool suffix_compatible(const Shape& small, const Shape& big) {
  std::size_t lead = 0;
  while (lead < small.size() && small[lead] == 1) ++lead;
  const std::size_t tail = small.size() - lead;
  if (tail > big.size()) return false;
  return std::equal(small.begin() + static_cast<std::ptrdiff_t>(lead), small.end(),
                    big.end() - static_cast<std::ptrdiff_t>(tail));
}

Repeat broadcast_mode(const Shape& a, const Shape& b, std::string_view op) {
  if (a == b) return Repeat::None;
  const std::size_t na = numel(a), nb = numel(b);
  if (nb <= na && suffix_compatible(b, a)) return Repeat::B;
  if (na < nb && suffix_compatible(a, b)) return Repeat::A;
  throw ShapeError(op, a, b);
}

/// Visits (output, a, b) flat indices of a broadcast elementwise op without
/// per-element division: the repeated operand is walked in whole blocks.
template <typename Visit>
void for_each_pair(Repeat mode, std::size_t n, std::size_t na, std::size_t nb, Visit visit) {
  if (mode == Repeat::A) {
    for (std::size_t base = 0; base < n; base += na) {
      for (std::size_t j = 0; j < na; ++j) visit(base + j, j, base + j);
    }
  } else if (mode == Repeat::B) {
    for (std::size_t base = 0; base < n; base += nb) {
      for (std::size_t j = 0; j < nb; ++j) visit(base + j, base + j, j);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) visit(i, i, i);
  }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  Graph& g = same_graph(a, b, op);
  const auto mode = broadcast_mode(a.shape(), b.shape(), op);
  const Shape out_shape = mode == Repeat::A ? b.shape() : a.shape();
  const std::size_t n = numel(out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t na = av.size(), nb = bv.size();
  std::vector<double> out(n);
  for_each_pair(mode, n, na, nb, [&](std::size_t i, std::size_t ja, std::size_t jb) {
    out[i] = fwd(av[ja], bv[jb]);
  });
  return g.record(op, out_shape, std::move(out), {a.id(), b.id()},
                  [mode, da, db](Graph& gr, const Graph::Node& self) {
                    const auto ia = self.inputs[0], ib = self.inputs[1];
                    const auto& x = gr.node(ia).value;
                    const auto& y = gr.node(ib).value;
                    const auto& go = self.grad;
                    if (gr.needs_grad(ia)) {
                      auto& gx = gr.grad_of(ia);
                      for_each_pair(mode, go.size(), x.size(), y.size(),
                                    [&](std::size_t i, std::size_t jx, std::size_t jy) {
                                      gx[jx] += go[i] * da(x[jx], y[jy]);
                                    });
                    }
                    if (gr.needs_grad(ib)) {
                      auto& gy = gr.grad_of(ib);
                      for_each_pair(mode, go.size(), x.size(), y.size(),
                                    [&](std::size_t i, std::size_t jx, std::size_t jy) {
                                      gy[jy] += go[i] * db(x[jx], y[jy]);
                                    });
                    }
                  });
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(std::string_view op, const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return a.graph().record(op, a.shape(), std::move(out), {a.id()},
                          [deriv](Graph& gr, const Graph::Node& self) {
                            const auto ia = self.inputs[0];
                            const auto& x = gr.node(ia).value;
                            auto& gx = gr.grad_of(ia);
                            for (std::size_t i = 0; i < x.size(); ++i) {
                              gx[i] += self.grad[i] * deriv(x[i], self.value[i]);
                            }
                          });
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

ShapeError::ShapeError(std::string_view op, const Shape& a, const Shape& b)
    : std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                            shape_str(b)) {}

const Shape& Tensor::shape() const { return graph_->node(id_).shape; }
std::span<const double> Tensor::values() const { return graph_->node(id_).value; }
std::span<const double> Tensor::grad() const { return graph_->node(id_).grad; }
bool Tensor::requires_grad() const { return graph_->node(id_).requires_grad; }

double Tensor::item() const {
  const auto v = values();
  if (v.size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
  return v[0];
}

Tensor Graph::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("constant: shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  nodes_.push_back(Node{"constant", std::move(shape), std::move(values), {}, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Tensor Graph::variable(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  nodes_.back().op = "variable";
  nodes_.back().requires_grad = true;
  return t;
}

Tensor Graph::record(std::string_view op, Shape shape, std::vector<double> value,
                     std::vector<std::size_t> inputs, Backward backward) {
  bool rg = false;
  for (auto id : inputs) rg = rg || nodes_.at(id).requires_grad;
  nodes_.push_back(Node{op, std::move(shape), std::move(value), {}, std::move(inputs), rg,
                        rg ? std::move(backward) : Backward{}});
  return {this, nodes_.size() - 1};
}

std::vector<double>& Graph::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Graph::backward(const Tensor& loss) {
  if (nodes_.empty() || !loss.valid() || &loss.graph() != this || loss.id() >= nodes_.size()) {
    throw std::logic_error("backward: loss does not belong to a recorded forward pass");
  }
  auto& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss of shape " + shape_str(root.shape) + " is not scalar");
  }
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any variable");
  for (auto& n : nodes_) n.grad.clear();
  root.grad.assign(1, 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Graph& g = same_graph(a, b, "matmul");
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) throw ShapeError("matmul", sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  return g.record("matmul", {m, n}, std::move(out), {a.id(), b.id()},
                  [m, k, n](Graph& gr, const Graph::Node& self) {
                    const auto ia = self.inputs[0], ib = self.inputs[1];
                    ConstMap go(self.grad.data(), m, n);
                    if (gr.needs_grad(ia)) {
                      auto& ga = gr.grad_of(ia);
                      MutMap(ga.data(), m, k).noalias() +=
                          go * ConstMap(gr.node(ib).value.data(), k, n).transpose();
                    }
                    if (gr.needs_grad(ib)) {
                      auto& gb = gr.grad_of(ib);
                      MutMap(gb.data(), k, n).noalias() +=
                          ConstMap(gr.node(ia).value.data(), m, k).transpose() * go;
                    }
                  });
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose: expects 2-D, got " + shape_str(a.shape()));
  const std::array<std::size_t, 2> axes{1, 0};
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) throw ShapeError("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return a.graph().record("reshape", std::move(shape), std::move(out), {a.id()},
                          [](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
                          });
}

Tensor permute(const Tensor& a, std::span<const std::size_t> axes) {
  const Shape& in = a.shape();
  const std::size_t rank = in.size();
  std::vector<bool> seen(rank, false);
  if (axes.size() != rank) throw ShapeError("permute: axis list does not match rank of " + shape_str(in));
  for (auto ax : axes) {
    if (ax >= rank || seen[ax]) throw ShapeError("permute: invalid axis list for " + shape_str(in));
    seen[ax] = true;
  }
  Shape out_shape(rank);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  // Stride in the input for each output axis.
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in[axes[i]];
    src_stride[i] = in_strides[axes[i]];
  }
  const std::size_t n = a.size();
  // Output flat index -> input flat index.
  auto gather = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*gather)[i] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  const auto av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[(*gather)[i]];
  return a.graph().record("permute", std::move(out_shape), std::move(out), {a.id()},
                          [gather](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                              ga[(*gather)[i]] += self.grad[i];
                            }
                          });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Graph& g = parts[0].graph();
  Shape out_shape = parts[0].shape();
  const auto first = split_axis(out_shape, axis, "concat");
  std::size_t total = 0;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_graph(parts[0], p, "concat");
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat", out_shape, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) throw ShapeError("concat", out_shape, s);
    }
    dims.push_back(s[axis]);
    total += s[axis];
    ids.push_back(p.id());
  }
  out_shape[axis] = total;
  const std::size_t outer = first.outer, inner = first.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t block = dims[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(o * block),
                v.begin() + static_cast<std::ptrdiff_t>((o + 1) * block),
                out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + offset));
    }
    offset += block;
  }
  return g.record("concat", std::move(out_shape), std::move(out), std::move(ids),
                  [dims, outer, inner, total](Graph& gr, const Graph::Node& self) {
                    std::size_t offset = 0;
                    for (std::size_t p = 0; p < dims.size(); ++p) {
                      const std::size_t block = dims[p] * inner;
                      if (gr.needs_grad(self.inputs[p])) {
                        auto& gp = gr.grad_of(self.inputs[p]);
                        for (std::size_t o = 0; o < outer; ++o) {
                          const double* src = self.grad.data() + o * total * inner + offset;
                          double* dst = gp.data() + o * block;
                          for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                        }
                      }
                      offset += block;
                    }
                  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto sp = split_axis(a.shape(), axis, "slice");
  if (length == 0 || start + length > sp.dim) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis " + std::to_string(axis) +
                     " of " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const auto av = a.values();
  std::vector<double> out(sp.outer * length * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* src = av.data() + (o * sp.dim + start) * sp.inner;
    std::copy(src, src + length * sp.inner, out.begin() + static_cast<std::ptrdiff_t>(o * length * sp.inner));
  }
  return a.graph().record("slice", std::move(out_shape), std::move(out), {a.id()},
                          [sp, start, length](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              double* dst = ga.data() + (o * sp.dim + start) * sp.inner;
                              const double* src = self.grad.data() + o * length * sp.inner;
                              for (std::size_t j = 0; j < length * sp.inner; ++j) dst[j] += src[j];
                            }
                          });
}

namespace {

Tensor reduce_axis(std::string_view op, const Tensor& a, std::size_t axis, double factor) {
  const auto sp = split_axis(a.shape(), axis, op);
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  const auto av = a.values();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t d = 0; d < sp.dim; ++d) {
      const double* src = av.data() + (o * sp.dim + d) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t j = 0; j < sp.inner; ++j) dst[j] += src[j];
    }
  }
  for (double& v : out) v *= factor;
  return a.graph().record(op, std::move(out_shape), std::move(out), {a.id()},
                          [sp, factor](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              const double* src = self.grad.data() + o * sp.inner;
                              for (std::size_t d = 0; d < sp.dim; ++d) {
                                double* dst = ga.data() + (o * sp.dim + d) * sp.inner;
                                for (std::size_t j = 0; j < sp.inner; ++j) dst[j] += factor * src[j];
                              }
                            }
                          });
}

}  // namespace

Tensor reduce_sum(const Tensor& a, std::size_t axis) { return reduce_axis("reduce_sum", a, axis, 1.0); }

Tensor reduce_mean(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis(a.shape(), axis, "reduce_mean");
  return reduce_axis("reduce_mean", a, axis, 1.0 / static_cast<double>(sp.dim));
}

Tensor sum(const Tensor& a) { return reduce_sum(reshape(a, {a.size()}), 0); }

Tensor mean(const Tensor& a) { return reduce_mean(reshape(a, {a.size()}), 0); }

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor elu(const Tensor& a, double alpha) {
  return unary(
      "elu", a, [alpha](double x) { return x > 0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0 ? 1.0 : y + alpha; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis(a.shape(), axis, "softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.inner; ++j) {
      const std::size_t base = o * sp.dim * sp.inner + j;
      double mx = av[base];
      for (std::size_t d = 1; d < sp.dim; ++d) mx = std::max(mx, av[base + d * sp.inner]);
      double z = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) {
        const double e = std::exp(av[base + d * sp.inner] - mx);
        out[base + d * sp.inner] = e;
        z += e;
      }
      for (std::size_t d = 0; d < sp.dim; ++d) out[base + d * sp.inner] /= z;
    }
  }
  return a.graph().record("softmax", a.shape(), std::move(out), {a.id()},
                          [sp](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            const auto& y = self.value;
                            const auto& g = self.grad;
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              for (std::size_t j = 0; j < sp.inner; ++j) {
                                const std::size_t base = o * sp.dim * sp.inner + j;
                                double dot = 0.0;
                                for (std::size_t d = 0; d < sp.dim; ++d) {
                                  dot += g[base + d * sp.inner] * y[base + d * sp.inner];
                                }
                                for (std::size_t d = 0; d < sp.dim; ++d) {
                                  const std::size_t i = base + d * sp.inner;
                                  ga[i] += y[i] * (g[i] - dot);
                                }
                              }
                            }
                          });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis(a.shape(), axis, "log_softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.inner; ++j) {
      const std::size_t base = o * sp.dim * sp.inner + j;
      double mx = av[base];
      for (std::size_t d = 1; d < sp.dim; ++d) mx = std::max(mx, av[base + d * sp.inner]);
      double z = 0.0;
      for (std::size_t d = 0; d < sp.dim; ++d) z += std::exp(av[base + d * sp.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t d = 0; d < sp.dim; ++d) out[base + d * sp.inner] = av[base + d * sp.inner] - lse;
    }
  }
  return a.graph().record("log_softmax", a.shape(), std::move(out), {a.id()},
                          [sp](Graph& gr, const Graph::Node& self) {
                            auto& ga = gr.grad_of(self.inputs[0]);
                            const auto& y = self.value;
                            const auto& g = self.grad;
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              for (std::size_t j = 0; j < sp.inner; ++j) {
                                const std::size_t base = o * sp.dim * sp.inner + j;
                                double gsum = 0.0;
                                for (std::size_t d = 0; d < sp.dim; ++d) gsum += g[base + d * sp.inner];
                                for (std::size_t d = 0; d < sp.dim; ++d) {
                                  const std::size_t i = base + d * sp.inner;
                                  ga[i] += g[i] - std::exp(y[i]) * gsum;
                                }
                              }
                            }
                          });
}

Tensor depthwise_mix(const Tensor& x, const Tensor& w) {
  Graph& g = same_graph(x, w, "depthwise_mix");
  const auto& sx = x.shape();
  const auto& sw = w.shape();
  if (sx.size() != 4 || sw.size() != 3 || sw[0] != sx[3] || sw[2] != sx[1]) {
    throw ShapeError("depthwise_mix", sx, sw);
  }
  const std::size_t B = sx[0], C = sx[1], S = sx[2], F = sx[3], D = sw[1];
  const auto xv = x.values();
  const auto wv = w.values();
  std::vector<double> out(B * S * F * D, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t s = 0; s < S; ++s) {
        const double* xr = xv.data() + ((b * C + c) * S + s) * F;
        double* orow = out.data() + (b * S + s) * F * D;
        for (std::size_t f = 0; f < F; ++f) {
          for (std::size_t d = 0; d < D; ++d) orow[f * D + d] += wv[(f * D + d) * C + c] * xr[f];
        }
      }
    }
  }
  return g.record("depthwise_mix", {B * S, F * D}, std::move(out), {x.id(), w.id()},
                  [B, C, S, F, D](Graph& gr, const Graph::Node& self) {
                    const auto ix = self.inputs[0], iw = self.inputs[1];
                    const auto& xv = gr.node(ix).value;
                    const auto& wv = gr.node(iw).value;
                    const bool need_x = gr.needs_grad(ix), need_w = gr.needs_grad(iw);
                    std::vector<double>* gx = need_x ? &gr.grad_of(ix) : nullptr;
                    std::vector<double>* gw = need_w ? &gr.grad_of(iw) : nullptr;
                    for (std::size_t b = 0; b < B; ++b) {
                      for (std::size_t c = 0; c < C; ++c) {
                        for (std::size_t s = 0; s < S; ++s) {
                          const std::size_t xbase = ((b * C + c) * S + s) * F;
                          const double* grow = self.grad.data() + (b * S + s) * F * D;
                          for (std::size_t f = 0; f < F; ++f) {
                            for (std::size_t d = 0; d < D; ++d) {
                              const std::size_t wi = (f * D + d) * C + c;
                              if (need_x) (*gx)[xbase + f] += wv[wi] * grow[f * D + d];
                              if (need_w) (*gw)[wi] += xv[xbase + f] * grow[f * D + d];
                            }
                          }
                        }
                      }
                    }
                  });
}

namespace {

void check_bn_shapes(const Tensor& x, const Tensor& gamma, const Tensor& beta, const char* op) {
  if (x.shape().size() != 2) throw ShapeError(std::string(op) + ": expects [N, F], got " + shape_str(x.shape()));
  const std::size_t F = x.shape()[1];
  if (gamma.size() != F) throw ShapeError(op, x.shape(), gamma.shape());
  if (beta.size() != F) throw ShapeError(op, x.shape(), beta.shape());
  same_graph(x, gamma, op);
  same_graph(x, beta, op);
}

}  // namespace

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStats* stats_out) {
  check_bn_shapes(x, gamma, beta, "batch_norm_train");
  const std::size_t N = x.shape()[0], F = x.shape()[1];
  if (N < 2) throw std::invalid_argument("batch_norm_train: batch of 1 in training mode");
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> mu(F, 0.0), var(F, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) mu[f] += xv[n * F + f];
  }
  for (double& m : mu) m /= static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const double d = xv[n * F + f] - mu[f];
      var[f] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(N);
  auto inv_std = std::make_shared<std::vector<double>>(F);
  for (std::size_t f = 0; f < F; ++f) (*inv_std)[f] = 1.0 / std::sqrt(var[f] + eps);
  auto xhat = std::make_shared<std::vector<double>>(N * F);
  std::vector<double> out(N * F);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const double h = (xv[n * F + f] - mu[f]) * (*inv_std)[f];
      (*xhat)[n * F + f] = h;
      out[n * F + f] = gv[f] * h + bv[f];
    }
  }
  if (stats_out) *stats_out = {mu, var};
  return x.graph().record(
      "batch_norm_train", x.shape(), std::move(out), {x.id(), gamma.id(), beta.id()},
      [N, F, inv_std, xhat](Graph& gr, const Graph::Node& self) {
        const auto ix = self.inputs[0], ig = self.inputs[1], ib = self.inputs[2];
        const auto& gam = gr.node(ig).value;
        const auto& go = self.grad;
        std::vector<double> sum_g(F, 0.0), sum_gh(F, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t f = 0; f < F; ++f) {
            sum_g[f] += go[n * F + f];
            sum_gh[f] += go[n * F + f] * (*xhat)[n * F + f];
          }
        }
        if (gr.needs_grad(ib)) {
          auto& gb = gr.grad_of(ib);
          for (std::size_t f = 0; f < F; ++f) gb[f] += sum_g[f];
        }
        if (gr.needs_grad(ig)) {
          auto& gg = gr.grad_of(ig);
          for (std::size_t f = 0; f < F; ++f) gg[f] += sum_gh[f];
        }
        if (gr.needs_grad(ix)) {
          auto& gx = gr.grad_of(ix);
          const double inv_n = 1.0 / static_cast<double>(N);
          for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t f = 0; f < F; ++f) {
              const std::size_t i = n * F + f;
              gx[i] += gam[f] * (*inv_std)[f] *
                       (go[i] - inv_n * sum_g[f] - (*xhat)[i] * inv_n * sum_gh[f]);
            }
          }
        }
      });
}

Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        std::span<const double> running_mean,
                        std::span<const double> running_var, double eps) {
  check_bn_shapes(x, gamma, beta, "batch_norm_infer");
  const std::size_t N = x.shape()[0], F = x.shape()[1];
  if (running_mean.size() != F || running_var.size() != F) {
    throw ShapeError("batch_norm_infer: running statistics do not match " + shape_str(x.shape()));
  }
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  auto inv_std = std::make_shared<std::vector<double>>(F);
  for (std::size_t f = 0; f < F; ++f) (*inv_std)[f] = 1.0 / std::sqrt(running_var[f] + eps);
  auto xhat = std::make_shared<std::vector<double>>(N * F);
  std::vector<double> out(N * F);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const double h = (xv[n * F + f] - running_mean[f]) * (*inv_std)[f];
      (*xhat)[n * F + f] = h;
      out[n * F + f] = gv[f] * h + bv[f];
    }
  }
  return x.graph().record(
      "batch_norm_infer", x.shape(), std::move(out), {x.id(), gamma.id(), beta.id()},
      [N, F, inv_std, xhat](Graph& gr, const Graph::Node& self) {
        const auto ix = self.inputs[0], ig = self.inputs[1], ib = self.inputs[2];
        const auto& gam = gr.node(ig).value;
        const auto& go = self.grad;
        const bool nx = gr.needs_grad(ix), ng = gr.needs_grad(ig), nb = gr.needs_grad(ib);
        std::vector<double>* gx = nx ? &gr.grad_of(ix) : nullptr;
        std::vector<double>* gg = ng ? &gr.grad_of(ig) : nullptr;
        std::vector<double>* gb = nb ? &gr.grad_of(ib) : nullptr;
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t f = 0; f < F; ++f) {
            const std::size_t i = n * F + f;
            if (nx) (*gx)[i] += go[i] * gam[f] * (*inv_std)[f];
            if (ng) (*gg)[f] += go[i] * (*xhat)[i];
            if (nb) (*gb)[f] += go[i];
          }
        }
      });
}

}  // namespace eegdecode::ad
