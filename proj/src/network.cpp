#include "eegdecode/network.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "eegdecode/rng.hpp"

namespace eegdecode {

using ad::Tensor;

void ArchConfig::validate() const {
  if (n_channels == 0 || n_time == 0 || segment_len == 0 || n_temporal_filters == 0 ||
      depth_multiplier == 0 || lstm_hidden == 0 || n_classes == 0) {
    throw std::invalid_argument("architecture extents must be positive");
  }
  if (n_time % segment_len != 0) {
    throw std::invalid_argument("n_time " + std::to_string(n_time) +
                                " is not divisible by segment_len " + std::to_string(segment_len));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  if (!(bn_epsilon > 0.0) || !(bn_momentum > 0.0 && bn_momentum <= 1.0)) {
    throw std::invalid_argument("batch-norm epsilon must be > 0 and momentum in (0, 1]");
  }
}

namespace {

template <typename P, typename E>
std::vector<E> collect(P& p, bool with_running) {
  std::vector<E> out;
  auto bn = [&](const std::string& prefix, auto& b) {
    out.push_back({prefix + ".gamma", &b.gamma});
    out.push_back({prefix + ".beta", &b.beta});
    if (with_running) {
      out.push_back({prefix + ".running_mean", &b.running_mean});
      out.push_back({prefix + ".running_var", &b.running_var});
    }
  };
  auto lstm = [&](const std::string& prefix, auto& l) {
    out.push_back({prefix + ".w_f", &l.w_f});
    out.push_back({prefix + ".w_i", &l.w_i});
    out.push_back({prefix + ".w_o", &l.w_o});
    out.push_back({prefix + ".w_c", &l.w_c});
    out.push_back({prefix + ".b_f", &l.b_f});
    out.push_back({prefix + ".b_i", &l.b_i});
    out.push_back({prefix + ".b_o", &l.b_o});
    out.push_back({prefix + ".b_c", &l.b_c});
  };
  out.push_back({"temporal.w", &p.temporal_w});
  out.push_back({"temporal.b", &p.temporal_b});
  bn("bn_temporal", p.bn_temporal);
  out.push_back({"spatial.w", &p.spatial_w});
  bn("bn_spatial", p.bn_spatial);
  lstm("lstm_fwd", p.lstm_fwd);
  lstm("lstm_bwd", p.lstm_bwd);
  out.push_back({"out.w", &p.out_w});
  out.push_back({"out.b", &p.out_b});
  return out;
}

Array filled(ad::Shape shape, double v) {
  const std::size_t n = ad::numel(shape);
  return {std::move(shape), std::vector<double>(n, v)};
}

Array glorot(Rng& rng, ad::Shape shape, double fan_in, double fan_out) {
  Array a = filled(std::move(shape), 0.0);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : a.data) v = rng.uniform(-limit, limit);
  return a;
}

BatchNormParams identity_bn(std::size_t features) {
  return {filled({features}, 1.0), filled({features}, 0.0), filled({features}, 0.0),
          filled({features}, 1.0)};
}

LstmParams init_lstm(Rng& rng, std::size_t hidden, std::size_t input) {
  const auto fan_in = static_cast<double>(hidden + input);
  const auto fan_out = static_cast<double>(hidden);
  LstmParams l;
  l.w_f = glorot(rng, {hidden, hidden + input}, fan_in, fan_out);
  l.w_i = glorot(rng, {hidden, hidden + input}, fan_in, fan_out);
  l.w_o = glorot(rng, {hidden, hidden + input}, fan_in, fan_out);
  l.w_c = glorot(rng, {hidden, hidden + input}, fan_in, fan_out);
  l.b_f = filled({hidden}, 1.0);
  l.b_i = filled({hidden}, 0.0);
  l.b_o = filled({hidden}, 0.0);
  l.b_c = filled({hidden}, 0.0);
  return l;
}

Tensor leaf(ad::Graph& g, const Array& a, bool trainable, std::vector<Tensor>* leaves) {
  Tensor t = trainable ? g.variable(a.shape, a.data) : g.constant(a.shape, a.data);
  if (leaves) leaves->push_back(t);
  return t;
}

Tensor dropout_mask(ad::Graph& g, ad::Shape shape, double rate, Rng& rng) {
  std::vector<double> mask(ad::numel(shape));
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return g.constant(std::move(shape), std::move(mask));
}

}  // namespace

std::vector<ModelParams::Entry> ModelParams::trainable() {
  return collect<ModelParams, Entry>(*this, false);
}
std::vector<ModelParams::ConstEntry> ModelParams::trainable() const {
  return collect<const ModelParams, ConstEntry>(*this, false);
}
std::vector<ModelParams::ConstEntry> ModelParams::all_arrays() const {
  return collect<const ModelParams, ConstEntry>(*this, true);
}
std::vector<ModelParams::Entry> ModelParams::all_arrays() {
  return collect<ModelParams, Entry>(*this, true);
}

ModelParams init_params(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t F1 = cfg.n_temporal_filters, D = cfg.depth_multiplier;
  const std::size_t C = cfg.n_channels, nt = cfg.segment_len, H = cfg.lstm_hidden;
  const std::size_t K = cfg.feature_width();
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  ModelParams p;
  p.arch = cfg;
  // Fans follow the usual conv-kernel convention: receptive field x in/out maps.
  p.temporal_w = glorot(rng, {F1, 1, nt}, d(nt), d(nt * F1));
  p.temporal_b = filled({F1}, 0.0);
  p.bn_temporal = identity_bn(F1);
  p.spatial_w = glorot(rng, {F1, D, C}, d(C * F1), d(C * D));
  p.bn_spatial = identity_bn(K);
  p.lstm_fwd = init_lstm(rng, H, K);
  p.lstm_bwd = init_lstm(rng, H, K);
  p.out_w = glorot(rng, {cfg.n_classes, 2 * H}, d(2 * H), d(cfg.n_classes));
  p.out_b = filled({cfg.n_classes}, 0.0);
  return p;
}

std::size_t param_count(const ArchConfig& cfg) {
  const std::size_t F1 = cfg.n_temporal_filters, D = cfg.depth_multiplier;
  const std::size_t C = cfg.n_channels, nt = cfg.segment_len, H = cfg.lstm_hidden;
  const std::size_t K = F1 * D;
  const std::size_t front = F1 * nt + F1   // temporal kernels + bias
                            + 2 * F1       // BN gamma/beta
                            + F1 * D * C   // depthwise spatial kernels
                            + 2 * K;       // BN gamma/beta
  const std::size_t lstm = 2 * (4 * H * (H + K) + 4 * H);
  const std::size_t head = cfg.n_classes * 2 * H + cfg.n_classes;
  return front + lstm + head;
}

std::size_t param_count_conv_head(const ArchConfig& cfg) {
  const std::size_t F1 = cfg.n_temporal_filters, D = cfg.depth_multiplier;
  const std::size_t C = cfg.n_channels, nt = cfg.segment_len, H = cfg.lstm_hidden;
  const std::size_t K = F1 * D;
  const std::size_t front = F1 * nt + F1 + 2 * F1 + F1 * D * C + 2 * K;
  const std::size_t conv = cfg.n_segments() * K * (2 * H) + 2 * H;
  const std::size_t head = cfg.n_classes * 2 * H + cfg.n_classes;
  return front + conv + head;
}

std::vector<std::vector<double>> segment(std::span<const double> x, std::size_t n_channels,
                                         std::size_t n_time, std::size_t segment_len) {
  if (x.size() != n_channels * n_time) throw std::invalid_argument("segment: input size mismatch");
  if (segment_len == 0 || n_time % segment_len != 0) {
    throw std::invalid_argument("segment: n_time not divisible by segment length");
  }
  const std::size_t n_seg = n_time / segment_len;
  std::vector<std::vector<double>> out(n_seg, std::vector<double>(n_channels * segment_len));
  for (std::size_t s = 0; s < n_seg; ++s) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      for (std::size_t k = 0; k < segment_len; ++k) {
        out[s][c * segment_len + k] = x[c * n_time + s * segment_len + k];
      }
    }
  }
  return out;
}

LstmTensors bind_lstm(ad::Graph& g, const LstmParams& p, bool trainable,
                      std::vector<Tensor>* leaves) {
  const std::array<Tensor, 4> w{leaf(g, p.w_f, trainable, leaves), leaf(g, p.w_i, trainable, leaves),
                                leaf(g, p.w_o, trainable, leaves), leaf(g, p.w_c, trainable, leaves)};
  const std::array<Tensor, 4> b{leaf(g, p.b_f, trainable, leaves), leaf(g, p.b_i, trainable, leaves),
                                leaf(g, p.b_o, trainable, leaves), leaf(g, p.b_c, trainable, leaves)};
  const std::size_t H = p.b_f.data.size();
  LstmTensors t;
  t.hidden = H;
  t.weights_t = ad::transpose(ad::concat(w, 0));
  t.bias = ad::reshape(ad::concat(b, 0), {1, 4 * H});
  return t;
}

ParamTensors bind_params(ad::Graph& g, const ModelParams& p, bool trainable) {
  ParamTensors t;
  auto* leaves = &t.leaves;
  t.temporal_w = leaf(g, p.temporal_w, trainable, leaves);
  t.temporal_b = leaf(g, p.temporal_b, trainable, leaves);
  t.bn_temporal.gamma = leaf(g, p.bn_temporal.gamma, trainable, leaves);
  t.bn_temporal.beta = leaf(g, p.bn_temporal.beta, trainable, leaves);
  t.spatial_w = leaf(g, p.spatial_w, trainable, leaves);
  t.bn_spatial.gamma = leaf(g, p.bn_spatial.gamma, trainable, leaves);
  t.bn_spatial.beta = leaf(g, p.bn_spatial.beta, trainable, leaves);
  t.lstm_fwd = bind_lstm(g, p.lstm_fwd, trainable, leaves);
  t.lstm_bwd = bind_lstm(g, p.lstm_bwd, trainable, leaves);
  t.out_w = leaf(g, p.out_w, trainable, leaves);
  t.out_b = leaf(g, p.out_b, trainable, leaves);
  return t;
}

Tensor temporal_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t segment_len) {
  const auto& s = x.shape();
  if (s.size() != 3 || segment_len == 0 || s[2] % segment_len != 0) {
    throw ad::ShapeError("temporal_conv: input " + ad::shape_str(s) +
                         " cannot be cut into segments of " + std::to_string(segment_len));
  }
  const std::size_t F1 = w.shape().front();
  if (w.size() != F1 * segment_len) throw ad::ShapeError("temporal_conv", x.shape(), w.shape());
  const std::size_t rows = s[0] * s[1] * (s[2] / segment_len);
  Tensor segments = ad::reshape(x, {rows, segment_len});
  Tensor kernels = ad::transpose(ad::reshape(w, {F1, segment_len}));
  return ad::add(ad::matmul(segments, kernels), b);
}

Tensor spatial_depthwise_conv(const Tensor& y, const Tensor& w) { return ad::depthwise_mix(y, w); }

Tensor batch_norm(const Tensor& x, const BatchNormTensors& t, const BatchNormParams& p, Mode mode,
                  double eps, ad::BatchStats* stats) {
  if (mode == Mode::Train) return ad::batch_norm_train(x, t.gamma, t.beta, eps, stats);
  return ad::batch_norm_infer(x, t.gamma, t.beta, p.running_mean.data, p.running_var.data, eps);
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmTensors& w) {
  const std::size_t H = w.hidden;
  const std::array<Tensor, 2> hx{state.h, x};
  Tensor z = ad::add(ad::matmul(ad::concat(hx, 1), w.weights_t), w.bias);
  Tensor f = ad::sigmoid(ad::slice(z, 1, 0, H));
  Tensor i = ad::sigmoid(ad::slice(z, 1, H, H));
  Tensor o = ad::sigmoid(ad::slice(z, 1, 2 * H, H));
  Tensor c_tilde = ad::tanh(ad::slice(z, 1, 3 * H, H));
  Tensor c = ad::add(ad::mul(f, state.c), ad::mul(i, c_tilde));
  Tensor h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

Tensor bilstm(std::span<const Tensor> steps, const LstmTensors& fwd, const LstmTensors& bwd) {
  if (steps.empty()) throw std::invalid_argument("bilstm: empty sequence");
  ad::Graph& g = steps.front().graph();
  const std::size_t B = steps.front().shape().front();
  auto zero_state = [&](std::size_t H) {
    return LstmState{g.constant({B, H}, std::vector<double>(B * H, 0.0)),
                     g.constant({B, H}, std::vector<double>(B * H, 0.0))};
  };
  LstmState sf = zero_state(fwd.hidden);
  for (const auto& x : steps) sf = lstm_cell(x, sf, fwd);
  LstmState sb = zero_state(bwd.hidden);
  for (std::size_t i = steps.size(); i-- > 0;) sb = lstm_cell(steps[i], sb, bwd);
  const std::array<Tensor, 2> both{sf.h, sb.h};
  return ad::concat(both, 1);
}

ForwardResult forward(const Tensor& x, const ParamTensors& t, const ModelParams& p,
                      const ForwardOptions& options) {
  const ArchConfig& a = p.arch;
  const auto& s = x.shape();
  if (s.size() != 3 || s[1] != a.n_channels || s[2] != a.n_time) {
    throw ad::ShapeError("forward: expected [B, " + std::to_string(a.n_channels) + ", " +
                         std::to_string(a.n_time) + "], got " + ad::shape_str(s));
  }
  const std::size_t B = s[0], C = a.n_channels, S = a.n_segments();
  const std::size_t F1 = a.n_temporal_filters, K = a.feature_width();
  const bool train = options.mode == Mode::Train;
  const bool drop = train && options.dropout && a.dropout_rate > 0.0;
  Rng rng(options.dropout_seed);
  ForwardResult r;

  Tensor z = temporal_conv(x, t.temporal_w, t.temporal_b, a.segment_len);
  z = batch_norm(z, t.bn_temporal, p.bn_temporal, options.mode, a.bn_epsilon,
                 train ? &r.bn_temporal_stats : nullptr);
  z = spatial_depthwise_conv(ad::reshape(z, {B, C, S, F1}), t.spatial_w);
  z = ad::elu(z);
  z = batch_norm(z, t.bn_spatial, p.bn_spatial, options.mode, a.bn_epsilon,
                 train ? &r.bn_spatial_stats : nullptr);
  if (drop) z = ad::mul(z, dropout_mask(x.graph(), {B * S, K}, a.dropout_rate, rng));

  Tensor seq = ad::reshape(z, {B, S, K});
  std::vector<Tensor> steps;
  steps.reserve(S);
  for (std::size_t i = 0; i < S; ++i) steps.push_back(ad::reshape(ad::slice(seq, 1, i, 1), {B, K}));
  Tensor summary = bilstm(steps, t.lstm_fwd, t.lstm_bwd);
  if (drop) {
    summary = ad::mul(summary, dropout_mask(x.graph(), {B, 2 * a.lstm_hidden}, a.dropout_rate, rng));
  }
  r.logits = ad::add(ad::matmul(summary, ad::transpose(t.out_w)), t.out_b);
  r.probs = ad::softmax(r.logits, 1);
  return r;
}

void update_running_stats(ModelParams& p, const ForwardResult& r) {
  const double m = p.arch.bn_momentum;
  auto blend = [m](BatchNormParams& bn, const ad::BatchStats& st) {
    if (st.mean.size() != bn.running_mean.data.size()) return;
    for (std::size_t f = 0; f < st.mean.size(); ++f) {
      bn.running_mean.data[f] = (1.0 - m) * bn.running_mean.data[f] + m * st.mean[f];
      bn.running_var.data[f] = (1.0 - m) * bn.running_var.data[f] + m * st.var[f];
    }
  };
  blend(p.bn_temporal, r.bn_temporal_stats);
  blend(p.bn_spatial, r.bn_spatial_stats);
}

Tensor batch_input(ad::Graph& g, const EpochSet& es, std::span<const std::size_t> trials) {
  std::vector<double> buf;
  buf.reserve(trials.size() * es.trial_size());
  for (std::size_t i : trials) {
    auto tr = es.trial(i);
    buf.insert(buf.end(), tr.begin(), tr.end());
  }
  return g.constant({trials.size(), es.n_channels(), es.n_time}, std::move(buf));
}

std::vector<double> predict_proba(const ModelParams& p, const EpochSet& es, std::size_t batch_size) {
  if (es.n_channels() != p.arch.n_channels || es.n_time != p.arch.n_time) {
    throw ad::ShapeError("predict: epoch shape [" + std::to_string(es.n_channels()) + ", " +
                         std::to_string(es.n_time) + "] does not match the architecture");
  }
  std::vector<double> out;
  out.reserve(es.n_trials() * p.arch.n_classes);
  for (std::size_t start = 0; start < es.n_trials(); start += batch_size) {
    const std::size_t end = std::min(es.n_trials(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    ad::Graph g;
    const auto t = bind_params(g, p, false);
    const auto r = forward(batch_input(g, es, idx), t, p, {Mode::Infer, 0, false});
    const auto v = r.probs.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<int> predict(const ModelParams& p, const EpochSet& es) {
  const auto probs = predict_proba(p, es);
  const std::size_t K = p.arch.n_classes;
  std::vector<int> labels(es.n_trials());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (probs[i * K + k] > probs[i * K + best]) best = k;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace eegdecode
