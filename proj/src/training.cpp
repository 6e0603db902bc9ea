#include "eegdecode/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegdecode/rng.hpp"
#include "eegdecode/split.hpp"

namespace eegdecode {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (batch norm)");
  if (!(lr_reduced > 0.0 && lr_reduced < lr_initial)) {
    throw std::invalid_argument("learning rates must satisfy 0 < lr_reduced < lr_initial");
  }
  if (patience_for_drop < 1) throw std::invalid_argument("patience_for_drop must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
  if (!(fine_tune_fraction >= 0.0 && fine_tune_fraction <= 1.0)) {
    throw std::invalid_argument("fine_tune_fraction must lie in [0, 1]");
  }
}

void TrainHistory::validate() const {
  const std::size_t n = lr.size();
  if (train_loss.size() != n || train_acc.size() != n || val_acc.size() != n) {
    throw std::logic_error("history columns have different lengths");
  }
  if (best_epoch > n) throw std::logic_error("best_epoch beyond the epochs run");
  auto in_unit = [](double a) { return a >= 0.0 && a <= 1.0; };
  if (!std::all_of(train_acc.begin(), train_acc.end(), in_unit) ||
      !std::all_of(val_acc.begin(), val_acc.end(), in_unit) || !in_unit(initial_val_acc)) {
    throw std::logic_error("accuracy outside [0, 1]");
  }
  std::size_t changes = 0;
  for (std::size_t e = 1; e < n; ++e) {
    if (lr[e] > lr[e - 1]) throw std::logic_error("learning rate increased");
    if (lr[e] != lr[e - 1]) ++changes;
  }
  if (changes > 1) throw std::logic_error("learning rate took more than two values");
}

NonFiniteLossError::NonFiniteLossError(std::size_t epoch_, std::size_t batch_, double loss)
    : std::runtime_error("non-finite training loss " + std::to_string(loss) + " at epoch " +
                         std::to_string(epoch_) + ", batch " + std::to_string(batch_)),
      epoch(epoch_),
      batch(batch_) {}

double cross_entropy(std::span<const double> probs, std::span<const int> labels,
                     std::size_t n_classes) {
  if (labels.empty() || probs.size() != labels.size() * n_classes) {
    throw std::invalid_argument("cross_entropy: probs must be [n x K] with n = labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[i]) +
                                  " out of range");
    }
    total -= std::log(probs[i * n_classes + static_cast<std::size_t>(labels[i])]);
  }
  return total / static_cast<double>(labels.size());
}

ad::Tensor cross_entropy_loss(const ad::Tensor& logits, std::span<const int> labels) {
  const auto& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size() || labels.empty()) {
    throw ad::ShapeError("cross_entropy_loss: logits " + ad::shape_str(s) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t K = s[1];
  std::vector<double> onehot(labels.size() * K, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= K) {
      throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(labels[i]) +
                                  " out of range");
    }
    onehot[i * K + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  ad::Tensor target = logits.graph().constant(s, std::move(onehot));
  ad::Tensor picked = ad::sum(ad::mul(ad::log_softmax(logits, 1), target));
  return ad::scale(picked, -1.0 / static_cast<double>(labels.size()));
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: block count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state mismatch");
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != p.size() || m.size() != p.size()) {
      throw std::invalid_argument("adam_step: shape mismatch in block " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

double lr_schedule(std::span<const double> val_acc, const TrainConfig& cfg) {
  std::size_t run = 0;
  for (std::size_t e = 1; e < val_acc.size(); ++e) {
    run = val_acc[e] < val_acc[e - 1] ? run + 1 : 0;
    if (run >= cfg.patience_for_drop) return cfg.lr_reduced;
  }
  return cfg.lr_initial;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: prediction and label counts differ");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

bool is_front_end(const std::string& name) {
  return name.starts_with("temporal.") || name.starts_with("spatial.") ||
         name.starts_with("bn_");
}

/// Mini-batches of a shuffled order; a trailing batch of one trial is merged
/// into its predecessor so batch norm always sees >= 2 trials.
std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() >= 2 && batches.back().size() < 2) {
    auto last = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), last.begin(), last.end());
  }
  return batches;
}

struct LoopOptions {
  bool scheduled = true;  // lr_schedule from lr_initial; otherwise fixed_lr
  double fixed_lr = 0.0;
  bool start_is_candidate = false;
  bool freeze_front_end = false;
};

TrainResult run_loop(ModelParams params, const EpochSet& train_set, const EpochSet& val_set,
                     const TrainConfig& cfg, const LoopOptions& opt) {
  cfg.validate();
  if (train_set.n_trials() < 2) throw std::invalid_argument("training set needs >= 2 trials");
  if (val_set.n_trials() == 0) throw std::invalid_argument("validation set is empty");
  const std::size_t K = params.arch.n_classes;
  for (int l : train_set.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= K) {
      throw std::invalid_argument("training label " + std::to_string(l) + " out of range");
    }
  }

  TrainResult out;
  TrainHistory& h = out.history;
  h.initial_val_acc = accuracy(predict(params, val_set), val_set.labels);
  double best_acc = opt.start_is_candidate ? h.initial_val_acc : -1.0;
  if (opt.start_is_candidate) out.params = params;

  AdamState adam;
  const auto names = params.trainable();
  std::vector<bool> frozen(names.size(), false);
  for (std::size_t k = 0; k < names.size(); ++k) {
    frozen[k] = opt.freeze_front_end && is_front_end(names[k].name);
  }

  std::vector<std::size_t> order(train_set.n_trials());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = opt.scheduled ? lr_schedule(h.val_acc, cfg) : opt.fixed_lr;
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(derive_seed(cfg.seed, epoch));
    shuffler.shuffle(order);
    const auto batches = make_batches(order, cfg.batch_size);

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set.labels[idx[i]];

      ad::Graph g;
      const ParamTensors t = bind_params(g, params, true);
      ForwardOptions fo;
      fo.mode = Mode::Train;
      fo.dropout_seed = derive_seed(derive_seed(cfg.seed, epoch), 0x10000 + b);
      const ForwardResult r = forward(batch_input(g, train_set, idx), t, params, fo);
      const ad::Tensor loss = cross_entropy_loss(r.logits, labels);
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw NonFiniteLossError(epoch, b + 1, lv);
      g.backward(loss);

      const auto probs = r.probs.values();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = probs.subspan(i * K, K);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        hits += best == labels[i];
      }
      loss_sum += lv * static_cast<double>(idx.size());

      auto entries = params.trainable();
      std::vector<std::span<double>> p;
      std::vector<std::span<const double>> gr;
      for (std::size_t k = 0; k < entries.size(); ++k) {
        if (frozen[k]) continue;
        p.emplace_back(entries[k].array->data);
        gr.emplace_back(t.leaves[k].grad());
      }
      adam_step(p, gr, adam, lr, cfg);
      if (!opt.freeze_front_end) update_running_stats(params, r);
    }

    const double n = static_cast<double>(train_set.n_trials());
    h.train_loss.push_back(loss_sum / n);
    h.train_acc.push_back(static_cast<double>(hits) / n);
    h.val_acc.push_back(accuracy(predict(params, val_set), val_set.labels));
    h.lr.push_back(lr);
    if (h.val_acc.back() > best_acc) {
      best_acc = h.val_acc.back();
      h.best_epoch = epoch;
      out.params = params;
    }
  }
  h.validate();
  return out;
}

}  // namespace

TrainResult train(const ArchConfig& arch, const EpochSet& train_set, const EpochSet& val_set,
                  const TrainConfig& cfg) {
  return run_loop(init_params(arch, derive_seed(cfg.seed, 0x1A17)), train_set, val_set, cfg, {});
}

TrainResult continue_training(const ModelParams& init, const EpochSet& train_set,
                              const EpochSet& val_set, const TrainConfig& cfg, double lr) {
  LoopOptions opt;
  opt.scheduled = false;
  opt.fixed_lr = lr;
  opt.start_is_candidate = true;
  opt.freeze_front_end = cfg.fine_tune_freeze_front_end;
  return run_loop(init, train_set, val_set, cfg, opt);
}

FineTuneResult fine_tune(const ModelParams& base, const EpochSet& pool, double fraction,
                         const TrainConfig& cfg) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fine-tune fraction must lie in (0, 1]");
  }
  if (pool.n_channels() != base.arch.n_channels || pool.n_time != base.arch.n_time) {
    throw std::invalid_argument("fine-tune data shape does not match the base model");
  }
  const auto selected = stratified_sample(pool.labels, fraction, derive_seed(cfg.seed, 0xF17E));

  // Per class: a quarter (at least one) of the selected trials for checkpoint selection.
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(base.arch.n_classes));
  for (std::size_t i : selected) by_class.at(static_cast<std::size_t>(pool.labels[i])).push_back(i);
  FineTuneResult out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw std::invalid_argument("fine-tune fraction " + std::to_string(fraction) +
                                  " leaves class " + std::to_string(c) +
                                  " with fewer than 2 trials (need one to train, one to validate)");
    }
    const std::size_t n_val =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(members.size() / 4.0)), 1,
                                members.size() - 1);
    out.val_indices.insert(out.val_indices.end(), members.begin(),
                           members.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train_indices.insert(out.train_indices.end(),
                             members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.val_indices.begin(), out.val_indices.end());
  require_disjoint(out.train_indices, out.val_indices, "fine-tune train/validation");

  TrainConfig ft = cfg;
  ft.seed = derive_seed(cfg.seed, 0xF1E0);
  ft.batch_size = std::min(cfg.batch_size, std::max<std::size_t>(2, out.train_indices.size()));
  auto r = continue_training(base, subset(pool, out.train_indices), subset(pool, out.val_indices),
                             ft, cfg.lr_reduced);
  out.params = std::move(r.params);
  out.history = std::move(r.history);
  return out;
}

}  // namespace eegdecode
