#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "eegdecode/split.hpp"
#include "eegdecode/synthgen.hpp"
#include "eegdecode/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace eegdecode;
using ad::Graph;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.n_temporal_filters = 4;
  a.lstm_hidden = 6;
  return a;
}

// Low-noise, well separated subject at the default input shape.
EpochSet separable_subject(std::size_t n, std::uint64_t seed) {
  CohortConfig cc;
  cc.separability = 2.0;
  cc.inter_subject_shift = 0.0;
  cc.seed = seed;
  auto prof = draw_profile(cc, 0);
  prof.noise_level_uv = 0.5;
  return generate_subject(prof, n);
}

}  // namespace

TEST_CASE("cross entropy") {
  SUBCASE("uniform probabilities") {
    const std::vector<double> p(12, 1.0 / 3.0);
    const std::vector<int> y = {0, 1, 2, 1};
    CHECK(cross_entropy(p, y, 3) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  }
  SUBCASE("one-hot correct") {
    const std::vector<double> p = {1, 0, 0, 0, 0, 1};
    const std::vector<int> y = {0, 2};
    CHECK(cross_entropy(p, y, 3) == 0.0);
  }
  SUBCASE("graph loss from logits matches the direct formula") {
    const std::size_t B = 9, K = 3;
    const auto logits = testutil::randn(B * K, 1, 3.0);
    std::vector<int> y;
    for (std::size_t i = 0; i < B; ++i) y.push_back(static_cast<int>((i * 5) % 3));
    double ref = 0;
    for (std::size_t i = 0; i < B; ++i) {
      double z = 0;
      for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[i * K + k]);
      ref -= std::log(std::exp(logits[i * K + y[i]]) / z);
    }
    ref /= B;
    Graph g;
    const double got = cross_entropy_loss(g.constant({B, K}, logits), y).item();
    CHECK(std::abs(got - ref) < 1e-12);
    const auto probs = ad::softmax(g.constant({B, K}, logits), 1).values();
    CHECK(std::abs(cross_entropy(probs, y, K) - ref) < 1e-12);
  }
  SUBCASE("label out of range") {
    const std::vector<double> p(6, 1.0 / 3.0);
    const std::vector<int> y = {0, 3};
    CHECK_THROWS_AS(cross_entropy(p, y, 3), std::invalid_argument);
    Graph g;
    CHECK_THROWS_AS(cross_entropy_loss(g.constant({2, 3}, p), y), std::invalid_argument);
  }
}

TEST_CASE("Adam") {
  TrainConfig cfg;
  SUBCASE("first step with unit gradient") {
    std::vector<double> theta = {0.0};
    const std::vector<double> g = {1.0};
    AdamState st;
    std::vector<std::span<double>> ps = {theta};
    std::vector<std::span<const double>> gs = {g};
    adam_step(ps, gs, st, 0.1, cfg);
    CHECK(st.t == 1);
    CHECK(theta[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("zero gradient leaves parameters and decays moments") {
    std::vector<double> theta = {1.0, -2.0};
    std::vector<double> g = {0.5, -0.5};
    AdamState st;
    std::vector<std::span<double>> ps = {theta};
    std::vector<std::span<const double>> gs = {g};
    adam_step(ps, gs, st, 0.01, cfg);
    const auto after = theta;
    const auto m = st.m[0], v = st.v[0];
    std::fill(g.begin(), g.end(), 0.0);
    adam_step(ps, gs, st, 0.01, cfg);
    // The update still moves by the decayed first moment, so compare the moments.
    CHECK(st.m[0][0] == doctest::Approx(0.9 * m[0]).epsilon(1e-15));
    CHECK(st.v[0][1] == doctest::Approx(0.999 * v[1]).epsilon(1e-15));
    AdamState fresh;
    std::vector<double> t2 = {3.0};
    std::vector<double> z = {0.0};
    std::vector<std::span<double>> p2 = {t2};
    std::vector<std::span<const double>> g2 = {z};
    adam_step(p2, g2, fresh, 0.1, cfg);
    CHECK(t2[0] == 3.0);
    CHECK(after != theta);
  }
  SUBCASE("five steps on theta^2 against the scalar oracle") {
    std::vector<double> theta = {1.0};
    AdamState st;
    oracle::ScalarAdam ref;
    double r = 1.0;
    for (int k = 0; k < 5; ++k) {
      const std::vector<double> g = {2.0 * theta[0]};
      std::vector<std::span<double>> ps = {theta};
      std::vector<std::span<const double>> gs = {g};
      adam_step(ps, gs, st, 0.1, cfg);
      r = ref.step(r, 2.0 * r, 0.1);
      CHECK(std::abs(theta[0] - r) < 1e-12);
    }
  }
  SUBCASE("mismatched blocks") {
    std::vector<double> theta = {1.0, 2.0};
    const std::vector<double> g = {1.0};
    AdamState st;
    std::vector<std::span<double>> ps = {theta};
    std::vector<std::span<const double>> gs = {g};
    CHECK_THROWS_AS(adam_step(ps, gs, st, 0.1, cfg), std::invalid_argument);
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  auto lr = [&](std::vector<double> v) { return lr_schedule(v, cfg); };
  CHECK(lr({}) == 0.1);
  CHECK(lr({.4, .5, .6}) == 0.1);
  CHECK(lr({.4, .5, .45}) == 0.1);
  CHECK(lr({.4, .5, .45, .40}) == 0.01);
  CHECK(lr({.4, .5, .45, .40, .9, .95}) == 0.01);  // never reverts
  CHECK(lr({.4, .35, .5, .45}) == 0.1);
  CHECK(lr({.4, .4, .4, .4}) == 0.1);  // ties are not decreases
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_reduced = 0.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.max_epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("accuracy") {
  const std::vector<int> y = {0, 1, 2};
  CHECK(accuracy(y, y) == 1.0);
  CHECK(accuracy(std::vector<int>{1, 2, 0}, y) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 0}, y) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(accuracy(std::vector<int>{0}, y), std::invalid_argument);
  // Uniform random guesses on balanced labels sit at chance.
  Rng rng(3);
  std::vector<int> guess, truth;
  for (int i = 0; i < 10000; ++i) {
    truth.push_back(i % 3);
    guess.push_back(static_cast<int>(rng.index(3)));
  }
  CHECK(accuracy(guess, truth) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("one small step lowers the loss of a single example") {
  const ArchConfig a;
  auto p = init_params(a, 5);
  const auto es = testutil::random_epochs(1, 9, 256, 6);
  const std::vector<std::size_t> idx = {0};
  auto loss_of = [&](const ModelParams& q, bool step) {
    Graph g;
    const auto t = bind_params(g, q, true);
    const auto r = forward(batch_input(g, es, idx), t, q, {Mode::Infer, 0, false});
    const auto loss = cross_entropy_loss(r.logits, es.labels);
    if (step) {
      g.backward(loss);
      auto entries = p.trainable();
      std::vector<std::span<double>> ps;
      std::vector<std::span<const double>> gs;
      for (std::size_t k = 0; k < entries.size(); ++k) {
        ps.emplace_back(entries[k].array->data);
        gs.push_back(t.leaves[k].grad());
      }
      AdamState st;
      adam_step(ps, gs, st, 1e-4, TrainConfig{});
    }
    return loss.item();
  };
  const double before = loss_of(p, true);
  const double after = loss_of(p, false);
  CHECK(after < before);
}

TEST_CASE("training loop") {
  const auto a = tiny_arch();
  const auto es = testutil::random_epochs(40, 9, 256, 7);
  std::vector<std::size_t> tr(30), va(10);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(va.begin(), va.end(), 30);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 8;
  cfg.lr_initial = 0.01;
  cfg.lr_reduced = 0.001;
  cfg.seed = 9;

  SUBCASE("bit-reproducible") {
    const auto r1 = train(a, subset(es, tr), subset(es, va), cfg);
    const auto r2 = train(a, subset(es, tr), subset(es, va), cfg);
    CHECK(r1.history == r2.history);
    CHECK(r1.params == r2.params);
    cfg.seed = 10;
    CHECK_FALSE(train(a, subset(es, tr), subset(es, va), cfg).history == r1.history);
  }
  SUBCASE("history invariants and epoch cap") {
    cfg.max_epochs = 7;
    const auto r = train(a, subset(es, tr), subset(es, va), cfg);
    CHECK(r.history.epochs() == 7);
    CHECK(r.history.train_loss.size() == 7);
    CHECK_NOTHROW(r.history.validate());
    CHECK(r.history.best_epoch >= 1);
    CHECK(r.history.best_epoch <= 7);
    const double best = *std::max_element(r.history.val_acc.begin(), r.history.val_acc.end());
    CHECK(r.history.val_acc[r.history.best_epoch - 1] == best);
    // Earliest epoch wins ties.
    for (std::size_t e = 0; e + 1 < r.history.best_epoch; ++e) CHECK(r.history.val_acc[e] < best);
    CHECK(accuracy(predict(r.params, subset(es, va)), subset(es, va).labels) == best);
  }
  SUBCASE("empty split") {
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS(train(a, subset(es, none), subset(es, va), cfg), std::invalid_argument);
    CHECK_THROWS_AS(train(a, subset(es, tr), subset(es, none), cfg), std::invalid_argument);
  }
  SUBCASE("non-finite loss reports where it happened") {
    auto bad = es;
    bad.data[5] = std::numeric_limits<double>::quiet_NaN();
    try {
      train(a, subset(bad, tr), subset(bad, va), cfg);
      FAIL("expected NonFiniteLossError");
    } catch (const NonFiniteLossError& e) {
      CHECK(e.epoch == 1);
      CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
  }
  SUBCASE("lr history shows the single drop") {
    TrainHistory h;
    h.val_acc = {0.5, 0.4, 0.3, 0.6};
    h.train_acc = {0.5, 0.5, 0.5, 0.5};
    h.train_loss = {1, 1, 1, 1};
    h.lr = {0.1, 0.1, 0.1, 0.01};
    CHECK_NOTHROW(h.validate());
    h.lr = {0.1, 0.01, 0.1, 0.01};
    CHECK_THROWS_AS(h.validate(), std::logic_error);
  }
}

TEST_CASE("overfits a 32-trial separable set") {
  const ArchConfig a;
  const auto es = separable_subject(32, 21);
  TrainConfig cfg;
  cfg.seed = 1;
  const auto r = train(a, es, es, cfg);
  CHECK(r.history.epochs() <= 100);
  CHECK(accuracy(predict(r.params, es), es.labels) == 1.0);
}

TEST_CASE("fine-tuning") {
  const auto a = tiny_arch();
  CohortConfig cc;
  const auto pool = generate_subject(draw_profile(cc, 0), 120);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.lr_initial = 0.01;
  cfg.lr_reduced = 0.001;
  cfg.seed = 4;
  const auto base = init_params(a, 2);

  SUBCASE("uses a stratified fraction and never reads the rest") {
    const auto r = fine_tune(base, pool, 0.2, cfg);
    std::set<std::size_t> used(r.train_indices.begin(), r.train_indices.end());
    used.insert(r.val_indices.begin(), r.val_indices.end());
    CHECK(used.size() == 24);
    CHECK(r.val_indices.size() == 6);  // a quarter of 8 per class
    std::array<int, 3> per_class{};
    for (auto i : used) ++per_class[pool.labels[i]];
    CHECK(per_class == std::array<int, 3>{8, 8, 8});
    CHECK(r.history.lr.front() == cfg.lr_reduced);

    auto poisoned = pool;
    for (std::size_t i = 0; i < pool.n_trials(); ++i) {
      if (used.count(i)) continue;
      for (double& v : poisoned.trial(i)) v = std::numeric_limits<double>::quiet_NaN();
    }
    const auto r2 = fine_tune(base, poisoned, 0.2, cfg);
    CHECK(r2.params == r.params);
    CHECK(r2.history == r.history);
  }
  SUBCASE("fraction 1 uses the whole pool") {
    const auto r = fine_tune(base, pool, 1.0, cfg);
    CHECK(r.train_indices.size() + r.val_indices.size() == 120);
  }
  SUBCASE("starting parameters compete as epoch 0") {
    const auto r = fine_tune(base, pool, 0.5, cfg);
    CHECK(r.history.initial_val_acc >= 0.0);
    if (r.history.best_epoch == 0) CHECK(r.params == base);
    const double best = *std::max_element(r.history.val_acc.begin(), r.history.val_acc.end());
    CHECK(std::max(best, r.history.initial_val_acc) ==
          accuracy(predict(r.params, subset(pool, r.val_indices)), subset(pool, r.val_indices).labels));
  }
  SUBCASE("too small a fraction") {
    CHECK_THROWS_AS(fine_tune(base, pool, 0.01, cfg), std::invalid_argument);
    CHECK_THROWS_AS(fine_tune(base, pool, 0.0, cfg), std::invalid_argument);
  }
}
