#include <cmath>
#include <numbers>

#include "doctest.h"
#include "eegdecode/baseline.hpp"
#include "eegdecode/rng.hpp"
#include "eegdecode/training.hpp"
#include "test_util.hpp"

using namespace eegdecode;

namespace {

std::vector<double> sine(std::size_t n, double f, double rate, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / rate + phase);
  }
  return x;
}

struct Blobs {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

// Three isotropic Gaussian clusters in `dim` dimensions, centers `spacing`
// sigmas apart along separate axes.
Blobs blobs(std::size_t per_class, std::size_t dim, double spacing, std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const int c = static_cast<int>(i % 3);
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) row[j] = rng.normal();
    row[static_cast<std::size_t>(c) % dim] += spacing;
    b.x.push_back(row);
    b.y.push_back(c);
  }
  return b;
}

}  // namespace

TEST_CASE("band power") {
  const double rate = 256.0;

  SUBCASE("10 Hz sinusoid lands in alpha") {
    const auto x = sine(256, 10.0, rate);
    const double alpha = band_power(x, kAlphaBand, rate);
    const double gamma = band_power(x, kGammaBand, rate);
    CHECK(alpha > 0.0);
    CHECK(alpha / gamma > 100.0);
  }
  SUBCASE("zero signal") {
    const std::vector<double> x(205, 0.0);
    CHECK(band_power(x, kAlphaBand, rate) == 0.0);
    CHECK(band_power(x, kGammaBand, rate) == 0.0);
  }
  SUBCASE("Parseval: power density over (0, Nyquist) integrates to the variance") {
    const std::size_t n = 1 << 16;
    const Band all{rate / static_cast<double>(n), rate / 2.0};
    auto x = testutil::randn(n, 13, 2.0);
    double m = 0.0, var = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    for (double& v : x) v -= m;
    for (double v : x) var += v * v;
    var /= static_cast<double>(n);
    const double total = band_power(x, all, rate) * (all.high_hz - all.low_hz);
    CHECK(std::abs(total - var) / var < 0.01);

    // A bin-aligned sinusoid: exact.
    const auto s = sine(512, 20.0, rate, 3.0, 0.4);
    const Band all_s{rate / 512.0, rate / 2.0};
    CHECK(band_power(s, all_s, rate) * (all_s.high_hz - all_s.low_hz) ==
          doctest::Approx(4.5).epsilon(1e-10));
  }
  SUBCASE("band outside Nyquist") {
    const std::vector<double> x(256, 1.0);
    CHECK_THROWS_AS(band_power(x, Band{30.0, 200.0}, rate), std::invalid_argument);
    CHECK_THROWS_AS(band_power(x, Band{0.0, 10.0}, rate), std::invalid_argument);
    CHECK_THROWS_AS(band_power(x, Band{12.0, 8.0}, rate), std::invalid_argument);
  }
}

TEST_CASE("band power features") {
  auto es = testutil::random_epochs(6, 9, 256, 3);
  const auto f = band_power_features(es);
  REQUIRE(f.size() == 6);
  CHECK(f[0].size() == 18);
  for (const auto& row : f) {
    for (double v : row) CHECK(std::isfinite(v));
  }
  // Only post-stimulus samples count: editing the baseline period changes nothing.
  auto edited = es;
  for (std::size_t c = 0; c < 9; ++c) {
    for (std::size_t t = 0; t < 51; ++t) edited.data[c * 256 + t] += 100.0;
  }
  CHECK(band_power_features(edited)[0] == f[0]);
  // Column layout: alpha for every channel, then gamma.
  const std::size_t first = 51;  // 0 ms
  const std::size_t len = 256 - first;
  const std::span<const double> ch2(es.data.data() + 2 * 256 + first, len);
  CHECK(f[0][2] == doctest::Approx(std::log(band_power(ch2, kAlphaBand, 256.0))));
  CHECK(f[0][9 + 2] == doctest::Approx(std::log(band_power(ch2, kGammaBand, 256.0))));
}

TEST_CASE("linear svm") {
  SUBCASE("well separated blobs") {
    const auto train = blobs(60, 4, 10.0, 1);
    const auto test = blobs(100, 4, 10.0, 2);
    const auto m = svm_fit(train.x, train.y);
    CHECK(m.n_classes == 3);
    CHECK(accuracy(svm_predict(m, test.x), test.y) == 1.0);
  }
  SUBCASE("permuted labels sit at chance") {
    auto train = blobs(500, 4, 3.0, 3);
    auto test = blobs(1000, 4, 3.0, 4);
    Rng rng(5);
    rng.shuffle(train.y);
    rng.shuffle(test.y);
    const auto m = svm_fit(train.x, train.y);
    const double acc = accuracy(svm_predict(m, test.x), test.y);
    CHECK(acc == doctest::Approx(1.0 / 3.0).epsilon(0.15));
  }
  SUBCASE("duplicating every point with C halved keeps the decision function") {
    const auto train = blobs(30, 3, 1.5, 6);
    auto doubled = train;
    doubled.x.insert(doubled.x.end(), train.x.begin(), train.x.end());
    doubled.y.insert(doubled.y.end(), train.y.begin(), train.y.end());
    SvmConfig cfg;
    cfg.c = 2.0;
    const auto m1 = svm_fit(train.x, train.y, cfg);
    cfg.c = 1.0;
    const auto m2 = svm_fit(doubled.x, doubled.y, cfg);
    const auto probe = blobs(50, 3, 1.5, 7);
    for (const auto& row : probe.x) {
      const auto s1 = svm_scores(m1, row);
      const auto s2 = svm_scores(m2, row);
      for (std::size_t k = 0; k < 3; ++k) CHECK(s1[k] == doctest::Approx(s2[k]).epsilon(1e-6));
    }
    CHECK(svm_predict(m1, probe.x) == svm_predict(m2, probe.x));
  }
  SUBCASE("feature scaling is absorbed by standardization") {
    const auto train = blobs(40, 3, 2.0, 8);
    const auto probe = blobs(40, 3, 2.0, 9);
    const std::vector<double> scale = {1e3, 0.01, 7.0};
    auto scaled = [&](std::vector<std::vector<double>> x) {
      for (auto& row : x) {
        for (std::size_t j = 0; j < 3; ++j) row[j] *= scale[j];
      }
      return x;
    };
    const auto m1 = svm_fit(train.x, train.y);
    const auto m2 = svm_fit(scaled(train.x), train.y);
    CHECK(svm_predict(m1, probe.x) == svm_predict(m2, scaled(probe.x)));
  }
  SUBCASE("constant features are dropped and recorded") {
    auto train = blobs(20, 3, 5.0, 10);
    for (auto& row : train.x) row.push_back(4.0);
    const auto m = svm_fit(train.x, train.y);
    CHECK(m.dropped_features == std::vector<std::size_t>{3});
    CHECK(m.kept_features.size() == 3);
  }
  SUBCASE("ties go to the lowest class") {
    auto train = blobs(20, 2, 5.0, 11);
    auto m = svm_fit(train.x, train.y);
    for (auto& w : m.weights) std::fill(w.begin(), w.end(), 0.0);
    std::fill(m.bias.begin(), m.bias.end(), 0.5);
    CHECK(svm_predict(m, {{1.0, 2.0}}) == std::vector<int>{0});
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto train = blobs(30, 3, 1.0, 12);
    const auto a = svm_fit(train.x, train.y);
    const auto b = svm_fit(train.x, train.y);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
  }
  SUBCASE("errors") {
    const std::vector<std::vector<double>> x = {{1.0}, {2.0}, {3.0}};
    CHECK_THROWS_AS(svm_fit(x, std::vector<int>{1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(svm_fit(x, std::vector<int>{0, 1}), std::invalid_argument);
    SvmConfig bad;
    bad.c = 0.0;
    CHECK_THROWS_AS(svm_fit(x, std::vector<int>{0, 1, 0}, bad), std::invalid_argument);
  }
}
