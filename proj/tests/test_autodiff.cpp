#include <doctest.h>

#include <cmath>

#include "eegdecode/autodiff.hpp"
#include "eegdecode/grad_check.hpp"
#include "primitive_checks.hpp"
#include "test_util.hpp"

using namespace eegdecode;
using ad::Graph;
using ad::Tensor;

TEST_CASE("primitive forward values") {
  Graph g;
  CHECK(ad::sigmoid(g.constant({1}, {0.0})).item() == 0.5);
  const auto e = ad::elu(g.constant({2}, {-30.0, 2.0})).values();
  CHECK(e[0] == doctest::Approx(-1.0 + std::exp(-30.0)).epsilon(1e-15));
  CHECK(e[1] == 2.0);
  const auto s = ad::softmax(g.constant({1, 3}, {1, 1, 1}), 1).values();
  for (double v : s) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ad::tanh(g.constant({1}, {0.0})).item() == 0.0);
  CHECK(ad::exp(g.constant({1}, {1.0})).item() == doctest::Approx(std::exp(1.0)));
  CHECK(ad::log(g.constant({1}, {std::exp(2.0)})).item() == doctest::Approx(2.0));

  const auto m = ad::matmul(g.constant({2, 3}, {1, 2, 3, 4, 5, 6}), g.constant({3, 2}, {7, 8, 9, 10, 11, 12})).values();
  CHECK(std::vector<double>(m.begin(), m.end()) == std::vector<double>{58, 64, 139, 154});
  const auto t = ad::transpose(g.constant({2, 3}, {1, 2, 3, 4, 5, 6})).values();
  CHECK(std::vector<double>(t.begin(), t.end()) == std::vector<double>{1, 4, 2, 5, 3, 6});
  const auto sl = ad::slice(g.constant({2, 3}, {1, 2, 3, 4, 5, 6}), 1, 1, 2).values();
  CHECK(std::vector<double>(sl.begin(), sl.end()) == std::vector<double>{2, 3, 5, 6});
  const std::array<Tensor, 2> parts{g.constant({1, 2}, {1, 2}), g.constant({1, 1}, {9})};
  const auto cc = ad::concat(parts, 1).values();
  CHECK(std::vector<double>(cc.begin(), cc.end()) == std::vector<double>{1, 2, 9});
  const auto rs = ad::reduce_sum(g.constant({2, 3}, {1, 2, 3, 4, 5, 6}), 0);
  CHECK(rs.shape() == ad::Shape{1, 3});
  CHECK(rs.values()[2] == 9.0);
  CHECK(ad::reduce_mean(g.constant({2, 3}, {1, 2, 3, 4, 5, 6}), 1).values()[1] == 5.0);
}

TEST_CASE("softmax is normalized and inside (0, 1) even for large logits") {
  Graph g;
  const auto x = testutil::randn(40, 3, 50.0);
  const auto s = ad::softmax(g.constant({8, 5}, x), 1).values();
  for (std::size_t r = 0; r < 8; ++r) {
    double sum = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(s[r * 5 + k] >= 0.0);
      CHECK(s[r * 5 + k] <= 1.0);
      sum += s[r * 5 + k];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  const auto big = ad::softmax(g.constant({1, 2}, {1000.0, 1000.0}), 1).values();
  CHECK(big[0] == 0.5);
}

TEST_CASE("broadcasting add commutes; nested reductions equal the full sum") {
  Graph g;
  const auto a = g.constant({4, 3}, testutil::randn(12, 4));
  const auto b = g.constant({3}, testutil::randn(3, 5));
  const auto ab = ad::add(a, b).values(), ba = ad::add(b, a).values();
  CHECK(std::vector<double>(ab.begin(), ab.end()) == std::vector<double>(ba.begin(), ba.end()));
  const double nested = ad::reduce_sum(ad::reduce_sum(a, 0), 1).item();
  CHECK(nested == doctest::Approx(ad::sum(a).item()).epsilon(1e-14));
}

TEST_CASE("shape errors name the primitive and both shapes") {
  Graph g;
  const auto a = g.constant({2, 3}, std::vector<double>(6, 1.0));
  const auto b = g.constant({4, 2}, std::vector<double>(8, 1.0));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ad::ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, b), ad::ShapeError);
  CHECK_THROWS_AS(ad::reshape(a, {5}), ad::ShapeError);
  CHECK_THROWS_AS(ad::slice(a, 1, 2, 2), ad::ShapeError);
  CHECK_THROWS_AS(g.constant({2, 2}, {1.0}), ad::ShapeError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives all-ones") {
    Graph g;
    const auto x = g.variable({2, 3, 2}, testutil::randn(12, 6));
    g.backward(ad::sum(x));
    for (double v : x.grad()) CHECK(v == 1.0);
  }
  SUBCASE("sum(x*x) at [1, -2]") {
    Graph g;
    const auto x = g.variable({2}, {1.0, -2.0});
    g.backward(ad::sum(ad::mul(x, x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == -4.0);
  }
  SUBCASE("fan-out accumulates") {
    Graph g;
    const auto x = g.variable({1}, {3.0});
    const auto y = ad::add(ad::mul(x, x), ad::scale(x, 5.0));  // x^2 + 5x
    g.backward(ad::sum(y));
    CHECK(x.grad()[0] == 11.0);
  }
  SUBCASE("repeated backward recomputes rather than accumulating") {
    Graph g;
    const auto x = g.variable({1}, {3.0});
    const auto loss = ad::sum(ad::mul(x, x));
    g.backward(loss);
    g.backward(loss);
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("constants get no gradient") {
    Graph g;
    const auto c = g.constant({1}, {2.0});
    const auto x = g.variable({1}, {3.0});
    g.backward(ad::sum(ad::mul(c, x)));
    CHECK(c.grad().empty());
    CHECK(x.grad()[0] == 2.0);
  }
  SUBCASE("non-scalar loss") {
    Graph g;
    const auto x = g.variable({2}, {1.0, 2.0});
    CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
  }
  SUBCASE("loss from a different graph or no graph") {
    Graph g, h;
    const auto x = h.variable({1}, {1.0});
    CHECK_THROWS_AS(g.backward(ad::sum(x)), std::logic_error);
    CHECK_THROWS_AS(g.backward(Tensor{}), std::logic_error);
  }
}

TEST_CASE("every primitive passes an isolated gradient check") {
  for (const auto& c : primcheck::cases()) {
    CAPTURE(c.name);
    const auto r = ad::grad_check(c.build, c.leaves);
    CHECK(r.max_rel_error < 1e-7);
    CHECK(r.coords_checked > 0);
  }
}

TEST_CASE("grad_check oracle behaviour") {
  SUBCASE("matmul-only graph") {
    const auto r = ad::grad_check(
        [](Graph& g, std::span<const Tensor> x) {
          return ad::sum(ad::matmul(ad::matmul(x[0], x[1]), x[2]));
        },
        {primcheck::random_leaf({3, 4}, 1), primcheck::random_leaf({4, 5}, 2),
         primcheck::random_leaf({5, 2}, 3)});
    CHECK(r.max_rel_error < 1e-9);
  }
  SUBCASE("tanh chain of depth 10") {
    const auto r = ad::grad_check(
        [](Graph& g, std::span<const Tensor> x) {
          Tensor y = x[0];
          for (int i = 0; i < 10; ++i) y = ad::tanh(ad::mul(y, x[1]));
          return ad::sum(y);
        },
        {primcheck::random_leaf({6}, 4), primcheck::random_leaf({6}, 5, 0.8, 1.6)});
    CHECK(r.max_rel_error < 1e-7);
  }
  SUBCASE("a wrong gradient is detected") {
    // A deliberately broken primitive: forward x^2, backward claims x.
    const auto r = ad::grad_check(
        [](Graph& g, std::span<const Tensor> x) {
          std::vector<double> v(x[0].values().begin(), x[0].values().end());
          for (double& e : v) e *= e;
          const std::size_t id = x[0].id();
          auto y = g.record("bad_square", x[0].shape(), v, {id}, [id](Graph& gg, const Graph::Node& n) {
            auto& gx = gg.grad_of(id);
            const auto& xv = gg.node(id).value;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * xv[i];
          });
          return ad::sum(y);
        },
        {primcheck::random_leaf({4}, 6, 0.5, 1.5)});
    CHECK(r.max_rel_error > 0.3);
  }
  SUBCASE("non-deterministic builder is refused") {
    int calls = 0;
    CHECK_THROWS_AS(ad::grad_check(
                        [&calls](Graph& g, std::span<const Tensor> x) {
                          ++calls;
                          return ad::sum(ad::scale(x[0], 1.0 + calls));
                        },
                        {primcheck::random_leaf({2}, 7)}),
                    ad::NonDeterministicError);
  }
  SUBCASE("coordinate sampling") {
    ad::GradCheckOptions opt;
    opt.coords_per_leaf = 3;
    const auto r = ad::grad_check(
        [](Graph& g, std::span<const Tensor> x) { return ad::sum(ad::mul(x[0], x[0])); },
        {primcheck::random_leaf({50}, 8)}, opt);
    CHECK(r.coords_checked == 3);
    CHECK(r.max_rel_error < 1e-9);
  }
}
