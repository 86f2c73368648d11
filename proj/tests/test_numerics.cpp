#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>

#include "ote/grad_check.hpp"
#include "ote/graph.hpp"
#include "ote/rng.hpp"
#include "ote/tensor.hpp"

using namespace ote;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t(Shape{2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, {1.f, 2.f, 3.f}), ShapeError);
  CHECK(Tensor<float>::scalar(3.f).is_scalar());
  CHECK(Tensor<float>::scalar(3.f).scalar_value() == 3.f);
}

TEST_CASE("matmul identity and hand product") {
  Graph<double> g;
  NodeId eye = g.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
  NodeId m = g.constant(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  NodeId prod = g.matmul(eye, m);
  CHECK(g.value(prod).at(0, 0) == 1);
  CHECK(g.value(prod).at(0, 1) == 2);
  CHECK(g.value(prod).at(1, 0) == 3);
  CHECK(g.value(prod).at(1, 1) == 4);

  NodeId row = g.constant(Tensor<double>::matrix(1, 2, {1, 2}));
  NodeId col = g.constant(Tensor<double>::matrix(2, 1, {3, 4}));
  CHECK(g.value(g.matmul(row, col)).at(0, 0) == 11);

  NodeId bad = g.constant(Tensor<double>::matrix(3, 3, {0, 0, 0, 0, 0, 0, 0, 0, 0}));
  CHECK_THROWS_WITH_AS(g.matmul(row, bad),
                       doctest::Contains("(1x2)"), ShapeError);
}

TEST_CASE("matmul gradient matches central finite differences") {
  Rng rng(42);
  Tensor<double> A = random_tensor(Shape{3, 4}, rng);
  Tensor<double> B = random_tensor(Shape{4, 2}, rng);
  auto build = [&](Graph<double>& g) {
    NodeId a = g.parameter("A", A);
    NodeId b = g.parameter("B", B);
    return g.sum(g.matmul(a, b));
  };
  auto report = grad_check<double>(build, {{"A", &A}, {"B", &B}}, 1e-6);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("elementwise ops") {
  Graph<double> g;
  NodeId a = g.constant(Tensor<double>::vector({1, 2, 3}));
  NodeId zero = g.constant(Tensor<double>::vector({0, 0, 0}));
  NodeId h = g.hadamard(a, zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.value(h)[i] == 0);

  NodeId x = g.constant(Tensor<double>::vector({1, 2}));
  NodeId y = g.constant(Tensor<double>::vector({3, 4}));
  NodeId s = g.add(x, y);
  CHECK(g.value(s)[0] == 4);
  CHECK(g.value(s)[1] == 6);

  NodeId sc = g.scale(g.constant(Tensor<double>::vector({2, 4})), 0.5);
  CHECK(g.value(sc)[0] == 1);
  CHECK(g.value(sc)[1] == 2);

  CHECK_THROWS_AS(g.add(a, x), ShapeError);
}

TEST_CASE("sigmoid values and gradient") {
  Graph<double> g;
  NodeId z = g.sigmoid(g.constant(Tensor<double>::scalar(0.0)));
  CHECK(g.value(z).scalar_value() == doctest::Approx(0.5));

  NodeId big = g.sigmoid(g.constant(Tensor<double>::vector({1e3})));
  CHECK(g.value(big)[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(g.value(big)[0]));
  NodeId low = g.sigmoid(g.constant(Tensor<double>::vector({-1e3})));
  CHECK(g.value(low)[0] == doctest::Approx(0.0));
  CHECK(std::isfinite(g.value(low)[0]));

  Graph<double> g2;
  NodeId w = g2.parameter("w", Tensor<double>::scalar(0.0));
  NodeId loss = g2.sum(g2.sigmoid(w));
  g2.backward(loss);
  CHECK(g2.parameter_gradients()["w"][0] == doctest::Approx(0.25));
}

TEST_CASE("elu values and continuity") {
  Graph<double> g;
  NodeId v = g.elu(g.constant(Tensor<double>::vector({0.0, 2.0, -1.0})));
  CHECK(g.value(v)[0] == 0.0);
  CHECK(g.value(v)[1] == 2.0);
  CHECK(g.value(v)[2] == doctest::Approx(std::exp(-1.0) - 1.0));

  NodeId eps = g.elu(g.constant(Tensor<double>::vector({1e-8, -1e-8})));
  CHECK(std::abs(g.value(eps)[0]) < 2e-8);
  CHECK(std::abs(g.value(eps)[1]) < 2e-8);
}

TEST_CASE("softmax values, stability and simplex property") {
  Graph<double> g;
  NodeId u = g.softmax(g.constant(Tensor<double>::vector({0, 0, 0})));
  for (int i = 0; i < 3; ++i)
    CHECK(g.value(u)[i] == doctest::Approx(1.0 / 3.0));

  NodeId sat = g.softmax(g.constant(Tensor<double>::vector({1000, 0, 0})));
  CHECK(g.value(sat)[0] == doctest::Approx(1.0));
  for (int i = 0; i < 3; ++i) CHECK(std::isfinite(g.value(sat)[i]));

  NodeId frac =
      g.softmax(g.constant(Tensor<double>::vector({std::log(2.0), 0.0})));
  CHECK(g.value(frac)[0] == doctest::Approx(2.0 / 3.0));
  CHECK(g.value(frac)[1] == doctest::Approx(1.0 / 3.0));

  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> x = random_tensor(Shape{5}, rng, -30, 30);
    Graph<double> gg;
    NodeId sm = gg.softmax(gg.constant(x));
    double total = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      double v = gg.value(sm)[i];
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cross entropy values") {
  Graph<double> g;
  NodeId perfect =
      g.cross_entropy(g.constant(Tensor<double>::vector({1, 0, 0})), 0);
  CHECK(g.value(perfect).scalar_value() == doctest::Approx(0.0));

  NodeId uniform = g.cross_entropy(
      g.constant(Tensor<double>::vector({1.0 / 3, 1.0 / 3, 1.0 / 3})), 2);
  CHECK(g.value(uniform).scalar_value() == doctest::Approx(std::log(3.0)));

  CHECK_THROWS_AS(
      g.cross_entropy(g.constant(Tensor<double>::vector({1, 0})), 2),
      IndexError);
}

TEST_CASE("cross entropy gradient wrt logits equals q minus onehot") {
  Rng rng(3);
  Tensor<double> logits = random_tensor(Shape{4}, rng, -2, 2);
  Graph<double> g;
  NodeId l = g.parameter("logits", logits);
  NodeId q = g.softmax(l);
  NodeId loss = g.cross_entropy(q, 1);
  g.backward(loss);
  Tensor<double> grad = g.parameter_gradients()["logits"];
  for (std::size_t i = 0; i < 4; ++i) {
    double expected = g.value(q)[i] - (i == 1 ? 1.0 : 0.0);
    CHECK(grad[i] == doctest::Approx(expected).epsilon(1e-10));
  }

  // independent finite-difference confirmation
  auto build = [&](Graph<double>& gg) {
    return gg.cross_entropy(gg.softmax(gg.parameter("logits", logits)), 1);
  };
  auto report = grad_check<double>(build, {{"logits", &logits}}, 1e-6);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("concat values, identity and gradient split") {
  Graph<double> g;
  NodeId c = g.concat({g.constant(Tensor<double>::vector({1, 2})),
                       g.constant(Tensor<double>::vector({3}))});
  CHECK(g.value(c).size() == 3);
  CHECK(g.value(c)[2] == 3);

  NodeId with_empty = g.concat({g.constant(Tensor<double>::vector({1, 2})),
                                g.constant(Tensor<double>(Shape{0}))});
  CHECK(g.value(with_empty).size() == 2);
  CHECK(g.value(with_empty)[0] == 1);
  CHECK(g.value(with_empty)[1] == 2);

  Graph<double> g2;
  NodeId a = g2.parameter("a", Tensor<double>::vector({1, 2}));
  NodeId b = g2.parameter("b", Tensor<double>::vector({5, 6, 7}));
  g2.backward(g2.sum(g2.concat({a, b})));
  auto grads = g2.parameter_gradients();
  CHECK(grads["a"].size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(grads["a"][i] == 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(grads["b"][i] == 1.0);
}

TEST_CASE("concat then split recovers parts bit-exactly") {
  Rng rng(11);
  Tensor<double> a = random_tensor(Shape{4}, rng);
  Tensor<double> b = random_tensor(Shape{7}, rng);
  Graph<double> g;
  NodeId c = g.concat({g.constant(a), g.constant(b)});
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.value(c)[i] == a[i]);
  for (std::size_t i = 0; i < 7; ++i) CHECK(g.value(c)[4 + i] == b[i]);
}

TEST_CASE("backward on sum(W x) replicates x per row") {
  Tensor<double> W = Tensor<double>::matrix(2, 3, {0, 0, 0, 0, 0, 0});
  Tensor<double> x = Tensor<double>::vector({1, 2, 3});
  Graph<double> g;
  NodeId w = g.parameter("W", W);
  NodeId loss = g.sum(g.matmul(w, g.constant(x)));
  g.backward(loss);
  Tensor<double> grad = g.parameter_gradients()["W"];
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(grad.at(r, c) == x[c]);
}

TEST_CASE("unused parameter gets a zero gradient of matching shape") {
  Graph<double> g;
  NodeId w = g.parameter("w", Tensor<double>::vector({1, 2}));
  g.parameter("unused", Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  g.backward(g.sum(w));
  auto grads = g.parameter_gradients();
  CHECK(grads["unused"].shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(grads["unused"][i] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Graph<double> g;
  NodeId w = g.parameter("w", Tensor<double>::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(w), ContractError);
}

TEST_CASE("random three-layer composition passes finite differences") {
  Rng rng(1234);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> W1 = random_tensor(Shape{4, 3}, rng, -0.7, 0.7);
    Tensor<double> W2 = random_tensor(Shape{3, 4}, rng, -0.7, 0.7);
    Tensor<double> b = random_tensor(Shape{3}, rng, -0.5, 0.5);
    Tensor<double> x = random_tensor(Shape{3}, rng, -1, 1);
    auto build = [&](Graph<double>& g) {
      NodeId w1 = g.parameter("W1", W1);
      NodeId w2 = g.parameter("W2", W2);
      NodeId bb = g.parameter("b", b);
      NodeId h = g.elu(g.matmul(w1, g.constant(x)));
      NodeId o = g.sigmoid(g.add(g.matmul(w2, h), bb));
      return g.cross_entropy(g.softmax(o), 1);
    };
    auto report = grad_check<double>(
        build, {{"W1", &W1}, {"W2", &W2}, {"b", &b}}, 1e-6);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("grad_check on w squared is near zero") {
  Tensor<double> w = Tensor<double>::scalar(3.0);
  auto build = [&](Graph<double>& g) {
    NodeId p = g.parameter("w", w);
    return g.sum(g.hadamard(p, p));
  };
  auto report = grad_check<double>(build, {{"w", &w}}, 1e-5);
  CHECK(report.max_rel_error < 1e-9);
  CHECK(report.worst_param == "w");
}

TEST_CASE("grad_check flags a corrupted gradient rule") {
  // The first build call (the analytic pass) sees a different function
  // than the finite-difference evaluations, standing in for a broken
  // backward rule.
  Tensor<double> w = Tensor<double>::scalar(0.4);
  int calls = 0;
  auto build = [&](Graph<double>& g) {
    NodeId p = g.parameter("w", w);
    ++calls;
    if (calls == 1) {
      return g.sum(g.add(g.hadamard(p, p), p));  // corrupted: w^2 + w
    }
    return g.sum(g.hadamard(p, p));  // true function: w^2
  };
  auto report = grad_check<double>(build, {{"w", &w}}, 1e-5);
  CHECK(report.max_rel_error > 1e-2);
}

TEST_CASE("grad_check reports non-finite trouble") {
  Tensor<double> w = Tensor<double>::scalar(1.0);
  auto build = [&](Graph<double>& g) {
    NodeId p = g.parameter("w", w);
    NodeId bad = g.constant(Tensor<double>::scalar(
        std::numeric_limits<double>::quiet_NaN()));
    return g.sum(g.hadamard(p, bad));
  };
  CHECK_THROWS_AS(grad_check<double>(build, {{"w", &w}}, 1e-5),
                  DiagnosticError);
}

TEST_CASE("global norm clip") {
  GradMap<double> grads;
  grads["a"] = Tensor<double>::vector({6, 0});
  grads["b"] = Tensor<double>::vector({0, 8});
  // global norm = 10
  global_norm_clip(grads, 5.0);
  CHECK(grads["a"][0] == doctest::Approx(3.0));
  CHECK(grads["b"][1] == doctest::Approx(4.0));

  GradMap<double> small;
  small["a"] = Tensor<double>::vector({1, 2});
  GradMap<double> copy = small;
  global_norm_clip(small, 5.0);
  CHECK(small["a"][0] == copy["a"][0]);
  CHECK(small["a"][1] == copy["a"][1]);

  CHECK_THROWS_AS(global_norm_clip(small, 0.0), ValidationError);
}

TEST_CASE("global norm clip property and idempotence on random inputs") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    GradMap<double> grads;
    int parts = 1 + static_cast<int>(rng.index(4));
    for (int p = 0; p < parts; ++p) {
      grads["g" + std::to_string(p)] =
          random_tensor(Shape{1 + rng.index(6)}, rng, -8, 8);
    }
    global_norm_clip(grads, 5.0);
    CHECK(global_grad_norm(grads) <= 5.0 * (1.0 + 1e-6));
    GradMap<double> once = grads;
    global_norm_clip(grads, 5.0);
    for (const auto& [name, g] : once) {
      for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(grads[name][i] == g[i]);
    }
  }
}

TEST_CASE("finite difference agreement across every differentiable op") {
  Rng rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor<double> a = random_tensor(Shape{3}, rng);
    Tensor<double> b = random_tensor(Shape{3}, rng);
    Tensor<double> M = random_tensor(Shape{2, 3}, rng);
    auto build = [&](Graph<double>& g) {
      NodeId pa = g.parameter("a", a);
      NodeId pb = g.parameter("b", b);
      NodeId pm = g.parameter("M", M);
      NodeId mix = g.hadamard(g.add(pa, pb), g.sub(pa, pb));
      NodeId act = g.elu(g.sigmoid(mix));
      NodeId lin = g.matmul(pm, act);
      NodeId cat = g.concat({lin, g.scale(pa, 0.5), g.add_scalar(pb, 0.25)});
      return g.cross_entropy(g.softmax(cat), 4);
    };
    auto report =
        grad_check<double>(build, {{"a", &a}, {"b", &b}, {"M", &M}}, 1e-6);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("lookup gradient accumulates on repeated ids and skips others") {
  Tensor<double> table = Tensor<double>::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Graph<double> g;
  NodeId t = g.parameter("table", table);
  NodeId l1 = g.lookup_column(t, 1);
  NodeId l2 = g.lookup_column(t, 1);
  g.backward(g.sum(g.add(l1, l2)));
  Tensor<double> grad = g.parameter_gradients()["table"];
  CHECK(grad.at(0, 1) == 2.0);
  CHECK(grad.at(1, 1) == 2.0);
  CHECK(grad.at(0, 0) == 0.0);
  CHECK(grad.at(0, 2) == 0.0);
  CHECK_THROWS_AS(g.lookup_column(t, 3), IndexError);
}

TEST_CASE("check-finite mode reports the offending op") {
  Graph<double> g;
  g.set_check_finite(true);
  NodeId huge = g.constant(Tensor<double>::scalar(1e308));
  CHECK_THROWS_AS(g.hadamard(huge, huge), DiagnosticError);
}
