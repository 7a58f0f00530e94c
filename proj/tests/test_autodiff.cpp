#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "risloc/adam.hpp"
#include "risloc/errors.hpp"
#include "risloc/grad_check.hpp"
#include "risloc/graph_suite.hpp"
#include "risloc/rng.hpp"
#include "risloc/tensor.hpp"

using namespace risloc;
using ad::Matrix;
using ad::Tape;
using ad::Var;

TEST_CASE("primitive forward values") {
  Tape tape;
  Matrix z = Matrix::Zero(2, 2);
  Var s = tape.sigmoid(tape.constant(z));
  CHECK(s.value()(0, 0) == doctest::Approx(0.5));
  CHECK(s.value()(1, 1) == doctest::Approx(0.5));

  // (0 + 1j) * (0 + 1j) = -1 + 0j
  Matrix zero = Matrix::Zero(1, 1), one = Matrix::Ones(1, 1);
  auto [re, im] = tape.complex_mul(tape.constant(zero), tape.constant(one),
                                   tape.constant(zero), tape.constant(one));
  CHECK(re.value()(0, 0) == doctest::Approx(-1.0));
  CHECK(im.value()(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(5, 0, StreamRole::kGraphGen);
  Matrix a(2, 3), x(3, 1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = rng.uniform(-2, 2);
  for (int r = 0; r < 3; ++r) x(r, 0) = rng.uniform(-2, 2);

  Tape tape;
  const Matrix& out = tape.matmul(tape.constant(a), tape.constant(x)).value();
  for (int r = 0; r < 2; ++r) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) acc += a(r, k) * x(k, 0);
    CHECK(out(r, 0) == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("backward: sum of squares and sigmoid scalar") {
  Tape tape;
  Matrix x(2, 1);
  x << 1.0, 2.0;
  Var xv = tape.leaf(x);
  Var loss = tape.sum(tape.square(xv));
  tape.backward(loss);
  CHECK(tape.grad(xv)(0, 0) == doctest::Approx(2.0));
  CHECK(tape.grad(xv)(1, 0) == doctest::Approx(4.0));

  Tape tape2;
  Matrix w = Matrix::Zero(1, 1), one = Matrix::Ones(1, 1);
  Var wv = tape2.leaf(w);
  Var l2 = tape2.sum(tape2.sigmoid(tape2.mul(wv, tape2.constant(one))));
  tape2.backward(l2);
  CHECK(tape2.grad(wv)(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("backward contract errors") {
  Tape tape;
  Var x = tape.leaf(Matrix::Ones(2, 2));
  Var y = tape.square(x);
  CHECK_THROWS_AS(tape.backward(y), DimensionError);  // non-scalar

  Tape tape2;
  Var c = tape2.constant(Matrix::Ones(1, 1));
  Var s = tape2.sum(c);
  CHECK_THROWS_AS(tape2.backward(s), DimensionError);  // no leaf dependence
}

TEST_CASE("unreachable leaves get exactly zero gradient") {
  Tape tape;
  Var used = tape.leaf(Matrix::Ones(2, 1));
  Var unused = tape.leaf(Matrix::Ones(3, 3));
  Var loss = tape.sum(tape.square(used));
  tape.backward(loss);
  CHECK(tape.grad(unused).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape mismatches throw") {
  Tape tape;
  Var a = tape.constant(Matrix::Ones(2, 2));
  Var b = tape.constant(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), DimensionError);
  CHECK_THROWS_AS(tape.matmul(b, b), DimensionError);
}

TEST_CASE("linear graph gradient is exact to rounding") {
  Rng rng(19, 0, StreamRole::kGraphGen);
  Matrix w(3, 3), x(3, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) w(r, c) = rng.uniform(-2, 2);
    for (int c = 0; c < 2; ++c) x(r, c) = rng.uniform(-2, 2);
  }
  const ad::GraphBuilder builder = [](Tape& tape,
                                      const std::vector<Matrix>& params) {
    Var w = tape.leaf(params[0]);
    Var x = tape.leaf(params[1]);
    return tape.sum(tape.matmul(w, x));
  };
  const auto report =
      ad::grad_check(builder, {w, x}, {"w", "x"}, 1e-4);
  CHECK(report.max_rel_error <= 1e-8);
}

TEST_CASE("unit_normalize projects and zeroes singular elements") {
  Tape tape;
  Matrix re(1, 2), im(1, 2);
  re << 3.0, 0.0;
  im << 4.0, 0.0;
  Var vr = tape.leaf(re);
  Var vi = tape.leaf(im);
  auto [nr, ni] = tape.unit_normalize(vr, vi);
  CHECK(nr.value()(0, 0) == doctest::Approx(0.6));
  CHECK(ni.value()(0, 0) == doctest::Approx(0.8));
  CHECK(nr.value()(0, 1) == doctest::Approx(1.0));  // singular fallback
  CHECK(ni.value()(0, 1) == doctest::Approx(0.0));

  Var loss = tape.add(tape.sum(nr), tape.sum(ni));
  tape.backward(loss);
  CHECK(tape.grad(vr)(0, 1) == 0.0);  // no gradient through the fallback
  CHECK(tape.grad(vi)(0, 1) == 0.0);
}

TEST_CASE("grad-check suite: random graphs and reduced policy steps") {
  const ad::SuiteResult result = ad::run_grad_check_suite(12, 20240101);
  CHECK(result.graphs == 14);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("adam first step moves by -lr*sign(g)") {
  NamedParams params;
  params.add("w", Matrix::Zero(2, 1));
  AdamState st = AdamState::init(params, 1e-3);
  GradSet g = zero_grads_like(params);
  g[0](0, 0) = 0.37;
  g[0](1, 0) = -2.1;
  adam_step(params, g, st);
  CHECK(params.values[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(params.values[0](1, 0) == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  NamedParams params;
  params.add("w", Matrix::Constant(2, 2, 1.5));
  AdamState st = AdamState::init(params);
  adam_step(params, zero_grads_like(params), st);
  adam_step(params, zero_grads_like(params), st);
  CHECK(params.values[0](0, 0) == 1.5);
  CHECK(params.values[0](1, 1) == 1.5);
}

TEST_CASE("adam matches the hand-unrolled recurrence for two steps") {
  const double g = 0.8, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  NamedParams params;
  params.add("w", Matrix::Zero(1, 1));
  AdamState st = AdamState::init(params, lr, b1, b2, eps);
  GradSet grads = zero_grads_like(params);
  grads[0](0, 0) = g;
  adam_step(params, grads, st);
  adam_step(params, grads, st);

  double w = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(params.values[0](0, 0) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("adam shape mismatch throws") {
  NamedParams params;
  params.add("w", Matrix::Zero(2, 1));
  AdamState st = AdamState::init(params);
  GradSet bad;
  bad.push_back(Matrix::Zero(1, 2));
  CHECK_THROWS_AS(adam_step(params, bad, st), DimensionError);
}

TEST_CASE("clip_global_norm scales only above the threshold") {
  NamedParams params;
  params.add("a", Matrix::Zero(1, 1));
  GradSet g;
  g.push_back(Matrix::Constant(1, 1, 30.0));
  clip_global_norm(g, 10.0);
  CHECK(g[0](0, 0) == doctest::Approx(10.0));
  GradSet small;
  small.push_back(Matrix::Constant(1, 1, 3.0));
  clip_global_norm(small, 10.0);
  CHECK(small[0](0, 0) == doctest::Approx(3.0));
}

TEST_CASE("tape replay determinism: identical loss bits across rebuilds") {
  const auto build_loss = []() {
    Rng rng(404, 0, StreamRole::kGraphGen);
    Matrix w(4, 4), x(4, 3);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) w(r, c) = rng.uniform(-1, 1);
      for (int c = 0; c < 3; ++c) x(r, c) = rng.uniform(-1, 1);
    }
    Tape tape;
    Var loss = tape.sum(tape.tanh(tape.matmul(tape.leaf(w), tape.leaf(x))));
    return loss.value()(0, 0);
  };
  CHECK(build_loss() == build_loss());
}
