#include "diffquad/adtape.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace diffquad;

TEST_CASE("elementary records carry the right value and partials") {
  Tape t;
  Var x = t.leaf(2.0), y = t.leaf(3.0);

  Var s = x + y;
  CHECK(s.v == 5.0);
  t.backward(s);
  CHECK(t.grad(x) == 1.0);
  CHECK(t.grad(y) == 1.0);

  Var p = x * y;
  CHECK(p.v == 6.0);
  t.backward(p);
  CHECK(t.grad(x) == 3.0);
  CHECK(t.grad(y) == 2.0);

  Var r = sqrt(t.leaf(4.0));
  CHECK(r.v == 2.0);
  t.backward(r);
  // d sqrt(x)/dx = 1/(2 sqrt(x)) = 0.25 at x=4
}

TEST_CASE("backward of product") {
  Tape t;
  Var x = t.leaf(2.0), y = t.leaf(3.0);
  Var root = x * y;
  t.backward(root);
  CHECK(t.grad(x) == doctest::Approx(3.0));
  CHECK(t.grad(y) == doctest::Approx(2.0));
}

TEST_CASE("backward of discounted sum") {
  // root = sum_{t=1..3} gamma^t x, gamma = 0.9 -> d/dx = 0.9+0.81+0.729
  Tape t;
  Var x = t.leaf(1.7);
  Var root(0.0);
  double gamma_pow = 1.0;
  for (int i = 1; i <= 3; ++i) {
    gamma_pow *= 0.9;
    root = root + gamma_pow * x;
  }
  t.backward(root);
  CHECK(t.grad(x) == doctest::Approx(2.439).epsilon(1e-12));
}

TEST_CASE("detach contributes value but no gradient") {
  Tape t;

  SUBCASE("detached factor") {
    Var x = t.leaf(2.0);
    Var root = detach(x) * x;
    CHECK(root.v == 4.0);
    t.backward(root);
    CHECK(t.grad(x) == 2.0);
  }
  SUBCASE("pure detach is constant") {
    Var x = t.leaf(5.0);
    Var d = detach(x);
    CHECK(d.is_const());
    CHECK(d.v == 5.0);
  }
  SUBCASE("function of detach has zero gradient") {
    Var x = t.leaf(1.3);
    Var root = detach(x) * detach(x) + 0.0 * x;  // keep the root on-tape
    CHECK(root.v == doctest::Approx(1.69));
    t.backward(root);
    CHECK(t.grad(x) == 0.0);
  }
  SUBCASE("x + detach(x)") {
    Var x = t.leaf(1.3);
    Var root = x + detach(x);
    t.backward(root);
    CHECK(t.grad(x) == 1.0);
  }
}

TEST_CASE("backward is idempotent: rerunning yields identical gradients") {
  Tape t;
  Var x = t.leaf(0.7), y = t.leaf(-1.2);
  Var root = exp(x) * sin(y) + x / y;
  t.backward(root);
  const double gx = t.grad(x), gy = t.grad(y);
  t.backward(root);
  CHECK(t.grad(x) == gx);
  CHECK(t.grad(y) == gy);
}

TEST_CASE("linearity of backward") {
  // gradients of a*f + b*g equal a*grad(f) + b*grad(g), node-wise
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double x0 = u(rng), y0 = u(rng), a = u(rng), b = u(rng);
    auto fg = [&](Tape& t, Var& x, Var& y, Var& f, Var& g) {
      x = t.leaf(x0);
      y = t.leaf(y0);
      f = x * y + sin(x);
      g = x * x - 3.0 * y;
    };
    Tape t1, t2, t3;
    Var x1, y1, f1, g1;
    fg(t1, x1, y1, f1, g1);
    t1.backward(f1);
    const double fx = t1.grad(x1), fy = t1.grad(y1);
    Var x2, y2, f2, g2;
    fg(t2, x2, y2, f2, g2);
    t2.backward(g2);
    const double gx = t2.grad(x2), gy = t2.grad(y2);
    Var x3, y3, f3, g3;
    fg(t3, x3, y3, f3, g3);
    Var combo = a * f3 + b * g3;
    t3.backward(combo);
    CHECK(t3.grad(x3) == doctest::Approx(a * fx + b * gx).epsilon(1e-12));
    CHECK(t3.grad(y3) == doctest::Approx(a * fy + b * gy).epsilon(1e-12));
  }
}

TEST_CASE("mixing tapes is rejected") {
  Tape t1, t2;
  Var a = t1.leaf(1.0);
  Var b = t2.leaf(2.0);
  CHECK_THROWS_AS((void)(a + b), std::logic_error);
}

TEST_CASE("grad_check on simple functions") {
  SUBCASE("x^2 at 3") {
    const double x[] = {3.0};
    const double err = grad_check(
        [](Tape&, std::span<const Var> v) { return v[0] * v[0]; }, x, 1e-5);
    CHECK(err < 1e-8);
  }
  SUBCASE("sin at 0") {
    const double x[] = {0.0};
    const double err = grad_check(
        [](Tape&, std::span<const Var> v) { return sin(v[0]); }, x, 1e-5);
    CHECK(err < 1e-8);
  }
  SUBCASE("|x| away from the kink passes, near it is meaningless") {
    const double x[] = {0.5};
    const double err = grad_check(
        [](Tape&, std::span<const Var> v) { return vabs(v[0]); }, x, 1e-5);
    CHECK(err < 1e-8);
    // at the kink itself the central difference reports 0 while the
    // subgradient is +/-1; the harness must avoid such points
    const double x0[] = {0.0};
    const double kink_err = grad_check(
        [](Tape&, std::span<const Var> v) { return vabs(v[0]); }, x0, 1e-5);
    CHECK(kink_err > 0.5);
  }
  SUBCASE("non-finite evaluation reports failure") {
    const double x[] = {-1.0};
    const double err = grad_check(
        [](Tape&, std::span<const Var> v) { return sqrt(v[0]); }, x, 1e-6);
    CHECK(std::isinf(err));
  }
}

TEST_CASE("every elementary op matches central differences") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  std::uniform_real_distribution<double> us(-2.0, 2.0);
  const double h = 1e-6;

  auto check1 = [&](const ScalarFn& f, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (int i = 0; i < 200; ++i) {
      const double x[] = {d(rng)};
      CHECK(grad_check(f, x, h) < 1e-6);
    }
  };
  auto check2 = [&](const ScalarFn& f) {
    for (int i = 0; i < 200; ++i) {
      const double x[] = {us(rng), u(rng)};
      CHECK(grad_check(f, x, h) < 1e-6);
    }
  };

  check2([](Tape&, std::span<const Var> v) { return v[0] + v[1]; });
  check2([](Tape&, std::span<const Var> v) { return v[0] - v[1]; });
  check2([](Tape&, std::span<const Var> v) { return v[0] * v[1]; });
  check2([](Tape&, std::span<const Var> v) { return v[0] / v[1]; });
  check2([](Tape&, std::span<const Var> v) { return atan2(v[0], v[1]); });
  check1([](Tape&, std::span<const Var> v) { return sqrt(v[0]); }, 0.3, 3.0);
  check1([](Tape&, std::span<const Var> v) { return exp(v[0]); }, -2.0, 2.0);
  check1([](Tape&, std::span<const Var> v) { return log(v[0]); }, 0.3, 3.0);
  check1([](Tape&, std::span<const Var> v) { return log1p(v[0]); }, -0.5, 3.0);
  check1([](Tape&, std::span<const Var> v) { return tanh(v[0]); }, -2.0, 2.0);
  check1([](Tape&, std::span<const Var> v) { return sin(v[0]); }, -3.0, 3.0);
  check1([](Tape&, std::span<const Var> v) { return cos(v[0]); }, -3.0, 3.0);
  check1([](Tape&, std::span<const Var> v) { return huber(v[0]); }, 0.1, 0.9);
  check1([](Tape&, std::span<const Var> v) { return huber(v[0]); }, 1.1, 3.0);
  check1([](Tape&, std::span<const Var> v) { return softplus(v[0]); }, -30.0, 30.0);
}

TEST_CASE("clip gradient is zero outside, one inside") {
  Tape t;
  Var a = t.leaf(0.5);
  Var ca = clip(a, 0.0, 1.0);
  t.backward(ca);
  CHECK(t.grad(a) == 1.0);

  Var b = t.leaf(1.5);
  Var cb = clip(b, 0.0, 1.0);
  CHECK(cb.v == 1.0);
  CHECK(cb.is_const());  // out-of-range clip detaches entirely
  Var root = cb + 0.0 * b;
  t.backward(root);
  CHECK(t.grad(b) == 0.0);
}

TEST_CASE("record_n fuses a linear combination into one node") {
  Tape t;
  std::vector<Var> xs = {t.leaf(1.0), t.leaf(-2.0), t.leaf(0.5)};
  const double w[] = {3.0, 0.25, -1.5};
  double val = 0.0;
  for (int i = 0; i < 3; ++i) val += w[i] * xs[i].v;
  Var y = t.record_n(val, xs, w);
  CHECK(y.v == doctest::Approx(3.0 - 0.5 - 0.75));
  t.backward(y);
  for (int i = 0; i < 3; ++i) CHECK(t.grad(xs[i]) == w[i]);
}

TEST_CASE("huber values match the spec'd branch values") {
  CHECK(huber(0.5) == doctest::Approx(0.125));
  CHECK(huber(2.0) == doctest::Approx(1.5));
  CHECK(huber(0.0) == 0.0);
  // C1 at the transition: left/right derivative both equal 1
  Tape t;
  Var a = t.leaf(1.0 - 1e-12);
  t.backward(huber(a));
  const double dl = t.grad(a);
  Var b = t.leaf(1.0 + 1e-12);
  t.backward(huber(b));
  const double dr = t.grad(b);
  CHECK(std::abs(dl - dr) < 1e-9);
}
