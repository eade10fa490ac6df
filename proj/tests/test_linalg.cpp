#include "diffquad/linalg.hpp"

#include <random>

#include "doctest.h"

using namespace diffquad;

TEST_CASE("rotation by unit quaternion preserves norm and matches axis-angle") {
  // 90 degree yaw: x-axis maps to y-axis
  Quatd q = Quatd::from_yaw(M_PI / 2);
  Vec3d v{1, 0, 0};
  Vec3d r = rotate(q, v);
  CHECK(r.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.y == doctest::Approx(1.0));
  CHECK(r.z == doctest::Approx(0.0));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Quatd qq = normalized(Quatd{n(rng), n(rng), n(rng), n(rng)});
    Vec3d w{n(rng), n(rng), n(rng)};
    CHECK(norm(rotate(qq, w)) == doctest::Approx(norm(w)).epsilon(1e-12));
    // inverse rotation undoes
    Vec3d back = rotate_inverse(qq, rotate(qq, w));
    CHECK(back.x == doctest::Approx(w.x).epsilon(1e-10));
    CHECK(back.y == doctest::Approx(w.y).epsilon(1e-10));
    CHECK(back.z == doctest::Approx(w.z).epsilon(1e-10));
  }
}

TEST_CASE("yaw extraction matches construction") {
  for (double psi : {-2.5, -1.0, 0.0, 0.3, 1.4, 3.0}) {
    Quatd q = Quatd::from_yaw(psi);
    CHECK(yaw_of(q) == doctest::Approx(psi).epsilon(1e-12));
  }
}

TEST_CASE("cross product right-handedness") {
  Vec3d x{1, 0, 0}, y{0, 1, 0};
  Vec3d z = cross(x, y);
  CHECK(z.z == 1.0);
  CHECK(dot(z, x) == 0.0);
}

TEST_CASE("vector ops and rotation also run on tape Vars with exact gradients") {
  // d/dv of ||R q v||^2 should equal 2 v (rotation preserves norm)
  Tape t;
  Vec3<Var> v{t.leaf(0.4), t.leaf(-1.1), t.leaf(2.0)};
  Quat<Var> q = to_scalar<Var>(normalized(Quatd{0.9, 0.1, -0.2, 0.3}));
  Vec3<Var> r = rotate(q, v);
  Var n2 = dot(r, r);
  t.backward(n2);
  CHECK(t.grad(v.x) == doctest::Approx(2 * 0.4).epsilon(1e-9));
  CHECK(t.grad(v.y) == doctest::Approx(-2.2).epsilon(1e-9));
  CHECK(t.grad(v.z) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("quaternion multiplication agrees with rotation composition") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    Quatd a = normalized(Quatd{n(rng), n(rng), n(rng), n(rng)});
    Quatd b = normalized(Quatd{n(rng), n(rng), n(rng), n(rng)});
    Vec3d v{n(rng), n(rng), n(rng)};
    Vec3d lhs = rotate(a * b, v);
    Vec3d rhs = rotate(a, rotate(b, v));
    CHECK(lhs.x == doctest::Approx(rhs.x).epsilon(1e-10));
    CHECK(lhs.y == doctest::Approx(rhs.y).epsilon(1e-10));
    CHECK(lhs.z == doctest::Approx(rhs.z).epsilon(1e-10));
  }
}
