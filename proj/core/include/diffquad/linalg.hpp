#pragma once

#include <array>
#include <cmath>

#include "diffquad/adtape.hpp"

namespace diffquad {

/// Fixed-size vector/quaternion types over a generic scalar so the same
/// dynamics code runs on plain doubles (fast rollouts) and on tape Vars
/// (differentiable rollouts).
template <class S>
struct Vec3 {
  S x{}, y{}, z{};

  Vec3() = default;
  Vec3(S xx, S yy, S zz) : x(xx), y(yy), z(zz) {}

  S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

template <class S>
Vec3<S> operator+(const Vec3<S>& a, const Vec3<S>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class S>
Vec3<S> operator-(const Vec3<S>& a, const Vec3<S>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class S>
Vec3<S> operator-(const Vec3<S>& a) {
  return {-a.x, -a.y, -a.z};
}
template <class S, class T>
Vec3<S> operator*(const Vec3<S>& a, const T& s) {
  return {a.x * s, a.y * s, a.z * s};
}
template <class S, class T>
Vec3<S> operator*(const T& s, const Vec3<S>& a) {
  return a * s;
}

template <class S>
S dot(const Vec3<S>& a, const Vec3<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class S>
Vec3<S> cross(const Vec3<S>& a, const Vec3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Euclidean norm, softened at the origin so the derivative stays finite.
/// The 1e-18 addend is below one ulp for any norm above ~1e-7, so values are
/// bit-identical to sqrt(dot) in the regimes tests pin down.
template <class S>
S norm(const Vec3<S>& v) {
  using std::sqrt;
  return sqrt(dot(v, v) + 1e-18);
}

template <class S>
Vec3<S> normalized(const Vec3<S>& v) {
  const S n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

inline Vec3<double> values_of(const Vec3<Var>& v) {
  return {v.x.v, v.y.v, v.z.v};
}
inline Vec3<double> values_of(const Vec3<double>& v) { return v; }

template <class S>
Vec3<S> to_scalar(const Vec3<double>& v) {
  return {S(v.x), S(v.y), S(v.z)};
}

/// Row-major 3x3 matrix.
template <class S>
struct Mat3 {
  std::array<S, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {S(1), S(0), S(0), S(0), S(1), S(0), S(0), S(0), S(1)};
    return r;
  }
  static Mat3 diag(S a, S b, S c) {
    Mat3 r;
    r.m = {a, S(0), S(0), S(0), b, S(0), S(0), S(0), c};
    return r;
  }
  S& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
  const S& operator()(int r, int c) const {
    return m[static_cast<std::size_t>(3 * r + c)];
  }
};

template <class S>
Vec3<S> operator*(const Mat3<S>& a, const Vec3<S>& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

inline double det(const Mat3<double>& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

inline Mat3<double> inverse(const Mat3<double>& a) {
  const double d = det(a);
  Mat3<double> r;
  r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / d;
  r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / d;
  r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / d;
  r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / d;
  r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / d;
  r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / d;
  r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / d;
  r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / d;
  r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / d;
  return r;
}

/// Unit quaternion (w, x, y, z) mapping body coordinates to world.
template <class S>
struct Quat {
  S w{}, x{}, y{}, z{};

  Quat() : w(S(1)), x(S(0)), y(S(0)), z(S(0)) {}
  Quat(S ww, S xx, S yy, S zz) : w(ww), x(xx), y(yy), z(zz) {}

  static Quat from_yaw(double psi) {
    return {S(std::cos(psi / 2)), S(0), S(0), S(std::sin(psi / 2))};
  }
};

template <class S>
Quat<S> operator*(const Quat<S>& a, const Quat<S>& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

template <class S>
S quat_norm(const Quat<S>& q) {
  using std::sqrt;
  return sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

template <class S>
Quat<S> normalized(const Quat<S>& q) {
  const S n = quat_norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

/// Rotate a body-frame vector into world frame: q * (0,v) * conj(q).
template <class S>
Vec3<S> rotate(const Quat<S>& q, const Vec3<S>& v) {
  // 2*(q_vec x v + w*v) trick, one cross product fewer than the naive form
  const Vec3<S> qv{q.x, q.y, q.z};
  const Vec3<S> t = cross(qv, v) * 2.0;
  return v + q.w * t + cross(qv, t);
}

template <class S>
Vec3<S> rotate_inverse(const Quat<S>& q, const Vec3<S>& v) {
  const Quat<S> c{q.w, -q.x, -q.y, -q.z};
  return rotate(c, v);
}

/// Quaternion derivative under body rates: q_dot = 0.5 * q (x) (0, omega).
template <class S>
Quat<S> quat_derivative(const Quat<S>& q, const Vec3<S>& omega) {
  const Quat<S> w{S(0), omega.x, omega.y, omega.z};
  const Quat<S> p = q * w;
  return {0.5 * p.w, 0.5 * p.x, 0.5 * p.y, 0.5 * p.z};
}

/// Yaw angle (Z-Y-X convention) of the body x-axis in world frame.
template <class S>
S yaw_of(const Quat<S>& q) {
  using std::atan2;
  const S siny = 2.0 * (q.w * q.z + q.x * q.y);
  const S cosy = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
  return atan2(siny, cosy);
}

/// Rodrigues rotation of v about a unit axis.
inline Vec3<double> rotate_about(const Vec3<double>& v, const Vec3<double>& axis,
                                 double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

inline Quat<double> values_of(const Quat<Var>& q) {
  return {q.w.v, q.x.v, q.y.v, q.z.v};
}
inline Quat<double> values_of(const Quat<double>& q) { return q; }

template <class S>
Quat<S> to_scalar(const Quat<double>& q) {
  return {S(q.w), S(q.x), S(q.y), S(q.z)};
}

using Vec3d = Vec3<double>;
using Quatd = Quat<double>;
using Mat3d = Mat3<double>;

}  // namespace diffquad
