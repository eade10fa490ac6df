#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace diffquad {

class Tape;

/// A scalar tracked by (at most) one Tape. A Var with no node index is a
/// constant: it participates in arithmetic but contributes no gradient.
struct Var {
  double v = 0.0;
  std::int32_t node = -1;
  Tape* tape = nullptr;

  Var() = default;
  Var(double c) : v(c) {}  // NOLINT: implicit by design, constants are pervasive

  bool is_const() const { return node < 0; }
};

/// Append-only record of elementary operations. Nodes are topologically
/// ordered (parents strictly precede children), so the reverse sweep visits
/// each node exactly once in decreasing index order.
class Tape {
 public:
  Tape() { off_.push_back(0); }

  /// Input node: no parents, gradient accumulates here.
  Var leaf(double value) {
    push_value(value);
    return wrap(value);
  }

  Var record1(double value, const Var& a, double da) {
    claim(a);
    push_value(value);
    push_edge(a, da);
    return wrap(value);
  }

  Var record2(double value, const Var& a, double da, const Var& b, double db) {
    claim(a);
    claim(b);
    push_value(value);
    push_edge(a, da);
    push_edge(b, db);
    return wrap(value);
  }

  /// General n-ary node with precomputed local partials. Constant parents
  /// are skipped. Used for fused ops (e.g. a network layer recorded as one
  /// node per output with exact partials).
  Var record_n(double value, std::span<const Var> parents,
               std::span<const double> partials) {
    if (parents.size() != partials.size())
      throw std::invalid_argument("record_n: parents/partials length mismatch");
    for (const Var& p : parents) claim(p);
    push_value(value);
    for (std::size_t i = 0; i < parents.size(); ++i)
      push_edge(parents[i], partials[i]);
    return wrap(value);
  }

  /// Reverse sweep from root. Gradient storage is reset on every call, so
  /// repeated backward() from the same root yields identical gradients.
  void backward(const Var& root);

  /// Gradient of the last backward() root w.r.t. v. Zero for constants and
  /// for nodes recorded after that root.
  double grad(const Var& v) const {
    if (v.node < 0 || static_cast<std::size_t>(v.node) >= grad_.size()) return 0.0;
    return grad_[static_cast<std::size_t>(v.node)];
  }

  std::size_t size() const { return value_.size(); }

  /// Drop all nodes but keep allocated capacity for reuse.
  void clear() {
    value_.clear();
    off_.clear();
    off_.push_back(0);
    parent_.clear();
    partial_.clear();
    grad_.clear();
  }

 private:
  void claim(const Var& x) const {
    if (x.tape != nullptr && x.tape != this)
      throw std::logic_error("Var belongs to a different tape");
  }
  void push_value(double value) {
    value_.push_back(value);
    pending_ = off_.back();
  }
  void push_edge(const Var& p, double d) {
    if (p.node >= 0) {
      parent_.push_back(p.node);
      partial_.push_back(d);
      ++pending_;
    }
    // keep off_ consistent after the last edge of the node
    if (off_.size() == value_.size()) {
      off_.push_back(pending_);
    } else {
      off_.back() = pending_;
    }
  }
  Var wrap(double value) {
    if (off_.size() == value_.size()) off_.push_back(pending_);  // leaf / all-const parents
    Var out;
    out.v = value;
    out.node = static_cast<std::int32_t>(value_.size() - 1);
    out.tape = this;
    return out;
  }

  std::vector<double> value_;
  std::vector<std::uint32_t> off_;  // node i owns edges [off_[i], off_[i+1])
  std::vector<std::int32_t> parent_;
  std::vector<double> partial_;
  std::vector<double> grad_;
  std::uint32_t pending_ = 0;
};

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
  if (a.tape && b.tape && a.tape != b.tape)
    throw std::logic_error("mixing Vars from two tapes");
  return a.tape ? a.tape : b.tape;
}
}  // namespace detail

// ---- arithmetic -----------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.v + b.v);
  return t->record2(a.v + b.v, a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.v - b.v);
  return t->record2(a.v - b.v, a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.v * b.v);
  return t->record2(a.v * b.v, a, b.v, b, a.v);
}
inline Var operator/(const Var& a, const Var& b) {
  Tape* t = detail::tape_of(a, b);
  if (!t) return Var(a.v / b.v);
  const double inv = 1.0 / b.v;
  return t->record2(a.v * inv, a, inv, b, -a.v * inv * inv);
}
inline Var operator-(const Var& a) {
  if (!a.tape) return Var(-a.v);
  return a.tape->record1(-a.v, a, -1.0);
}
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// ---- elementary functions ---------------------------------------------------

inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.v);
  if (!a.tape) return Var(s);
  return a.tape->record1(s, a, 0.5 / s);
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.v);
  if (!a.tape) return Var(e);
  return a.tape->record1(e, a, e);
}
inline Var log(const Var& a) {
  if (!a.tape) return Var(std::log(a.v));
  return a.tape->record1(std::log(a.v), a, 1.0 / a.v);
}
inline Var log1p(const Var& a) {
  if (!a.tape) return Var(std::log1p(a.v));
  return a.tape->record1(std::log1p(a.v), a, 1.0 / (1.0 + a.v));
}
inline Var tanh(const Var& a) {
  const double th = std::tanh(a.v);
  if (!a.tape) return Var(th);
  return a.tape->record1(th, a, 1.0 - th * th);
}
inline Var sin(const Var& a) {
  if (!a.tape) return Var(std::sin(a.v));
  return a.tape->record1(std::sin(a.v), a, std::cos(a.v));
}
inline Var cos(const Var& a) {
  if (!a.tape) return Var(std::cos(a.v));
  return a.tape->record1(std::cos(a.v), a, -std::sin(a.v));
}
inline Var atan2(const Var& y, const Var& x) {
  Tape* t = detail::tape_of(y, x);
  const double v = std::atan2(y.v, x.v);
  if (!t) return Var(v);
  const double r2 = x.v * x.v + y.v * y.v;
  return t->record2(v, y, x.v / r2, x, -y.v / r2);
}

/// Severs v from the gradient graph: value preserved, derivative path cut.
inline Var detach(const Var& v) { return Var(v.v); }
inline double detach(double v) { return v; }

inline double value_of(double x) { return x; }
inline double value_of(const Var& v) { return v.v; }

// ---- piecewise helpers, usable with S = double or S = Var -------------------

/// max(a, b); ties resolve to a (single subgradient path).
template <class S>
S vmax(const S& a, const S& b) {
  return value_of(a) >= value_of(b) ? a : b;
}
template <class S>
S vmin(const S& a, const S& b) {
  return value_of(a) <= value_of(b) ? a : b;
}
template <class S>
S vabs(const S& a) {
  return value_of(a) >= 0.0 ? a : static_cast<S>(-a);
}

/// Zero gradient outside [lo, hi], unit gradient inside.
template <class S>
S clip(const S& x, double lo, double hi) {
  const double v = value_of(x);
  if (v < lo) return S(lo);
  if (v > hi) return S(hi);
  return x;
}
template <class S>
S relu(const S& x) {
  return value_of(x) > 0.0 ? x : S(0.0);
}

/// Huber with transition delta: quadratic core, linear tails, C1 at |x|=delta.
template <class S>
S huber(const S& x, double delta = 1.0) {
  if (std::abs(value_of(x)) <= delta) return 0.5 * x * x;
  return delta * (vabs(x) - S(0.5 * delta));
}

/// log(1 + e^x), overflow-safe for large |x|.
template <class S>
S softplus(const S& x) {
  using std::exp;
  using std::log1p;
  if (value_of(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

// mixed Var/double arithmetic resolves through the implicit Var(double)
// constructor; explicit overloads below keep constants off the tape cheaply.
inline Var operator+(const Var& a, double b) {
  if (!a.tape) return Var(a.v + b);
  return a.tape->record1(a.v + b, a, 1.0);
}
inline Var operator+(double a, const Var& b) { return b + a; }
inline Var operator-(const Var& a, double b) { return a + (-b); }
inline Var operator-(double a, const Var& b) {
  if (!b.tape) return Var(a - b.v);
  return b.tape->record1(a - b.v, b, -1.0);
}
inline Var operator*(const Var& a, double b) {
  if (!a.tape) return Var(a.v * b);
  return a.tape->record1(a.v * b, a, b);
}
inline Var operator*(double a, const Var& b) { return b * a; }
inline Var operator/(const Var& a, double b) { return a * (1.0 / b); }
inline Var operator/(double a, const Var& b) {
  if (!b.tape) return Var(a / b.v);
  return b.tape->record1(a / b.v, b, -a / (b.v * b.v));
}

// ---- finite-difference oracle -----------------------------------------------

/// A scalar function built on a fresh tape from leaf inputs.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients of f at x against central differences with
/// step h. Returns max_i |analytic_i - central_i| / max(1, |central_i|).
/// Non-finite function values report as +infinity.
double grad_check(const ScalarFn& f, std::span<const double> x, double h);

}  // namespace diffquad
