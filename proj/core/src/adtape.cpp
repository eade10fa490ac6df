#include "diffquad/adtape.hpp"

#include <cmath>
#include <limits>

namespace diffquad {

void Tape::backward(const Var& root) {
  if (root.tape != this || root.node < 0)
    throw std::logic_error("backward: root does not belong to this tape");
  grad_.assign(value_.size(), 0.0);
  grad_[static_cast<std::size_t>(root.node)] = 1.0;
  for (std::int32_t i = root.node; i >= 0; --i) {
    const double g = grad_[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    const std::uint32_t begin = off_[static_cast<std::size_t>(i)];
    const std::uint32_t end = off_[static_cast<std::size_t>(i) + 1];
    for (std::uint32_t k = begin; k < end; ++k)
      grad_[static_cast<std::size_t>(parent_[k])] += g * partial_[k];
  }
}

double grad_check(const ScalarFn& f, std::span<const double> x, double h) {
  const std::size_t n = x.size();
  constexpr double kFail = std::numeric_limits<double>::infinity();

  Tape tape;
  std::vector<Var> xs;
  xs.reserve(n);
  for (double xi : x) xs.push_back(tape.leaf(xi));
  const Var y = f(tape, xs);
  if (!std::isfinite(y.v)) return kFail;
  tape.backward(y);

  std::vector<double> analytic(n);
  for (std::size_t i = 0; i < n; ++i) analytic[i] = tape.grad(xs[i]);

  const auto eval = [&](std::span<const double> p) {
    Tape scratch;
    std::vector<Var> vs;
    vs.reserve(p.size());
    for (double pi : p) vs.push_back(scratch.leaf(pi));
    return f(scratch, vs).v;
  };

  std::vector<double> xp(x.begin(), x.end());
  double max_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = x[i] + h;
    const double fp = eval(xp);
    xp[i] = x[i] - h;
    const double fm = eval(xp);
    xp[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) return kFail;
    const double central = (fp - fm) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace diffquad
