#include "diffquad/dynamics.hpp"

namespace diffquad {

Mat3d QuadParams::J_inv() const { return inverse(J); }

void QuadParams::validate() const {
  if (!(m > 0)) throw std::invalid_argument("QuadParams: m must be > 0");
  if (!(tau > 0)) throw std::invalid_argument("QuadParams: tau must be > 0");
  if (!(l > 0)) throw std::invalid_argument("QuadParams: l must be > 0");
  if (!(c > 0)) throw std::invalid_argument("QuadParams: c must be > 0");
  if (!(k2 > 0)) throw std::invalid_argument("QuadParams: k2 must be > 0");
  if (delay_steps < 0) throw std::invalid_argument("QuadParams: D must be >= 0");
  if (!(J(0, 0) > 0 && J(1, 1) > 0 && J(2, 2) > 0 && det(J) > 0))
    throw std::invalid_argument("QuadParams: J must be positive definite");
}

namespace {

Mat3d mat_from_values(const std::string& key, const std::vector<double>& v) {
  if (v.size() == 1) return Mat3d::diag(v[0], v[0], v[0]);
  if (v.size() == 3) return Mat3d::diag(v[0], v[1], v[2]);
  if (v.size() == 9) {
    Mat3d m;
    for (int i = 0; i < 9; ++i) m.m[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
    return m;
  }
  throw std::runtime_error("config key '" + key + "': expected 1, 3 or 9 numbers");
}

Vec3d vec_from_values(const std::string& key, const std::vector<double>& v) {
  if (v.size() != 3)
    throw std::runtime_error("config key '" + key + "': expected 3 numbers");
  return {v[0], v[1], v[2]};
}

}  // namespace

QuadParams QuadParams::from_config(const Config& cfg) {
  QuadParams p;
  p.m = cfg.get_double("m", p.m);
  p.J = mat_from_values("J", cfg.get_doubles("J", {p.J(0, 0), p.J(1, 1), p.J(2, 2)}));
  p.l = cfg.get_double("l", p.l);
  p.c = cfg.get_double("c", p.c);
  p.k2 = cfg.get_double("k2", p.k2);
  p.k1 = cfg.get_double("k1", p.k1);
  p.k0 = cfg.get_double("k0", p.k0);
  p.tau = cfg.get_double("tau", p.tau);
  p.Kp = mat_from_values("Kp", cfg.get_doubles("Kp", {p.Kp(0, 0), p.Kp(1, 1), p.Kp(2, 2)}));
  p.Kd = mat_from_values("Kd", cfg.get_doubles("Kd", {p.Kd(0, 0), p.Kd(1, 1), p.Kd(2, 2)}));
  p.delay_steps = cfg.get_int("D", p.delay_steps);
  p.f_max = cfg.get_double("f_max", p.f_max);
  p.g = vec_from_values("g", cfg.get_doubles("g", {p.g.x, p.g.y, p.g.z}));
  p.d_world =
      vec_from_values("d_W", cfg.get_doubles("d_W", {p.d_world.x, p.d_world.y, p.d_world.z}));
  const std::string lag = cfg.get_string("motor_lag_convention", "as-printed");
  if (lag == "as-printed")
    p.motor_lag_convention = MotorLagConvention::kAsPrinted;
  else if (lag == "standard")
    p.motor_lag_convention = MotorLagConvention::kStandard;
  else
    throw std::runtime_error("motor_lag_convention must be 'as-printed' or 'standard'");
  p.validate();
  return p;
}

}  // namespace diffquad
