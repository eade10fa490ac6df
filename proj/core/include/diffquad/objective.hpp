#pragma once

#include <cmath>

#include "diffquad/adtape.hpp"
#include "diffquad/config.hpp"
#include "diffquad/linalg.hpp"

namespace diffquad {

enum class CollisionPenaltyForm { kAsPrintedLinear, kSoftplus };

struct RewardConfig {
  // The velocity and stability terms are non-negative magnitudes, so their
  // weights default negative inside the maximized total.
  double c_v = -1.0;
  double c_p = 0.2;
  double c_s = -0.05;
  double c_s2 = 0.5;
  double c_a = 2.0;
  double c_c = 1.0;
  double d_risk = 1.5;  // distance where the avoidance penalty starts [m]
  double r_uav = 0.2;   // vehicle radius [m]
  CollisionPenaltyForm collision_penalty_form = CollisionPenaltyForm::kSoftplus;

  void validate() const {
    if (!(d_risk > r_uav && r_uav > 0))
      throw std::invalid_argument("RewardConfig: need d_risk > r_uav > 0");
  }
  static RewardConfig from_config(const Config& cfg);
};

struct ReshapeConfig {
  bool enabled = true;
  double d_min = 0.5;
  double d_max = 4.0;
  double a_max = M_PI / 2;  // shifting is unnecessary past 90 degrees
  double alpha = 0.8;       // max shifting fraction

  void validate() const {
    if (!(d_min >= 0 && d_min < d_max))
      throw std::invalid_argument("ReshapeConfig: need 0 <= d_min < d_max");
  }
  static ReshapeConfig from_config(const Config& cfg);
};

template <class S>
struct RewardBreakdown {
  S r_v{};  // velocity tracking magnitude (Huber)
  S r_p{};  // perception alignment cosine
  S r_s{};  // stability magnitude
  S r_a{};  // avoidance penalty (<= 0)
  S r_c{};  // collision penalty
  S total{};
};

/// Huber of the velocity tracking error magnitude (transition at 1.0).
template <class S>
S velocity_reward(const Vec3<S>& v, const Vec3<S>& v_d) {
  return huber(norm(v - v_d));
}

/// Cosine between the velocity and the body x-axis (camera boresight).
/// Zero when the vehicle is essentially static (undefined direction).
template <class S>
S perception_reward(const Vec3<S>& v, const Quat<S>& q) {
  const Vec3d vv = values_of(v);
  if (std::sqrt(dot(vv, vv)) < 1e-3) return S(0.0);
  const Vec3<S> x_body = rotate(q, Vec3<S>{S(1), S(0), S(0)});
  return dot(v, x_body) / (norm(v) * norm(x_body));
}

/// ||Omega|| + c_s2 ||v_dot||; weighted negatively in the total.
template <class S>
S stability_penalty(const Vec3<S>& omega, const Vec3<S>& v_dot, double c_s2) {
  return norm(omega) + c_s2 * norm(v_dot);
}

/// -clip(d_risk - d_col - r_uav, 0)^2 * detach(v_appr). The approach speed
/// contributes magnitude but no gradient.
template <class S>
S avoidance_penalty(const S& d_col, const S& v_appr, const RewardConfig& cfg) {
  const S gap = relu(cfg.d_risk - d_col - cfg.r_uav);
  return -(gap * gap) * detach(v_appr);
}

/// Collision penalty. The form printed in the source material algebraically
/// reduces to 240 (d_col - r_uav); the softplus form keeps the intended
/// "penalty near contact, vanishing far away" shape and is the default.
template <class S>
S collision_penalty(const S& d_col, const RewardConfig& cfg) {
  const S margin = d_col - cfg.r_uav;
  if (cfg.collision_penalty_form == CollisionPenaltyForm::kAsPrintedLinear)
    return 240.0 * margin;
  return -32.0 * softplus(-7.5 * margin);
}

/// Shifting angle as a function of obstacle distance d and incidence angle a.
inline double reshape_angle(double d, double a, const ReshapeConfig& cfg) {
  const double x = (clip(d, cfg.d_min, cfg.d_max) - cfg.d_min) / (cfg.d_max - cfg.d_min);
  const double a_tilde = clip(a, 0.0, cfg.a_max);
  return (cfg.a_max - a_tilde) * cfg.alpha * (1.0 - std::exp(-3.0 * (1.0 - x) * (1.0 - x)));
}

/// Rotates the nearest obstacle point about the vehicle position within the
/// plane spanned by the velocity and the obstacle direction, shifting the
/// distance gradient from opposing the velocity toward lateral avoidance.
/// The rotation amplifies whichever side the obstacle point already leans
/// to (the vehicle gets pushed toward the larger clearance); exact head-on
/// geometry breaks the tie to the vehicle's left via a world-up cross
/// product. Distance to the point is preserved exactly.
inline Vec3d reshape_obstacle_point(const Vec3d& p, const Vec3d& v, const Vec3d& p_col,
                                    const ReshapeConfig& cfg) {
  if (!cfg.enabled) return p_col;
  const Vec3d w = p_col - p;
  const double d = std::sqrt(dot(w, w));
  const double vn = std::sqrt(dot(v, v));
  if (d < 1e-9 || vn < 1e-3) return p_col;
  const Vec3d w_hat = w * (1.0 / d);
  const Vec3d v_hat = v * (1.0 / vn);

  const double cos_a = clip(dot(v_hat, w_hat), -1.0, 1.0);
  const double a = std::acos(cos_a);
  const double delta = reshape_angle(d, a, cfg);
  if (delta <= 0.0) return p_col;

  Vec3d axis = cross(v_hat, w_hat);
  const double axis_n = std::sqrt(dot(axis, axis));
  if (axis_n > 1e-9) {
    axis = axis * (1.0 / axis_n);
  } else {
    // velocity aimed dead at (or away from) the obstacle point: rotate within
    // the horizontal plane, pushing the obstacle point to the vehicle's right
    Vec3d lateral = cross(v_hat, Vec3d{0, 0, 1});
    const double ln = std::sqrt(dot(lateral, lateral));
    lateral = ln > 1e-9 ? lateral * (1.0 / ln) : Vec3d{1, 0, 0};
    axis = cross(v_hat, lateral);  // rotating w_hat toward `lateral`
  }
  return p + rotate_about(w_hat, axis, delta) * d;
}

/// Both vectors expressed in the heading frame (world rotated by yaw only).
template <class S>
void heading_remap(const Vec3<S>& v, const Vec3<S>& v_d, const S& psi, Vec3<S>* v_h,
                   Vec3<S>* v_h_d) {
  using std::cos;
  using std::sin;
  const S c = cos(psi), s = sin(psi);
  *v_h = {c * v.x + s * v.y, -s * v.x + c * v.y, v.z};
  *v_h_d = {c * v_d.x + s * v_d.y, -s * v_d.x + c * v_d.y, v_d.z};
}

/// Weighted five-component total. d_col is the (possibly reshaped)
/// differentiable obstacle distance; has_obstacle=false zeroes both obstacle
/// terms (empty-field sentinel).
template <class S>
RewardBreakdown<S> total_reward(const Vec3<S>& v, const Vec3<S>& v_d, const Quat<S>& q,
                                const Vec3<S>& omega, const Vec3<S>& v_dot,
                                const S& d_col, const S& v_appr, bool has_obstacle,
                                const RewardConfig& cfg) {
  RewardBreakdown<S> r;
  r.r_v = velocity_reward(v, v_d);
  r.r_p = perception_reward(v, q);
  r.r_s = stability_penalty(omega, v_dot, cfg.c_s2);
  if (has_obstacle) {
    r.r_a = avoidance_penalty(d_col, v_appr, cfg);
    r.r_c = collision_penalty(d_col, cfg);
  } else {
    r.r_a = S(0.0);
    r.r_c = S(0.0);
  }
  r.total = cfg.c_v * r.r_v + cfg.c_p * r.r_p + cfg.c_s * r.r_s + cfg.c_a * r.r_a +
            cfg.c_c * r.r_c;
  return r;
}

}  // namespace diffquad
