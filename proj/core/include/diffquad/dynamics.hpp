#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffquad/adtape.hpp"
#include "diffquad/config.hpp"
#include "diffquad/linalg.hpp"

namespace diffquad {

struct DynamicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MotorLagConvention {
  kAsPrinted,  // w <- w + (w_d - w) * exp(-dt/tau)
  kStandard,   // w <- w + (w_d - w) * (1 - exp(-dt/tau))
};

/// Physical parameters of one vehicle. SI units throughout.
struct QuadParams {
  double m = 1.0;                    // mass [kg]
  Mat3d J = Mat3d::diag(5e-3, 5e-3, 9e-3);  // inertia [kg m^2]
  double l = 0.12;                   // arm length [m]
  double c = 0.012;                  // induced torque coefficient [m]
  double k2 = 1.2e-6;                // thrust coefficients of f = k2 w^2 + k1 w' + k0
  double k1 = 0.0;
  double k0 = 0.0;
  double tau = 0.03;                 // motor time constant [s]
  // Body-rate PD gains. Sized so the rate loop stays stable under explicit
  // Euler at sim_dt = 2.5 ms: eigenvalues of Kp J^-1 stay well below 2/dt.
  Mat3d Kp = Mat3d::diag(0.04, 0.04, 0.072);
  Mat3d Kd = Mat3d::diag(1.5e-3, 1.5e-3, 2.7e-3);
  int delay_steps = 1;               // communication delay D, in control steps
  double f_max = -1.0;               // collective thrust ceiling; <0 => 2 m |g|
  Vec3d g{0.0, 0.0, -9.81};          // gravity [m/s^2]
  Vec3d d_world{0.0, 0.0, 0.0};      // constant disturbance force, world frame [N]
  MotorLagConvention motor_lag_convention = MotorLagConvention::kAsPrinted;

  Mat3d J_inv() const;
  double gravity_norm() const { return norm(g); }
  double thrust_ceiling() const { return f_max > 0 ? f_max : 2.0 * m * gravity_norm(); }
  double hover_thrust() const { return m * gravity_norm(); }
  /// Steady-state rotor speed producing hover thrust on one motor.
  double hover_rotor_speed() const {
    const double r = (hover_thrust() / 4.0 - k0) / k2;
    return r > 0 ? std::sqrt(r) : 0.0;
  }

  void validate() const;
  static QuadParams from_config(const Config& cfg);
};

/// Full rigid-body + rotor state. rotor_accel carries the backward-difference
/// rotor acceleration, omega_dot_prev the previous angular acceleration used
/// by the PD derivative term.
template <class S>
struct QuadState {
  Vec3<S> p{};
  Quat<S> q{};
  Vec3<S> v{};
  Vec3<S> omega{};
  std::array<S, 4> rotor{S(0), S(0), S(0), S(0)};
  std::array<S, 4> rotor_accel{S(0), S(0), S(0), S(0)};
  Vec3<S> omega_dot_prev{};
};

template <class S>
struct ActionT {
  Vec3<S> omega_d{};  // desired body rates [rad/s]
  S f_d{};            // collective thrust [N]
};
using Action = ActionT<double>;

/// CTBR command that holds the vehicle at hover (level attitude).
inline Action hover_action(const QuadParams& params) {
  Action a;
  a.f_d = params.hover_thrust();
  return a;
}

/// State at rest with rotors pre-spun to hover speed.
inline QuadState<double> hover_state(const QuadParams& params,
                                     const Vec3d& position = {0, 0, 0},
                                     double yaw = 0.0) {
  QuadState<double> s;
  s.p = position;
  s.q = Quatd::from_yaw(yaw);
  const double w = params.hover_rotor_speed();
  s.rotor = {w, w, w, w};
  return s;
}

// ---- actuation chain ---------------------------------------------------------

template <class S>
Vec3<S> mat_vec(const Mat3d& M, const Vec3<S>& v) {
  return {M(0, 0) * v.x + M(0, 1) * v.y + M(0, 2) * v.z,
          M(1, 0) * v.x + M(1, 1) * v.y + M(1, 2) * v.z,
          M(2, 0) * v.x + M(2, 1) * v.y + M(2, 2) * v.z};
}

/// Body torque from the rate PD law. The desired angular acceleration is
/// taken as zero; the derivative term damps against the previous step's
/// angular acceleration.
template <class S>
Vec3<S> pd_torque(const QuadParams& params, const Vec3<S>& omega,
                  const Vec3<S>& omega_d, const Vec3<S>& omega_dot_prev) {
  return mat_vec(params.Kp, omega_d - omega) - mat_vec(params.Kd, omega_dot_prev);
}

/// Per-motor thrusts realizing a collective thrust and body torque.
/// Closed-form inverse of the configuration matrix
///   [f; eta] = [[1,1,1,1],[0,l,0,-l],[-l,0,l,0],[c,-c,c,-c]] [f1..f4].
template <class S>
std::array<S, 4> allocate(const QuadParams& params, const S& f, const Vec3<S>& eta) {
  const double inv2l = 1.0 / (2.0 * params.l);
  const double inv4c = 1.0 / (4.0 * params.c);
  const S base = 0.25 * f;
  const S rx = eta.x * inv2l;
  const S ry = eta.y * inv2l;
  const S rz = eta.z * inv4c;
  return {base - ry + rz, base + rx - rz, base + ry + rz, base - rx - rz};
}

/// Forward configuration matrix: motor thrusts -> collective thrust + torque.
template <class S>
void compose(const QuadParams& params, const std::array<S, 4>& f, S& f_total,
             Vec3<S>& eta) {
  f_total = f[0] + f[1] + f[2] + f[3];
  eta.x = params.l * (f[1] - f[3]);
  eta.y = params.l * (f[2] - f[0]);
  eta.z = params.c * (f[0] - f[1] + f[2] - f[3]);
}

/// Second-order rotor thrust model f = k2 w^2 + k1 w' + k0.
template <class S>
S thrust_from_speed(const QuadParams& params, const S& rotor_speed,
                    const S& rotor_accel) {
  return params.k2 * rotor_speed * rotor_speed + params.k1 * rotor_accel + params.k0;
}

/// Inverse of the thrust model. Negative radicands clamp to zero speed
/// (gradient is cut below the clamp).
template <class S>
S speed_from_thrust(const QuadParams& params, const S& f, const S& rotor_accel) {
  using std::sqrt;
  const S radicand = (f - params.k1 * rotor_accel - params.k0) * (1.0 / params.k2);
  if (value_of(radicand) <= 0.0) return S(0.0);
  return sqrt(radicand);
}

/// First-order motor response toward the commanded speed.
template <class S>
S motor_lag(const QuadParams& params, const S& rotor_speed, const S& rotor_speed_d,
            double dt) {
  const double e = std::exp(-dt / params.tau);
  const double k =
      params.motor_lag_convention == MotorLagConvention::kAsPrinted ? e : 1.0 - e;
  return rotor_speed + (rotor_speed_d - rotor_speed) * k;
}

template <class S>
struct StateDerivative {
  Vec3<S> dp{};
  Vec3<S> dv{};
  Quat<S> dq{};
  Vec3<S> domega{};
};

/// Rigid-body ODE right-hand side. The thrust vector is [0,0,f] in body
/// frame; the constant disturbance is applied in world frame.
template <class S>
StateDerivative<S> state_derivative(const QuadParams& params,
                                    const QuadState<S>& s, const S& f_total,
                                    const Vec3<S>& eta) {
  StateDerivative<S> d;
  d.dp = s.v;
  const Vec3<S> thrust_world = rotate(s.q, Vec3<S>{S(0.0), S(0.0), f_total});
  const double inv_m = 1.0 / params.m;
  d.dv = Vec3<S>{(thrust_world.x + params.d_world.x) * inv_m + params.g.x,
                 (thrust_world.y + params.d_world.y) * inv_m + params.g.y,
                 (thrust_world.z + params.d_world.z) * inv_m + params.g.z};
  d.dq = quat_derivative(s.q, s.omega);
  const Vec3<S> J_omega = mat_vec(params.J, s.omega);
  const Vec3<S> gyro = cross(s.omega, J_omega);
  d.domega = mat_vec(params.J_inv(), eta - gyro);
  return d;
}

template <class S>
bool state_is_finite(const QuadState<S>& s) {
  const auto ok = [](const S& x) { return std::isfinite(value_of(x)); };
  return ok(s.p.x) && ok(s.p.y) && ok(s.p.z) && ok(s.q.w) && ok(s.q.x) &&
         ok(s.q.y) && ok(s.q.z) && ok(s.v.x) && ok(s.v.y) && ok(s.v.z) &&
         ok(s.omega.x) && ok(s.omega.y) && ok(s.omega.z) && ok(s.rotor[0]) &&
         ok(s.rotor[1]) && ok(s.rotor[2]) && ok(s.rotor[3]);
}

/// One explicit-Euler step of the full actuation + rigid-body chain.
/// The action must already be delay-resolved. Throws DynamicsError if the
/// resulting state is not finite.
template <class S>
QuadState<S> step(const QuadParams& params, const QuadState<S>& s,
                  const ActionT<S>& a, double dt) {
  // PD torque demand, then per-motor thrust demands
  const Vec3<S> eta_d = pd_torque(params, s.omega, a.omega_d, s.omega_dot_prev);
  const std::array<S, 4> f_des = allocate(params, a.f_d, eta_d);

  // invert the thrust model, apply motor lag, recompute realized thrusts
  std::array<S, 4> rotor_new, accel_new, f_act;
  const double inv_dt = 1.0 / dt;
  for (int i = 0; i < 4; ++i) {
    const S w_des = speed_from_thrust(params, f_des[i], s.rotor_accel[i]);
    rotor_new[i] = motor_lag(params, s.rotor[i], w_des, dt);
    accel_new[i] = (rotor_new[i] - s.rotor[i]) * inv_dt;
    f_act[i] = thrust_from_speed(params, rotor_new[i], accel_new[i]);
  }
  S f_total;
  Vec3<S> eta_act;
  compose(params, f_act, f_total, eta_act);

  const StateDerivative<S> d = state_derivative(params, s, f_total, eta_act);

  QuadState<S> out;
  out.p = s.p + d.dp * dt;
  out.v = s.v + d.dv * dt;
  out.q = normalized(Quat<S>{s.q.w + d.dq.w * dt, s.q.x + d.dq.x * dt,
                             s.q.y + d.dq.y * dt, s.q.z + d.dq.z * dt});
  out.omega = s.omega + d.domega * dt;
  out.rotor = rotor_new;
  out.rotor_accel = accel_new;
  out.omega_dot_prev = d.domega;

  if (!state_is_finite(out))
    throw DynamicsError("dynamics step produced a non-finite state");
  return out;
}

/// Fixed-capacity ring buffer modeling communication delay: the action
/// returned is the one pushed D control steps earlier; the first D pops
/// return the prefill (hover) action.
template <class S>
class DelayBuffer {
 public:
  DelayBuffer(int delay_steps, const ActionT<S>& prefill)
      : delay_(delay_steps), slots_(static_cast<std::size_t>(std::max(delay_steps, 1)), prefill) {
    if (delay_steps < 0) throw std::invalid_argument("delay_steps must be >= 0");
  }

  /// Resume from a snapshot (slots_[head] is the next action to pop).
  DelayBuffer(int delay_steps, std::vector<ActionT<S>> slots, std::size_t head)
      : delay_(delay_steps), head_(head), slots_(std::move(slots)) {
    if (delay_steps < 0) throw std::invalid_argument("delay_steps must be >= 0");
    if (slots_.size() != static_cast<std::size_t>(std::max(delay_steps, 1)) ||
        head_ >= slots_.size())
      throw std::invalid_argument("DelayBuffer: bad snapshot");
  }

  ActionT<S> delayed(const ActionT<S>& a) {
    if (delay_ == 0) return a;
    ActionT<S> out = slots_[head_];
    slots_[head_] = a;
    head_ = (head_ + 1) % slots_.size();
    return out;
  }

  int delay_steps() const { return delay_; }
  const std::vector<ActionT<S>>& slots() const { return slots_; }
  std::size_t head() const { return head_; }

 private:
  int delay_ = 0;
  std::size_t head_ = 0;
  std::vector<ActionT<S>> slots_;
};

inline Action values_of(const ActionT<Var>& a) {
  return {{a.omega_d.x.v, a.omega_d.y.v, a.omega_d.z.v}, a.f_d.v};
}
inline Action values_of(const Action& a) { return a; }

// ---- flattening helpers (used by gradient checks and logs) -------------------

inline constexpr int kStateDim = 24;  // p3 q4 v3 omega3 rotor4 rotor_accel4 omega_dot_prev3
inline constexpr int kActionDim = 4;

template <class S>
std::array<S, kStateDim> state_to_array(const QuadState<S>& s) {
  return {s.p.x,           s.p.y,           s.p.z,           s.q.w,
          s.q.x,           s.q.y,           s.q.z,           s.v.x,
          s.v.y,           s.v.z,           s.omega.x,       s.omega.y,
          s.omega.z,       s.rotor[0],      s.rotor[1],      s.rotor[2],
          s.rotor[3],      s.rotor_accel[0], s.rotor_accel[1], s.rotor_accel[2],
          s.rotor_accel[3], s.omega_dot_prev.x, s.omega_dot_prev.y, s.omega_dot_prev.z};
}

template <class S>
QuadState<S> state_from_array(std::span<const S> a) {
  if (a.size() != kStateDim)
    throw std::invalid_argument("state_from_array: need 24 scalars");
  QuadState<S> s;
  s.p = {a[0], a[1], a[2]};
  s.q = {a[3], a[4], a[5], a[6]};
  s.v = {a[7], a[8], a[9]};
  s.omega = {a[10], a[11], a[12]};
  s.rotor = {a[13], a[14], a[15], a[16]};
  s.rotor_accel = {a[17], a[18], a[19], a[20]};
  s.omega_dot_prev = {a[21], a[22], a[23]};
  return s;
}

template <class S>
std::array<S, kActionDim> action_to_array(const ActionT<S>& a) {
  return {a.omega_d.x, a.omega_d.y, a.omega_d.z, a.f_d};
}

template <class S>
ActionT<S> action_from_array(std::span<const S> a) {
  if (a.size() != kActionDim)
    throw std::invalid_argument("action_from_array: need 4 scalars");
  ActionT<S> out;
  out.omega_d = {a[0], a[1], a[2]};
  out.f_d = a[3];
  return out;
}

}  // namespace diffquad
