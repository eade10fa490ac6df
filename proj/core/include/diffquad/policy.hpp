#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffquad/adtape.hpp"
#include "diffquad/config.hpp"
#include "diffquad/dynamics.hpp"
#include "diffquad/linalg.hpp"
#include "diffquad/objective.hpp"

namespace diffquad {

inline constexpr int kStateObsDim = 13;   // v_H_d(3) v_H(3) omega(3) q_H(4)
inline constexpr int kDepthObsDim = 192;  // pooled 12x16
inline constexpr int kObsDim = kStateObsDim + kDepthObsDim;
inline constexpr int kPolicyOutDim = 4;

/// Canonical observation layout string; its hash is pinned in checkpoints so
/// a policy can never be fed observations assembled in a different order.
inline constexpr const char* kObsLayout = "vHd3.vH3.omega3.qH4.invdepth192";

std::uint64_t observation_layout_checksum();

struct ActionBounds {
  Vec3d omega_max{3.0, 3.0, 3.0};  // per-axis body-rate bound [rad/s]
  double f_max = 19.62;            // collective thrust ceiling [N]

  void validate() const;
};

/// Plain fully-connected stack: affine layers with tanh between them, linear
/// last layer. Parameters live in one flat vector (per layer: row-major
/// weights, then biases).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void forward(std::span<const double> in, std::span<double> out) const;

  /// Activations of every layer (input included), kept so gradients can be
  /// propagated later without re-running the forward pass.
  struct Trace {
    std::vector<double> acts;  // concatenated a_0 .. a_{L-1} and the raw output
  };
  void forward_trace(std::span<const double> in, std::span<double> out,
                     Trace& trace) const;

  /// d out_k / d in_j for every output row, from a stored trace.
  /// jac must hold out_dim*in_dim doubles, row-major.
  void input_jacobian(const Trace& trace, std::span<double> jac) const;

  /// Accumulates d(adjoint . out)/d(params) into grad (same length as params).
  void param_vjp(const Trace& trace, std::span<const double> out_adjoint,
                 std::span<double> grad) const;

 private:
  std::vector<int> dims_;
  std::vector<double> params_;
  std::vector<std::size_t> w_off_, b_off_;
  friend class Policy;
};

struct PolicyConfig {
  std::vector<int> hidden = {256, 256, 128, 128, 64};
  std::uint64_t seed = 0;

  static PolicyConfig from_config(const Config& cfg);
};

/// Depth-and-state to CTBR actor. The network is recorded onto rollout tapes
/// through exact input-Jacobian rows; weight gradients are recovered from the
/// recorded action adjoints afterwards (see accumulate_param_grad).
class Policy {
 public:
  Policy() = default;
  Policy(const PolicyConfig& cfg, const ActionBounds& bounds);

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const ActionBounds& bounds() const { return bounds_; }
  std::vector<double>& params() { return net_.params(); }
  const std::vector<double>& params() const { return net_.params(); }

  /// Raw (pre-squash) network output for a plain observation.
  std::array<double, kPolicyOutDim> raw(std::span<const double> obs) const;

  /// Plain closed-loop action (squashed).
  Action act(std::span<const double> obs) const;

  /// One recorded evaluation: action Vars wired to the observation Vars.
  struct EvalRecord {
    Mlp::Trace trace;
    std::array<Var, kPolicyOutDim> raw;
  };
  std::array<Var, kPolicyOutDim> raw_on_tape(Tape& tape,
                                             std::span<const Var> obs,
                                             EvalRecord& rec) const;

  /// Adds the parameter gradient implied by the raw-output adjoints of one
  /// recorded evaluation: grad += (d raw / d params)^T adjoint.
  void accumulate_param_grad(const EvalRecord& rec, const Tape& tape,
                             std::span<double> grad) const;

  void save(const std::string& path) const;
  static Policy load(const std::string& path);

 private:
  Mlp net_;
  ActionBounds bounds_;
};

/// Squash raw network outputs into the bounded CTBR command.
template <class S>
ActionT<S> squash_action(const std::array<S, kPolicyOutDim>& raw,
                         const ActionBounds& b) {
  using std::tanh;
  ActionT<S> a;
  a.omega_d = {b.omega_max.x * tanh(raw[0]), b.omega_max.y * tanh(raw[1]),
               b.omega_max.z * tanh(raw[2])};
  a.f_d = b.f_max * 0.5 * (tanh(raw[3]) + 1.0);
  return a;
}

/// Fixed-order observation assembly: heading-frame desired and current
/// velocity, body rates, heading-local attitude quaternion (w >= 0), then the
/// pooled inverted depth. Rejects non-finite inputs.
template <class S>
std::array<S, kObsDim> assemble_observation(const QuadState<S>& state,
                                            const Vec3<S>& v_d,
                                            std::span<const double> pooled_depth) {
  using std::cos;
  using std::sin;
  if (pooled_depth.size() != kDepthObsDim)
    throw std::invalid_argument("assemble_observation: pooled depth must be 12x16");

  const S psi = yaw_of(state.q);
  Vec3<S> v_h, v_h_d;
  heading_remap(state.v, v_d, psi, &v_h, &v_h_d);

  // attitude with the yaw rotation removed, sign-normalized
  const S half = 0.5 * psi;
  const Quat<S> yaw_inv{cos(half), S(0.0), S(0.0), -sin(half)};
  Quat<S> q_h = yaw_inv * state.q;
  if (value_of(q_h.w) < 0.0) q_h = {-q_h.w, -q_h.x, -q_h.y, -q_h.z};

  std::array<S, kObsDim> obs;
  int k = 0;
  const auto put = [&](const S& x) {
    if (!std::isfinite(value_of(x)))
      throw std::invalid_argument("assemble_observation: non-finite input");
    obs[static_cast<std::size_t>(k++)] = x;
  };
  put(v_h_d.x);
  put(v_h_d.y);
  put(v_h_d.z);
  put(v_h.x);
  put(v_h.y);
  put(v_h.z);
  put(state.omega.x);
  put(state.omega.y);
  put(state.omega.z);
  put(q_h.w);
  put(q_h.x);
  put(q_h.y);
  put(q_h.z);
  for (double d : pooled_depth) put(S(d));
  return obs;
}

}  // namespace diffquad
