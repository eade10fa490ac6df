#pragma once

#include <deque>
#include <optional>
#include <random>
#include <string>

#include "diffquad/sim.hpp"

namespace diffquad {

/// State channels whose gradient flow is KEPT between control steps; channels
/// outside the mask are detached at each step boundary. `rotor` covers the
/// actuation memory (rotor speeds, rotor accelerations, previous angular
/// acceleration). Action flow through the delay buffer is never cut.
struct DetachMask {
  bool p = true;
  bool q = false;
  bool v = false;
  bool omega = false;
  bool rotor = false;

  static DetachMask all() { return {true, true, true, true, true}; }
  static DetachMask none() { return {false, false, false, false, false}; }
  static DetachMask parse(const std::string& text);
  std::string to_string() const;
};

QuadState<Var> apply_detach_mask(const QuadState<Var>& s, const DetachMask& m);

struct TrainConfig {
  double gamma = 0.98;
  int segment_length = 32;  // T, control steps per BPTT segment
  int num_envs = 64;        // N
  int iterations = 2000;
  double lr = 2e-3;
  double lr_final_frac = 0.1;  // cosine decays to this fraction of lr
  double grad_clip = 1.0;      // global-norm clip
  DetachMask detach_mask{};    // default: position only
  bool critic = true;
  double critic_lambda = 0.95;
  double critic_lr = 1e-3;
  int critic_epochs = 4;
  std::uint64_t seed = 0;
  double v_cmd = 3.0;
  int episode_steps = 500;
  int checkpoint_every = 200;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
  static TrainConfig from_config(const Config& cfg);
};

/// Small value network over the 13-real state observation.
class Critic {
 public:
  Critic() = default;
  explicit Critic(std::uint64_t seed, std::vector<int> hidden = {64, 64});

  double value(std::span<const double> state_obs) const;

  /// Records V as one tape node with exact partials w.r.t. the state
  /// observation Vars; critic parameters stay frozen on this path.
  Var value_on_tape(Tape& tape, std::span<const Var> state_obs) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

/// Global-norm clip in place; returns the pre-clip norm.
double clip_global_norm(std::span<double> grad, double max_norm);

/// Adam with bias correction.
class Adam {
 public:
  void step(std::span<double> params, std::span<const double> grad, double lr);
  void reset() { m_.clear(); v_.clear(); t_ = 0; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_, v_;
};

/// Clip-then-Adam policy update. A non-finite gradient skips the update.
/// Returns the pre-clip gradient norm (NaN when skipped).
double update_step(std::span<double> params, std::span<double> grad,
                   const TrainConfig& cfg, double lr, Adam& adam);

/// Persistent per-environment simulation state between segments. Values are
/// carried across segment boundaries; gradients are not.
struct EnvState {
  EnvScenario scenario;
  QuadState<double> state;
  std::vector<Action> delay_slots;
  std::size_t delay_head = 0;
  double prev_d_col = std::numeric_limits<double>::infinity();
  int steps_in_episode = 0;
  std::mt19937_64 rng;
  long episodes = 0;

  void reset_episode(const SimSetup& sim, const ForestParams& forest, double v_cmd);
};

struct StepLog {
  QuadState<double> state;  // post-step
  Action action;
  RewardBreakdown<double> reward;
  double d_col = std::numeric_limits<double>::infinity();
  DoneReason done = DoneReason::kNone;
};

/// Per-environment result of one recorded segment. The tape, reward nodes and
/// policy records stay alive until backward + gradient accumulation ran.
struct SegmentRecord {
  std::vector<Var> step_rewards;                 // on tape, one per control step
  std::vector<Policy::EvalRecord> policy_evals;  // one per control step
  Var loss;                                      // on tape
  std::vector<StepLog> log;
  std::vector<std::array<double, kStateObsDim>> state_obs;  // per step + final
  std::vector<double> rewards;                              // values
  std::vector<bool> dones;
  bool final_done = false;
  double terminal_value = 0.0;
  int collisions = 0;
  int episode_ends = 0;
  bool aborted = false;  // dynamics blew up; env was reset
};

struct RolloutOptions {
  /// Pooled depth replay per control step; live rendering when absent.
  const std::vector<std::vector<double>>* depth_replay = nullptr;
  /// Fixed commanded velocity (otherwise goal-directed from the scenario).
  std::optional<Vec3d> fixed_v_d;
  bool allow_reset = true;
};

/// Rolls one environment for up to T control steps on `tape`, recording every
/// differentiable quantity. Returns the negated discounted reward sum (plus
/// the terminal value bootstrap when a critic is given) as a Var on the tape.
SegmentRecord rollout_segment_env(Tape& tape, EnvState& env, const Policy& policy,
                                  const Critic* critic, const SimSetup& sim,
                                  const ForestParams& forest, const TrainConfig& cfg,
                                  const RolloutOptions& opts);

/// Discounted-return targets for the critic: TD(lambda) over the logged
/// segment, bootstrapped with the current critic (all detached values).
std::vector<double> critic_targets(const SegmentRecord& rec, const Critic& critic,
                                   double gamma, double lambda);

/// A few epochs of Adam regression of V(s_t) toward the lambda-returns.
/// Returns the mean squared error before the first update.
double fit_critic(const std::vector<SegmentRecord>& batch, Critic& critic,
                  const TrainConfig& cfg, Adam& adam);

struct IterationStats {
  double mean_reward = 0.0;
  double collision_rate = 0.0;
  double grad_norm = 0.0;
  double mean_speed = 0.0;
  double mean_tracking_error = 0.0;
  double critic_loss = 0.0;
};

struct TrainResult {
  std::vector<IterationStats> history;
  std::string final_checkpoint;
};

/// Full SHAC-style loop: rollout N envs in parallel, backward per tape,
/// average policy gradients, clip+Adam update, critic fit, metrics CSV and
/// periodic checkpoints under out_dir.
TrainResult train(const SimSetup& sim, const ForestParams& forest, Policy& policy,
                  const TrainConfig& cfg, const std::string& out_dir,
                  bool quiet = false);

}  // namespace diffquad
