#pragma once

#include <atomic>
#include <optional>
#include <random>

#include "diffquad/dynamics.hpp"
#include "diffquad/objective.hpp"
#include "diffquad/policy.hpp"
#include "diffquad/world.hpp"

namespace diffquad {

/// Everything a closed-loop control step needs, shared by training and
/// evaluation. One control step runs `substeps` Euler substeps.
struct SimSetup {
  QuadParams quad;
  CameraModel camera;
  DepthPreprocess depth;
  RewardConfig reward;
  ReshapeConfig reshape;
  ActionBounds bounds;
  double ctrl_dt = 0.025;
  int substeps = 10;
  bool render_ground = true;

  double sim_dt() const { return ctrl_dt / substeps; }

  /// Assembles every module's configuration from one document. The policy
  /// omega_max and the quad thrust ceiling feed the action bounds.
  static SimSetup from_config(const Config& cfg) {
    SimSetup s;
    s.quad = QuadParams::from_config(cfg);
    s.camera = CameraModel::from_config(cfg);
    s.depth = DepthPreprocess::from_config(cfg);
    s.depth.max_range = s.camera.max_range;
    s.reward = RewardConfig::from_config(cfg);
    s.reshape = ReshapeConfig::from_config(cfg);
    const auto om = cfg.get_doubles("policy.omega_max", {3.0});
    if (om.size() == 1)
      s.bounds.omega_max = {om[0], om[0], om[0]};
    else if (om.size() == 3)
      s.bounds.omega_max = {om[0], om[1], om[2]};
    else
      throw std::runtime_error("policy.omega_max needs 1 or 3 values");
    s.bounds.f_max = s.quad.thrust_ceiling();
    s.ctrl_dt = cfg.get_double("sim.ctrl_dt", s.ctrl_dt);
    s.substeps = cfg.get_int("sim.substeps", s.substeps);
    s.render_ground = cfg.get_bool("sim.render_ground", s.render_ground);
    s.bounds.validate();
    return s;
  }
};

/// One task instance: a scene plus start pose and goal.
struct EnvScenario {
  ObstacleField field;
  Vec3d start{0, 0, 1.5};
  double start_yaw = 0.0;
  Vec3d goal{10, 0, 1.5};
  double v_cmd = 3.0;
};

/// Commanded velocity: v_cmd toward the goal (exogenous, not differentiated).
inline Vec3d desired_velocity(const Vec3d& p, const Vec3d& goal, double v_cmd) {
  const Vec3d to_goal = goal - p;
  const double d = std::sqrt(dot(to_goal, to_goal));
  if (d < 1e-6) return {0, 0, 0};
  return to_goal * (v_cmd / d);
}

enum class DoneReason { kNone, kCollision, kOutOfBounds, kGoal, kStepLimit };

/// Episode termination: collision with a cylinder or the ground, leaving the
/// scene bounds (with margin), reaching the goal disc, or the step cap.
inline DoneReason check_done(const Vec3d& p, double d_col, const EnvScenario& sc,
                             double r_uav, int steps_in_episode, int step_limit,
                             double goal_radius = 1.5) {
  if (d_col < r_uav || p.z < r_uav) return DoneReason::kCollision;
  const double mx = sc.field.extent_x / 2 + 2.0, my = sc.field.extent_y / 2 + 2.0;
  if (std::abs(p.x) > mx || std::abs(p.y) > my || p.z > 8.0)
    return DoneReason::kOutOfBounds;
  const Vec3d to_goal = sc.goal - p;
  if (std::sqrt(dot(to_goal, to_goal)) < goal_radius) return DoneReason::kGoal;
  if (steps_in_episode >= step_limit) return DoneReason::kStepLimit;
  return DoneReason::kNone;
}

/// Pooled depth observation at a pose.
inline std::vector<double> observe_depth(const SimSetup& sim, const Vec3d& p,
                                         const Quatd& q, const ObstacleField& field) {
  return preprocess_depth(render_depth(p, q, sim.camera, field, sim.render_ground),
                          sim.depth);
}

}  // namespace diffquad
