#include "diffquad/objective.hpp"

namespace diffquad {

RewardConfig RewardConfig::from_config(const Config& cfg) {
  RewardConfig r;
  r.c_v = cfg.get_double("reward.c_v", r.c_v);
  r.c_p = cfg.get_double("reward.c_p", r.c_p);
  r.c_s = cfg.get_double("reward.c_s", r.c_s);
  r.c_s2 = cfg.get_double("reward.c_s2", r.c_s2);
  r.c_a = cfg.get_double("reward.c_a", r.c_a);
  r.c_c = cfg.get_double("reward.c_c", r.c_c);
  r.d_risk = cfg.get_double("reward.d_risk", r.d_risk);
  r.r_uav = cfg.get_double("reward.r_uav", r.r_uav);
  const std::string form = cfg.get_string("reward.collision_penalty_form", "softplus");
  if (form == "softplus")
    r.collision_penalty_form = CollisionPenaltyForm::kSoftplus;
  else if (form == "as-printed-linear")
    r.collision_penalty_form = CollisionPenaltyForm::kAsPrintedLinear;
  else
    throw std::runtime_error(
        "reward.collision_penalty_form must be 'softplus' or 'as-printed-linear'");
  r.validate();
  return r;
}

ReshapeConfig ReshapeConfig::from_config(const Config& cfg) {
  ReshapeConfig r;
  r.enabled = cfg.get_bool("reshape.enabled", r.enabled);
  r.d_min = cfg.get_double("reshape.d_min", r.d_min);
  r.d_max = cfg.get_double("reshape.d_max", r.d_max);
  r.a_max = cfg.get_double("reshape.a_max", r.a_max);
  r.alpha = cfg.get_double("reshape.alpha", r.alpha);
  r.validate();
  return r;
}

}  // namespace diffquad
