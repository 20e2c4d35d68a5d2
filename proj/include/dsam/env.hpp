// Training environment: one aerial manipulator tracked against a sampled
// 6-DoF gripper goal, advanced at the policy rate (150 Hz).  Each env step
// runs two inner-loop ticks (300 Hz) of three physics substeps each (900 Hz).
#pragma once

#include <random>
#include <stdexcept>

#include "dsam/dynamics.hpp"
#include "dsam/inner_loop.hpp"
#include "dsam/model.hpp"
#include "dsam/policy.hpp"
#include "dsam/se3.hpp"

namespace dsam {

// Per-episode plant randomization.  Flags gate only whether a draw is
// *applied*; every draw is always consumed so RNG streams stay aligned
// across configurations (an ablation changes physics, not the dice).
struct DomainRandomization {
  bool payload = true;    // extra EE-carried mass [kg] in [payload_min, payload_max]
  bool stiffness = true;  // joint spring scale in [stiffness_min, stiffness_max]
  bool friction = true;   // joint coulomb+viscous scale in [friction_min, friction_max]
  double payload_min = -0.015;
  double payload_max = 0.120;
  double stiffness_min = 0.75;
  double stiffness_max = 1.25;
  double friction_min = 0.0;
  double friction_max = 1.5;
};

struct EnvConfig {
  ModelParams model;          // nominal plant; also the controller's model
  ObsConfig obs;
  ActionScales scales;
  AttitudeGains gains;
  bool ctbr = false;          // collective-thrust/body-rate action interface
  DomainRandomization dr;
  double episode_seconds = 6.0;
  double crash_height = 0.3;  // terminate below this altitude [m]
  Vector3d spawn{0.0, 0.0, 3.0};
  double goal_xy_range = 1.0;      // x,y ~ U(-r, r) around spawn x,y
  double goal_z_min = 3.0;
  double goal_z_max = 5.0;
  double goal_tilt_range = M_PI / 2.0;  // pitch/roll ~ U(-r, r), yaw ~ U(-pi, pi)
  double joint_init_range = M_PI / 2.0;

  int policy_hz = 150;
  int ticks_per_step = 2;      // inner-loop ticks per env step
  int substeps_per_tick = 3;   // physics steps per inner-loop tick

  int episode_steps() const {
    return static_cast<int>(episode_seconds * policy_hz + 0.5);
  }
  double physics_dt() const {
    return 1.0 / (policy_hz * ticks_per_step * substeps_per_tick);
  }
  void validate() const;
};

struct RewardTerms {
  double pos = 0.0;        // gripper position tracking
  double ori = 0.0;        // gripper orientation tracking
  double action_smooth = 0.0;  // base-command first difference
  double joint_smooth = 0.0;   // joint-reference first difference
  double action_mag = 0.0;     // base-command magnitude
  double total() const { return pos + ori + action_smooth + joint_smooth + action_mag; }
};

// Base command as a 7-vector in physical units: accel (3), body rates (3),
// yaw reference (1).  Smoothness terms difference these across steps with the
// yaw component wrapped.
Eigen::Matrix<double, 7, 1> base_command_vector(const OuterCommand& cmd);

RewardTerms compute_rewards(const Pose& ee, const Pose& goal,
                            const Eigen::Matrix<double, 7, 1>& base_cmd,
                            const Eigen::Matrix<double, 7, 1>& base_cmd_prev,
                            const Vector2d& joint_ref, const Vector2d& joint_ref_prev);

struct StepResult {
  Eigen::VectorXd obs;     // un-normalized observation after the transition
  double reward = 0.0;
  RewardTerms terms;
  double joint_ref_delta = 0.0;  // ||joint_ref - prev||_1, drive-chatter metric
  bool done = false;
  bool crashed = false;    // altitude floor or solver divergence
  bool timeout = false;    // episode length reached (value bootstrap applies)
};

class DsamEnv {
 public:
  DsamEnv(const EnvConfig& cfg, unsigned seed);

  // Samples a fresh goal and randomized plant, re-seats the vehicle at the
  // spawn point with rotors at hover, and returns the first observation.
  Eigen::VectorXd reset();

  // Advances one policy step from a raw (pre-scaling) action.
  StepResult step(const Eigen::Matrix<double, kActionDim, 1>& raw_action);

  // Evaluation hooks.
  void set_goal(const Pose& goal) { goal_ = goal; }
  void set_external_wrench(const ExternalWrench& w) { wrench_ = w; }
  void set_payload(double mass);  // overrides DR payload on the current plant

  const SystemState& state() const { return state_; }
  const Pose& goal() const { return goal_; }
  const ModelParams& plant() const { return plant_; }
  const EnvConfig& config() const { return cfg_; }
  int steps_done() const { return step_count_; }
  Eigen::VectorXd observation() const;

 private:
  void apply_randomization();

  EnvConfig cfg_;
  InnerLoopParams inner_;
  std::mt19937 rng_;
  ModelParams plant_;        // randomized copy used to integrate
  SystemState state_;
  InnerLoopState loop_state_;
  Pose goal_;
  ExternalWrench wrench_;
  Eigen::Matrix<double, 7, 1> prev_base_cmd_ = Eigen::Matrix<double, 7, 1>::Zero();
  Vector2d prev_joint_ref_ = Vector2d::Zero();
  int step_count_ = 0;
  bool episode_live_ = false;
};

}  // namespace dsam
