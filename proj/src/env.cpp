#include "dsam/env.hpp"

#include <cmath>

namespace dsam {

void EnvConfig::validate() const {
  model.validate();
  if (!(episode_seconds > 0.0)) throw std::invalid_argument("episode_seconds must be positive");
  if (!(crash_height >= 0.0)) throw std::invalid_argument("crash_height must be non-negative");
  if (!(goal_z_min <= goal_z_max)) throw std::invalid_argument("goal z range inverted");
  if (policy_hz <= 0 || ticks_per_step <= 0 || substeps_per_tick <= 0)
    throw std::invalid_argument("rate divisors must be positive");
  if (!(dr.payload_min <= dr.payload_max) || !(dr.stiffness_min <= dr.stiffness_max) ||
      !(dr.friction_min <= dr.friction_max))
    throw std::invalid_argument("randomization range inverted");
  if (model.ee_mass + dr.payload_min <= 0.0)
    throw std::invalid_argument("payload range would make the gripper body massless");
}

Eigen::Matrix<double, 7, 1> base_command_vector(const OuterCommand& cmd) {
  Eigen::Matrix<double, 7, 1> v;
  v << cmd.accel_des, cmd.bodyrate_ff, cmd.yaw_ref;
  return v;
}

RewardTerms compute_rewards(const Pose& ee, const Pose& goal,
                            const Eigen::Matrix<double, 7, 1>& base_cmd,
                            const Eigen::Matrix<double, 7, 1>& base_cmd_prev,
                            const Vector2d& joint_ref, const Vector2d& joint_ref_prev) {
  RewardTerms r;
  r.pos = 4.0 * std::exp(-1.2 * (ee.position - goal.position).norm());
  r.ori = std::exp(-geodesic_angle(ee.orientation, goal.orientation));

  Eigen::Matrix<double, 7, 1> d_base = base_cmd - base_cmd_prev;
  d_base(6) = wrap_angle(d_base(6));
  r.action_smooth = 0.5 * std::exp(-d_base.squaredNorm());
  r.joint_smooth = std::exp(-(joint_ref - joint_ref_prev).lpNorm<1>());
  r.action_mag = 0.1 * std::exp(-base_cmd.squaredNorm());
  return r;
}

DsamEnv::DsamEnv(const EnvConfig& cfg, unsigned seed) : cfg_(cfg), rng_(seed) {
  cfg_.validate();
  inner_ = InnerLoopParams::from_model(cfg_.model);
  inner_.gains = cfg_.gains;
  inner_.rate_hz = static_cast<double>(cfg_.policy_hz * cfg_.ticks_per_step);
  inner_.ctbr = cfg_.ctbr;
  inner_.validate();
  plant_ = cfg_.model;
  reset();
}

void DsamEnv::apply_randomization() {
  // One uniform per knob, drawn unconditionally: disabling a flag must not
  // shift the draws consumed by everything downstream.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u_payload = uni(rng_);
  const double u_stiff = uni(rng_);
  const double u_fric = uni(rng_);

  plant_ = cfg_.model;
  const DomainRandomization& dr = cfg_.dr;
  if (dr.payload) {
    const double payload = dr.payload_min + u_payload * (dr.payload_max - dr.payload_min);
    plant_.payload_mass = payload;
    // The gripper body's rotational inertia grows with what it carries.
    plant_.ee_inertia *= (plant_.ee_mass + payload) / plant_.ee_mass;
  }
  if (dr.stiffness) {
    plant_.joint_stiffness *= dr.stiffness_min + u_stiff * (dr.stiffness_max - dr.stiffness_min);
  }
  if (dr.friction) {
    const double s = dr.friction_min + u_fric * (dr.friction_max - dr.friction_min);
    plant_.joint_coulomb_friction *= s;
    plant_.joint_viscous_friction *= s;
  }
}

Eigen::VectorXd DsamEnv::reset() {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  // Fixed draw order: goal position (3), goal orientation (3), joints (2),
  // then the randomization block.
  goal_.position = Vector3d(cfg_.spawn.x() + cfg_.goal_xy_range * sym(rng_),
                            cfg_.spawn.y() + cfg_.goal_xy_range * sym(rng_),
                            cfg_.goal_z_min +
                                0.5 * (sym(rng_) + 1.0) * (cfg_.goal_z_max - cfg_.goal_z_min));
  const double yaw = M_PI * sym(rng_);
  const double pitch = cfg_.goal_tilt_range * sym(rng_);
  const double roll = cfg_.goal_tilt_range * sym(rng_);
  goal_.orientation = quat_from_euler_zyx(yaw, pitch, roll);

  state_ = SystemState{};
  state_.p_b = cfg_.spawn;
  state_.R_wb = Matrix3d::Identity();
  state_.theta = Vector2d(cfg_.joint_init_range * sym(rng_), cfg_.joint_init_range * sym(rng_));
  state_.theta_dot.setZero();
  state_.v_b.setZero();
  state_.omega_b.setZero();

  apply_randomization();

  // Spinning the rotors up from rest is not part of the task; start them at
  // the randomized plant's hover equilibrium.
  state_.rotor_speeds.setConstant(plant_.hover_rotor_speed());

  loop_state_ = InnerLoopState{};
  wrench_ = ExternalWrench{};
  prev_base_cmd_.setZero();
  prev_joint_ref_.setZero();
  step_count_ = 0;
  episode_live_ = true;
  return observation();
}

void DsamEnv::set_payload(double mass) {
  plant_.payload_mass = mass;
  plant_.ee_inertia = cfg_.model.ee_inertia * (plant_.ee_mass + mass) / plant_.ee_mass;
  state_.rotor_speeds.setConstant(plant_.hover_rotor_speed());
}

Eigen::VectorXd DsamEnv::observation() const {
  return build_observation(state_, goal_, cfg_.model, cfg_.obs);
}

StepResult DsamEnv::step(const Eigen::Matrix<double, kActionDim, 1>& raw_action) {
  if (!episode_live_) throw std::logic_error("step() after episode end; call reset()");

  const OuterCommand cmd = scale_actions(raw_action, cfg_.scales);
  const double dt = cfg_.physics_dt();

  StepResult out;
  try {
    for (int tick = 0; tick < cfg_.ticks_per_step; ++tick) {
      ControlInput u = inner_loop_tick(cmd, state_, cfg_.model, loop_state_, inner_);
      for (int sub = 0; sub < cfg_.substeps_per_tick; ++sub) {
        // The joint servo runs at the physics rate against the latest state;
        // the rotor command holds for the whole tick.
        u.joint_torque =
            joint_actuator(cmd.joint_ref, state_.theta, state_.theta_dot, cfg_.model);
        state_ = dsam::step(state_, u, wrench_, dt, plant_);
      }
    }
  } catch (const SimDivergence&) {
    out.crashed = true;
  }
  ++step_count_;

  const Eigen::Matrix<double, 7, 1> base_cmd = base_command_vector(cmd);
  out.terms = compute_rewards(forward_kinematics(state_, plant_), goal_, base_cmd,
                              prev_base_cmd_, cmd.joint_ref, prev_joint_ref_);
  out.reward = out.terms.total();
  out.joint_ref_delta = (cmd.joint_ref - prev_joint_ref_).lpNorm<1>();
  prev_base_cmd_ = base_cmd;
  prev_joint_ref_ = cmd.joint_ref;

  if (state_.p_b.z() < cfg_.crash_height || !state_.p_b.allFinite()) out.crashed = true;
  if (out.crashed) {
    out.done = true;
  } else if (step_count_ >= cfg_.episode_steps()) {
    out.done = true;
    out.timeout = true;
  }
  episode_live_ = !out.done;
  out.obs = observation();
  return out;
}

}  // namespace dsam
