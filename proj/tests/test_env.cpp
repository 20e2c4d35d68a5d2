#include "dsam/env.hpp"

#include <cmath>

#include "doctest.h"

using namespace dsam;

namespace {

EnvConfig base_config() {
  EnvConfig cfg;
  return cfg;
}

EnvConfig no_dr_config() {
  EnvConfig cfg;
  cfg.dr.payload = cfg.dr.stiffness = cfg.dr.friction = false;
  return cfg;
}

Eigen::Matrix<double, kActionDim, 1> zero_action() {
  return Eigen::Matrix<double, kActionDim, 1>::Zero();
}

template <typename A, typename B>
bool same_bits(const A& a, const B& b) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("reward is exactly 6.6 at the goal with a quiet repeated command") {
  Pose ee;
  ee.position = Vector3d(0.4, -0.2, 3.1);
  ee.orientation = quat_from_euler_zyx(0.7, 0.3, -0.5);
  const Eigen::Matrix<double, 7, 1> cmd = Eigen::Matrix<double, 7, 1>::Zero();
  const RewardTerms r = compute_rewards(ee, ee, cmd, cmd, Vector2d::Zero(), Vector2d::Zero());
  CHECK(r.pos == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(r.ori == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.action_smooth == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.joint_smooth == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.action_mag == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(std::abs(r.total() - 6.6) < 1e-12);
}

TEST_CASE("position term follows the exponential of the distance") {
  Pose ee, goal;
  ee.position = Vector3d(1.0, 2.0, 3.0);
  goal.position = Vector3d(1.0, 2.0, 4.0);  // 1 m apart
  const Eigen::Matrix<double, 7, 1> cmd = Eigen::Matrix<double, 7, 1>::Zero();
  const RewardTerms r = compute_rewards(ee, goal, cmd, cmd, Vector2d::Zero(), Vector2d::Zero());
  CHECK(std::abs(r.pos - 4.0 * std::exp(-1.2)) < 1e-12);
}

TEST_CASE("orientation term at a half-turn error") {
  Pose ee, goal;
  goal.orientation = quat_from_axis_angle(Vector3d::UnitX(), M_PI);
  const Eigen::Matrix<double, 7, 1> cmd = Eigen::Matrix<double, 7, 1>::Zero();
  const RewardTerms r = compute_rewards(ee, goal, cmd, cmd, Vector2d::Zero(), Vector2d::Zero());
  CHECK(std::abs(r.ori - std::exp(-M_PI)) < 1e-12);
}

TEST_CASE("command-difference term wraps the yaw component") {
  Pose ee;
  Eigen::Matrix<double, 7, 1> prev = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 1> cur = Eigen::Matrix<double, 7, 1>::Zero();
  prev(6) = 3.0;
  cur(6) = -3.0;  // across the seam: true difference is 2*pi - 6
  const double d = 2.0 * M_PI - 6.0;
  const RewardTerms r = compute_rewards(ee, ee, cur, prev, Vector2d::Zero(), Vector2d::Zero());
  CHECK(std::abs(r.action_smooth - 0.5 * std::exp(-d * d)) < 1e-12);
  // Magnitude term sees the raw current command, not the difference.
  CHECK(std::abs(r.action_mag - 0.1 * std::exp(-9.0)) < 1e-12);
}

TEST_CASE("joint-reference smoothness uses the L1 difference") {
  Pose ee;
  const Eigen::Matrix<double, 7, 1> cmd = Eigen::Matrix<double, 7, 1>::Zero();
  const RewardTerms r =
      compute_rewards(ee, ee, cmd, cmd, Vector2d(0.3, -0.2), Vector2d(0.1, 0.1));
  CHECK(std::abs(r.joint_smooth - std::exp(-0.5)) < 1e-12);
}

TEST_CASE("reset sampling stays inside the documented ranges") {
  EnvConfig cfg = base_config();
  DsamEnv env(cfg, 7u);
  for (int k = 0; k < 200; ++k) {
    env.reset();
    const Pose& g = env.goal();
    CHECK(std::abs(g.position.x()) <= cfg.goal_xy_range);
    CHECK(std::abs(g.position.y()) <= cfg.goal_xy_range);
    CHECK(g.position.z() >= cfg.goal_z_min);
    CHECK(g.position.z() <= cfg.goal_z_max);
    CHECK(std::abs(env.state().theta(0)) <= cfg.joint_init_range);
    CHECK(std::abs(env.state().theta(1)) <= cfg.joint_init_range);
    const ModelParams& plant = env.plant();
    CHECK(plant.payload_mass >= cfg.dr.payload_min - 1e-12);
    CHECK(plant.payload_mass <= cfg.dr.payload_max + 1e-12);
    CHECK(plant.joint_stiffness >= cfg.model.joint_stiffness * cfg.dr.stiffness_min - 1e-12);
    CHECK(plant.joint_stiffness <= cfg.model.joint_stiffness * cfg.dr.stiffness_max + 1e-12);
    CHECK(plant.joint_coulomb_friction >= 0.0);
    CHECK(plant.joint_coulomb_friction <=
          cfg.model.joint_coulomb_friction * cfg.dr.friction_max + 1e-12);
    // The vehicle starts at the spawn point at rest with spinning rotors.
    CHECK(same_bits(env.state().p_b, cfg.spawn));
    CHECK(env.state().v_b.norm() == 0.0);
    CHECK(env.state().rotor_speeds(0) == doctest::Approx(env.plant().hover_rotor_speed()));
  }
}

TEST_CASE("disabling randomization leaves the dice stream untouched") {
  // Same seed, DR on vs off: the sampled goals and joint angles must match
  // draw for draw, episode after episode.
  DsamEnv on(base_config(), 123u);
  DsamEnv off(no_dr_config(), 123u);
  for (int k = 0; k < 20; ++k) {
    CHECK(same_bits(on.goal().position, off.goal().position));
    CHECK(on.goal().orientation.w == off.goal().orientation.w);
    CHECK(on.goal().orientation.x == off.goal().orientation.x);
    CHECK(same_bits(on.state().theta, off.state().theta));
    // The plant differs: one is randomized, the other is nominal.
    CHECK(off.plant().payload_mass == 0.0);
    CHECK(off.plant().joint_stiffness == off.config().model.joint_stiffness);
    on.reset();
    off.reset();
  }
}

TEST_CASE("same seed reproduces the same trajectory bit for bit") {
  DsamEnv a(base_config(), 99u);
  DsamEnv b(base_config(), 99u);
  Eigen::Matrix<double, kActionDim, 1> act;
  act << 0.3, -0.2, 0.1, 0.05, -0.4, 0.2, 0.3, 0.6, -0.5;
  for (int k = 0; k < 30; ++k) {
    const StepResult ra = a.step(act);
    const StepResult rb = b.step(act);
    CHECK(ra.reward == rb.reward);
    CHECK(same_bits(ra.obs, rb.obs));
  }
  CHECK(same_bits(a.state().p_b, b.state().p_b));
  CHECK(same_bits(a.state().rotor_speeds, b.state().rotor_speeds));
  CHECK(same_bits(a.state().theta, b.state().theta));
}

TEST_CASE("commanding hard downward acceleration ends in a crash") {
  DsamEnv env(no_dr_config(), 5u);
  Eigen::Matrix<double, kActionDim, 1> act = zero_action();
  act(2) = -2.0;  // saturated downward acceleration channel
  bool crashed = false;
  for (int k = 0; k < env.config().episode_steps(); ++k) {
    const StepResult r = env.step(act);
    if (r.done) {
      crashed = r.crashed;
      CHECK(!r.timeout);
      break;
    }
  }
  CHECK(crashed);
  CHECK(env.state().p_b.z() < env.config().crash_height);
  CHECK_THROWS_AS(env.step(act), std::logic_error);
}

TEST_CASE("a quiet hover reaches the episode timeout") {
  // Joints start at rest: a swinging arm would push the (position-blind)
  // vehicle sideways and turn this into a drift test instead.
  EnvConfig cfg = no_dr_config();
  cfg.joint_init_range = 0.0;
  DsamEnv env(cfg, 11u);
  StepResult last;
  int steps = 0;
  for (;; ++steps) {
    last = env.step(zero_action());
    if (last.done) break;
  }
  CHECK(steps + 1 == env.config().episode_steps());
  CHECK(last.timeout);
  CHECK(!last.crashed);
  // Thrust balances weight exactly under the nominal plant: little drift.
  CHECK(std::abs(env.state().p_b.z() - env.config().spawn.z()) < 0.5);
}

TEST_CASE("rate divisors produce the documented clock tree") {
  const EnvConfig cfg = base_config();
  CHECK(cfg.episode_steps() == 900);
  CHECK(cfg.physics_dt() == doctest::Approx(1.0 / 900.0).epsilon(1e-15));
}

TEST_CASE("observation matches the assembly helper and the width follows the flags") {
  EnvConfig cfg = base_config();
  cfg.obs.joint_pos = false;
  DsamEnv env(cfg, 3u);
  const Eigen::VectorXd obs = env.observation();
  CHECK(obs.size() == cfg.obs.dim());
  const Eigen::VectorXd ref = build_observation(env.state(), env.goal(), cfg.model, cfg.obs);
  CHECK(same_bits(obs, ref));
}

TEST_CASE("an evaluation payload override rescales the gripper body") {
  DsamEnv env(no_dr_config(), 2u);
  const double i_before = env.plant().ee_inertia(0, 0);
  env.set_payload(0.05);
  CHECK(env.plant().payload_mass == 0.05);
  const double scale = (env.config().model.ee_mass + 0.05) / env.config().model.ee_mass;
  CHECK(env.plant().ee_inertia(0, 0) == doctest::Approx(i_before * scale).epsilon(1e-12));
}

TEST_CASE("rejects inverted randomization ranges") {
  EnvConfig cfg = base_config();
  cfg.dr.payload_min = 0.2;
  cfg.dr.payload_max = 0.1;
  CHECK_THROWS_AS(DsamEnv(cfg, 0u), std::invalid_argument);
}
