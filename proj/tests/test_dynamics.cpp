#include <doctest.h>

#include <random>

#include "dsam/dynamics.hpp"
#include "support/lagrangian_oracle.hpp"

using namespace dsam;

namespace {

struct RandomCase {
  SystemState s;
  Vector2d joint_torque;
  ExternalWrench wrench;
};

Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q = Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
  return quat_to_rotmat(q);
}

RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0), vel(-2.0, 2.0), om(-3.0, 3.0),
      th(-1.4, 1.4), td(-3.0, 3.0), wrot(150.0, 2000.0), tq(-0.6, 0.6), fex(-2.0, 2.0),
      tex(-0.5, 0.5);
  RandomCase c;
  c.s.p_b = Vector3d(pos(rng), pos(rng), pos(rng));
  c.s.R_wb = random_rotation(rng);
  c.s.theta = Vector2d(th(rng), th(rng));
  c.s.v_b = Vector3d(vel(rng), vel(rng), vel(rng));
  c.s.omega_b = Vector3d(om(rng), om(rng), om(rng));
  // Keep joint rates away from the Coulomb stick region so the friction law
  // is locally smooth for the oracle.
  do {
    c.s.theta_dot = Vector2d(td(rng), td(rng));
  } while (c.s.theta_dot.cwiseAbs().minCoeff() < 0.05);
  c.s.rotor_speeds = Vector4d(wrot(rng), wrot(rng), wrot(rng), wrot(rng));
  c.joint_torque = Vector2d(tq(rng), tq(rng));
  c.wrench.force = Vector3d(fex(rng), fex(rng), fex(rng));
  c.wrench.torque = Vector3d(tex(rng), tex(rng), tex(rng));
  return c;
}

}  // namespace

TEST_CASE("forward dynamics matches the variational oracle") {
  const ModelParams p;
  std::mt19937_64 rng(42);
  for (int i = 0; i < 100; ++i) {
    const RandomCase c = random_case(rng);
    const Vector8d vdot = forward_dynamics(c.s, c.joint_torque, c.wrench, p);

    oracle::OracleInput in;
    in.rotor_speeds = c.s.rotor_speeds;
    in.joint_torque = c.joint_torque;
    in.ext_force = c.wrench.force;
    in.ext_torque = c.wrench.torque;
    const Vector8d ref = oracle::chart_acceleration(c.s, in, p);

    const double rel = (vdot - ref).norm() / std::max(1.0, ref.norm());
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("mass matrix matches the oracle's second derivative of KE") {
  const ModelParams p;
  std::mt19937_64 rng(43);
  for (int i = 0; i < 20; ++i) {
    const RandomCase c = random_case(rng);
    const Matrix8d M = mass_matrix(c.s, p);

    oracle::Vec8 x = oracle::Vec8::Zero();
    x.segment<3>(0) = c.s.p_b;
    x.tail<2>() = c.s.theta;
    oracle::Vec8 xd;
    xd << c.s.v_b, c.s.omega_b, c.s.theta_dot;
    const Matrix8d A = oracle::chart_mass_matrix(x, xd, c.s.R_wb, p);

    CHECK((M - A).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("mass matrix is symmetric positive definite") {
  const ModelParams p;
  std::mt19937_64 rng(44);
  for (int i = 0; i < 200; ++i) {
    const RandomCase c = random_case(rng);
    const Matrix8d M = mass_matrix(c.s, p);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix8d> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("kinetic energy is invariant under a world yaw") {
  const ModelParams p;
  std::mt19937_64 rng(45);
  for (int i = 0; i < 100; ++i) {
    const RandomCase c = random_case(rng);
    const Vector8d v = c.s.velocity();
    const double ke = 0.5 * v.dot(mass_matrix(c.s, p) * v);

    const Matrix3d Rz = quat_to_rotmat(quat_from_axis_angle(Vector3d::UnitZ(), 1.234));
    SystemState y = c.s;
    y.R_wb = Rz * c.s.R_wb;
    y.v_b = Rz * c.s.v_b;  // omega_b and theta_dot are frame-local
    const Vector8d vy = y.velocity();
    const double ke_y = 0.5 * vy.dot(mass_matrix(y, p) * vy);
    CHECK(ke_y == doctest::Approx(ke).epsilon(1e-10));
  }
}

TEST_CASE("power balance: Mdot - 2C is skew in the quadratic form sense") {
  const ModelParams p;
  std::mt19937_64 rng(46);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const RandomCase c = random_case(rng);
    const Vector8d v = c.s.velocity();

    // C v = bias(q, v) - bias(q, 0).
    const Vector8d Cv = bias_forces(c.s, p) - gravity_forces(c.s, p);

    // Mdot along the flow q += v h.
    auto flow = [&](double t) {
      SystemState s = c.s;
      s.p_b += t * c.s.v_b;
      s.R_wb = c.s.R_wb * rotmat_exp(c.s.omega_b * t);
      s.theta += t * c.s.theta_dot;
      return mass_matrix(s, p);
    };
    const Matrix8d Mdot = (flow(h) - flow(-h)) / (2.0 * h);

    const double lhs = v.dot(Mdot * v);
    const double rhs = 2.0 * v.dot(Cv);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("free fall drops exactly one RK4 ballistic arc") {
  ModelParams p;
  p.rotor_speed_min = 0.0;  // let the rotors stay off
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 3.0);
  const ControlInput u;  // zero rotor command, zero joint torque
  const ExternalWrench w;
  const double dt = 1.0 / 900.0;
  for (int i = 0; i < 90; ++i) s = step(s, u, w, dt, p, Integrator::Rk4);
  // 0.1 s of free fall: dz = -g t^2 / 2 = -0.04905 m.
  CHECK(std::abs((s.p_b.z() - 3.0) - (-0.04905)) < 1e-5);
  CHECK(s.v_b.z() == doctest::Approx(-0.981).epsilon(1e-9));
  CHECK(s.p_b.head<2>().norm() < 1e-12);
  CHECK(s.theta.norm() < 1e-12);
}

TEST_CASE("free-fall acceleration is uniform in any configuration") {
  ModelParams p;
  p.joint_stiffness = 0.0;  // spring would drive internal motion
  std::mt19937_64 rng(47);
  for (int i = 0; i < 20; ++i) {
    RandomCase c = random_case(rng);
    c.s.v_b.setZero();
    c.s.omega_b.setZero();
    c.s.theta_dot.setZero();
    c.s.rotor_speeds.setZero();
    const Vector8d vdot = forward_dynamics(c.s, Vector2d::Zero(), ExternalWrench{}, p);
    CHECK((vdot.head<3>() - Vector3d(0.0, 0.0, -p.gravity)).norm() < 1e-9);
    CHECK(vdot.tail<5>().norm() < 1e-9);
  }
}

TEST_CASE("RK4 conserves energy while tumbling") {
  ModelParams p;
  p.rotor_speed_min = 0.0;
  p.joint_damping = 0.0;
  p.joint_coulomb_friction = 0.0;
  p.joint_viscous_friction = 0.0;
  // joint_stiffness stays: the spring is conservative and counted in
  // total_energy.
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 5.0);
  s.theta = Vector2d(0.2, -0.1);
  s.v_b = Vector3d(1.0, 0.5, -0.3);
  s.omega_b = Vector3d(2.0, -1.0, 1.5);
  s.theta_dot = Vector2d(0.3, -0.2);
  const double e0 = total_energy(s, p);
  const ControlInput u;
  const ExternalWrench w;
  const double dt = 1.0 / 900.0;
  double max_drift = 0.0;
  for (int i = 0; i < 900; ++i) {
    s = step(s, u, w, dt, p, Integrator::Rk4);
    // Hard stops are inelastic; this trajectory must stay clear of them.
    CHECK(s.theta.cwiseAbs().maxCoeff() < p.joint_limit - 1e-6);
    max_drift = std::max(max_drift, std::abs(total_energy(s, p) - e0));
  }
  CHECK(max_drift < 1e-3);
}

TEST_CASE("semi-implicit Euler keeps energy drift bounded") {
  ModelParams p;
  p.rotor_speed_min = 0.0;
  p.joint_damping = 0.0;
  p.joint_coulomb_friction = 0.0;
  p.joint_viscous_friction = 0.0;
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 5.0);
  s.theta = Vector2d(0.2, -0.1);
  s.v_b = Vector3d(1.0, 0.5, -0.3);
  s.omega_b = Vector3d(2.0, -1.0, 1.5);
  s.theta_dot = Vector2d(0.3, -0.2);
  const double e0 = total_energy(s, p);
  const double dt = 1.0 / 900.0;
  double max_drift = 0.0;
  for (int i = 0; i < 900; ++i) {
    s = step(s, {}, {}, dt, p, Integrator::SemiImplicitEuler);
    max_drift = std::max(max_drift, std::abs(total_energy(s, p) - e0));
  }
  CHECK(max_drift < 0.05);
}

TEST_CASE("hover is an equilibrium") {
  const ModelParams p;
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 3.0);
  s.rotor_speeds.setConstant(p.hover_rotor_speed());
  const Vector8d vdot = forward_dynamics(s, Vector2d::Zero(), ExternalWrench{}, p);
  CHECK(vdot.norm() < 1e-9);
}

TEST_CASE("rotor thrust and drag torque structure") {
  const ModelParams p;
  SystemState s;
  s.R_wb = quat_to_rotmat(quat_from_axis_angle(Vector3d(1.0, 1.0, 0.0), 0.7));

  // Equal speeds: pure thrust along the body z axis, zero torque.
  Vector4d w_eq = Vector4d::Constant(1000.0);
  Vector8d Q = generalized_forces(s, w_eq, Vector2d::Zero(), ExternalWrench{}, p);
  const double thrust = 4.0 * p.thrust_coeff * 1e6;
  CHECK((Q.head<3>() - s.R_wb * Vector3d(0.0, 0.0, thrust)).norm() < 1e-9);
  CHECK(Q.segment<3>(3).norm() < 1e-9);

  // Speeding up one spin pair against the other: pure yaw torque.
  Vector4d w_yaw(1100.0, 1100.0, 900.0, 900.0);
  Q = generalized_forces(s, w_yaw, Vector2d::Zero(), ExternalWrench{}, p);
  CHECK(std::abs(Q[3]) < 1e-9);
  CHECK(std::abs(Q[4]) < 1e-9);
  const double expect_z = -p.drag_torque_coeff * (2.0 * 1100.0 * 1100.0 - 2.0 * 900.0 * 900.0);
  CHECK(Q[5] == doctest::Approx(expect_z).epsilon(1e-9));
}

TEST_CASE("joint hard stops pin and zero the joint") {
  ModelParams p;
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 3.0);
  s.rotor_speeds.setConstant(p.hover_rotor_speed());
  s.theta = Vector2d(1.5, 0.0);
  s.theta_dot = Vector2d(4.0, 0.0);
  ControlInput u;
  u.rotor_speed_cmd.setConstant(p.hover_rotor_speed());
  u.joint_torque = Vector2d(p.joint_torque_limit, 0.0);  // drive into the stop
  const double dt = 1.0 / 900.0;
  bool pinned = false;
  for (int i = 0; i < 200; ++i) {
    s = step(s, u, {}, dt, p);
    if (s.theta[0] == p.joint_limit) {
      pinned = true;
      CHECK(s.theta_dot[0] == 0.0);
      break;
    }
  }
  CHECK(pinned);
}

TEST_CASE("rotor lag tracks the clamped command") {
  const ModelParams p;
  const Vector4d w0 = Vector4d::Constant(500.0);
  Vector4d cmd = Vector4d::Constant(1500.0);
  const double dt = 1e-3;
  const Vector4d w1 = rotor_lag(w0, cmd, dt, p);
  const double expect = 500.0 + (dt / p.rotor_time_constant) * 1000.0;
  CHECK(w1[0] == doctest::Approx(expect).epsilon(1e-12));

  // Commands beyond the envelope are clamped before tracking.
  cmd.setConstant(1e6);
  Vector4d w = w0;
  for (int i = 0; i < 5000; ++i) w = rotor_lag(w, cmd, dt, p);
  CHECK(w[0] == doctest::Approx(p.rotor_speed_max).epsilon(1e-9));

  cmd.setConstant(0.0);
  for (int i = 0; i < 5000; ++i) w = rotor_lag(w, cmd, dt, p);
  CHECK(w[0] == doctest::Approx(p.rotor_speed_min).epsilon(1e-9));
}

TEST_CASE("joint actuator is a clamped PD") {
  const ModelParams p;
  const Vector2d zero = Vector2d::Zero();
  CHECK(joint_actuator(zero, zero, zero, p).norm() == 0.0);

  // P term pulls toward the reference, D term opposes motion.
  Vector2d tau = joint_actuator(Vector2d(0.1, 0.0), zero, zero, p);
  CHECK(tau[0] == doctest::Approx(p.joint_kp * 0.1));
  tau = joint_actuator(zero, zero, Vector2d(1.0, 0.0), p);
  CHECK(tau[0] == doctest::Approx(-p.joint_kd));

  // Large errors saturate at the drive limit.
  tau = joint_actuator(Vector2d(10.0, -10.0), zero, zero, p);
  CHECK(tau[0] == p.joint_torque_limit);
  CHECK(tau[1] == -p.joint_torque_limit);

  // Optional integral term accumulates only when enabled.
  ModelParams pi = p;
  pi.joint_ki = 1.0;
  Vector2d integral = Vector2d::Zero();
  tau = joint_actuator(Vector2d(0.1, 0.0), zero, zero, pi, &integral, 0.5);
  CHECK(integral[0] == doctest::Approx(0.05));
  CHECK(tau[0] == doctest::Approx(pi.joint_kp * 0.1 + pi.joint_ki * 0.05));
  Vector2d untouched = Vector2d::Zero();
  joint_actuator(Vector2d(0.1, 0.0), zero, zero, p, &untouched, 0.5);
  CHECK(untouched.norm() == 0.0);
}

TEST_CASE("forward kinematics frozen poses") {
  const ModelParams p;
  SystemState s;
  s.p_b = Vector3d(0.5, -0.2, 2.0);

  // Arm straight down: gripper 0.22 m below the base CoM.
  Pose ee = forward_kinematics(s, p);
  CHECK((ee.position - Vector3d(0.5, -0.2, 2.0 - 0.22)).norm() < 1e-12);
  CHECK(geodesic_angle(ee.orientation, Quat{}) < 1e-12);

  // 90 deg pitch swings the gripper to the back, level with the mount.
  s.theta = Vector2d(M_PI / 2.0, 0.0);
  ee = forward_kinematics(s, p);
  CHECK((ee.position - (s.p_b + Vector3d(-0.18, 0.0, -0.04))).norm() < 1e-12);
  const Quat expect = quat_from_axis_angle(Vector3d::UnitY(), M_PI / 2.0);
  CHECK(geodesic_angle(ee.orientation, expect) < 1e-12);
}

TEST_CASE("ee_velocity matches differentiated kinematics") {
  const ModelParams p;
  std::mt19937_64 rng(48);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const RandomCase c = random_case(rng);
    const Vector3d v = ee_velocity(c.s, p);
    auto pos_at = [&](double t) {
      SystemState s = c.s;
      s.p_b += t * c.s.v_b;
      s.R_wb = c.s.R_wb * rotmat_exp(c.s.omega_b * t);
      s.theta += t * c.s.theta_dot;
      return forward_kinematics(s, p).position;
    };
    const Vector3d fd = (pos_at(h) - pos_at(-h)) / (2.0 * h);
    CHECK((v - fd).norm() < 1e-6);
  }
}

TEST_CASE("divergence guard throws") {
  const ModelParams p;
  SystemState s;
  s.p_b = Vector3d(0.0, 0.0, 3.0);
  s.v_b = Vector3d(2e3, 0.0, 0.0);  // beyond the ceiling
  CHECK_THROWS_AS(step(s, {}, {}, 1.0 / 900.0, p), SimDivergence);
}

TEST_CASE("invalid model parameters are rejected") {
  ModelParams p;
  p.base_mass = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.rotor_speed_min = 3000.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.base_inertia = Vector3d(1.0, 1.0, -1.0).asDiagonal();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  ModelParams ok;
  CHECK_NOTHROW(ok.validate());
}
