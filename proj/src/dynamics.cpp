#include "dsam/dynamics.hpp"

#include <cmath>

namespace dsam {
namespace {

struct BodyJacobians {
  // Rows of the 3x8 Jacobians follow the velocity layout [v; omega; theta_dot].
  Eigen::Matrix<double, 3, 8> Jv_base, Jv_arm, Jv_ee;  // world-frame CoM velocity
  Eigen::Matrix<double, 3, 8> Jw_base, Jw_arm;         // own-body-frame angular rate
};

BodyJacobians body_jacobians(const Matrix3d& R, const ArmFrames& f) {
  BodyJacobians J;
  J.Jv_base.setZero();
  J.Jv_base.leftCols<3>().setIdentity();

  J.Jw_base.setZero();
  J.Jw_base.middleCols<3>(3).setIdentity();

  J.Jv_arm.setZero();
  J.Jv_arm.leftCols<3>().setIdentity();
  J.Jv_arm.middleCols<3>(3) = -R * skew(f.u_arm);
  J.Jv_arm.rightCols<2>() = -R * skew(f.r_arm) * f.W;

  J.Jv_ee.setZero();
  J.Jv_ee.leftCols<3>().setIdentity();
  J.Jv_ee.middleCols<3>(3) = -R * skew(f.u_ee);
  J.Jv_ee.rightCols<2>() = -R * skew(f.r_ee) * f.W;

  // Arm and gripper are one rotational unit; angular rate in the arm frame.
  J.Jw_arm.setZero();
  J.Jw_arm.middleCols<3>(3) = f.R_arm.transpose();
  J.Jw_arm.rightCols<2>() = f.R_arm.transpose() * f.W;
  return J;
}

// d/dt of W(theta) theta_dot at theta_ddot = 0, base frame.
Vector3d arm_rate_map_drift(const ArmFrames& f, const Vector2d& theta_dot) {
  return theta_dot[0] * Vector3d::UnitY().cross(f.W.col(1) * theta_dot[1]);
}

}  // namespace

ArmFrames arm_frames(const Vector2d& theta, const ModelParams& p) {
  ArmFrames f;
  f.R_arm = arm_rotation(theta);
  f.W = arm_rate_map(theta);
  f.r_arm = f.R_arm * p.arm_com_offset;
  f.r_ee = f.R_arm * Vector3d(0.0, 0.0, -(p.link_length + p.ee_offset));
  f.u_arm = p.mount_offset + f.r_arm;
  f.u_ee = p.mount_offset + f.r_ee;
  return f;
}

Matrix8d mass_matrix(const SystemState& s, const ModelParams& p) {
  const ArmFrames f = arm_frames(s.theta, p);
  const BodyJacobians J = body_jacobians(s.R_wb, f);
  const double m_ee = p.ee_mass + p.payload_mass;

  Matrix8d M = Matrix8d::Zero();
  M += p.base_mass * J.Jv_base.transpose() * J.Jv_base;
  M += J.Jw_base.transpose() * p.base_inertia * J.Jw_base;
  M += p.arm_mass * J.Jv_arm.transpose() * J.Jv_arm;
  M += J.Jw_arm.transpose() * p.arm_inertia * J.Jw_arm;
  M += m_ee * J.Jv_ee.transpose() * J.Jv_ee;
  M += J.Jw_arm.transpose() * p.ee_inertia * J.Jw_arm;
  return M;
}

Vector8d bias_forces(const SystemState& s, const ModelParams& p) {
  const ArmFrames f = arm_frames(s.theta, p);
  const BodyJacobians J = body_jacobians(s.R_wb, f);
  const Matrix3d& R = s.R_wb;
  const Vector3d& Om = s.omega_b;
  const Vector3d gz(0.0, 0.0, p.gravity);
  const double m_ee = p.ee_mass + p.payload_mass;

  const Vector3d omega_rel = f.W * s.theta_dot;                 // base frame
  const Vector3d omega_rel_dot = arm_rate_map_drift(f, s.theta_dot);

  // CoM accelerations at vdot = 0, world frame. The explicit return type
  // forces evaluation; an expression template here would dangle.
  auto com_accel = [&](const Vector3d& u, const Vector3d& r) -> Vector3d {
    const Vector3d udot_local = omega_rel.cross(r);
    return R * (Om.cross(Om.cross(u)) + 2.0 * Om.cross(udot_local) +
                omega_rel_dot.cross(r) + omega_rel.cross(omega_rel.cross(r)));
  };
  // Angular accelerations at vdot = 0, own-body frame.
  const Vector3d alpha_arm = f.R_arm.transpose() * (Om.cross(omega_rel) + omega_rel_dot);
  const Vector3d omega_arm = f.R_arm.transpose() * (Om + omega_rel);

  Vector8d b = Vector8d::Zero();
  b += J.Jv_base.transpose() * (p.base_mass * gz);
  b += J.Jw_base.transpose() * Om.cross(p.base_inertia * Om);

  b += J.Jv_arm.transpose() * (p.arm_mass * (com_accel(f.u_arm, f.r_arm) + gz));
  b += J.Jw_arm.transpose() *
       (p.arm_inertia * alpha_arm + omega_arm.cross(p.arm_inertia * omega_arm));

  b += J.Jv_ee.transpose() * (m_ee * (com_accel(f.u_ee, f.r_ee) + gz));
  b += J.Jw_arm.transpose() *
       (p.ee_inertia * alpha_arm + omega_arm.cross(p.ee_inertia * omega_arm));
  return b;
}

Vector8d gravity_forces(const SystemState& s, const ModelParams& p) {
  SystemState at_rest = s;
  at_rest.v_b.setZero();
  at_rest.omega_b.setZero();
  at_rest.theta_dot.setZero();
  return bias_forces(at_rest, p);
}

Vector8d generalized_forces(const SystemState& s, const Vector4d& rotor_speeds,
                            const Vector2d& joint_torque, const ExternalWrench& w,
                            const ModelParams& p) {
  const ArmFrames f = arm_frames(s.theta, p);
  const BodyJacobians J = body_jacobians(s.R_wb, f);
  const auto rotors = p.rotor_positions();

  double thrust_total = 0.0;
  Vector3d torque_b = Vector3d::Zero();
  for (int i = 0; i < 4; ++i) {
    const double w2 = rotor_speeds[i] * rotor_speeds[i];
    const double fi = p.thrust_coeff * w2;
    thrust_total += fi;
    torque_b += rotors[i].cross(Vector3d(0.0, 0.0, fi));
    torque_b.z() += -double(p.rotor_spin[i]) * p.drag_torque_coeff * w2;
  }

  Vector8d Q = Vector8d::Zero();
  Q.head<3>() = s.R_wb * Vector3d(0.0, 0.0, thrust_total);
  Q.segment<3>(3) = torque_b;

  // Joint drive (limited) plus passive spring, damping and drive friction.
  for (int j = 0; j < 2; ++j) {
    const double tau_drive =
        std::clamp(joint_torque[j], -p.joint_torque_limit, p.joint_torque_limit);
    const double td = s.theta_dot[j];
    const double tau_passive = -p.joint_stiffness * s.theta[j] - p.joint_damping * td -
                               p.joint_coulomb_friction * std::tanh(td / 1e-3) -
                               p.joint_viscous_friction * td;
    Q[6 + j] += tau_drive + tau_passive;
  }

  // External wrench at the EE CoM, world frame.
  if (!w.force.isZero() || !w.torque.isZero()) {
    Q += J.Jv_ee.transpose() * w.force;
    // World-frame angular Jacobian of the EE body: [0, R, R W].
    Eigen::Matrix<double, 3, 8> Jw_world = Eigen::Matrix<double, 3, 8>::Zero();
    Jw_world.middleCols<3>(3) = s.R_wb;
    Jw_world.rightCols<2>() = s.R_wb * f.W;
    Q += Jw_world.transpose() * w.torque;
  }
  return Q;
}

Vector8d forward_dynamics(const SystemState& s, const Vector2d& joint_torque,
                          const ExternalWrench& w, const ModelParams& p) {
  const Matrix8d M = mass_matrix(s, p);
  const Vector8d rhs =
      generalized_forces(s, s.rotor_speeds, joint_torque, w, p) - bias_forces(s, p);
  Eigen::LLT<Matrix8d> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("forward_dynamics: mass matrix is not positive definite");
  return llt.solve(rhs);
}

Pose forward_kinematics(const SystemState& s, const ModelParams& p) {
  const ArmFrames f = arm_frames(s.theta, p);
  Pose ee;
  ee.position = s.p_b + s.R_wb * f.u_ee;
  ee.orientation = rotmat_to_quat(s.R_wb * f.R_arm);
  return ee;
}

Vector3d ee_velocity(const SystemState& s, const ModelParams& p) {
  const ArmFrames f = arm_frames(s.theta, p);
  const Vector3d omega_rel = f.W * s.theta_dot;
  return s.v_b + s.R_wb * (s.omega_b.cross(f.u_ee) + omega_rel.cross(f.r_ee));
}

Vector2d joint_actuator(const Vector2d& theta_ref, const Vector2d& theta,
                        const Vector2d& theta_dot, const ModelParams& p,
                        Vector2d* integral, double dt) {
  const Vector2d err = theta_ref - theta;
  Vector2d tau = p.joint_kp * err - p.joint_kd * theta_dot;
  if (p.joint_ki > 0.0 && integral != nullptr) {
    *integral += err * dt;
    tau += p.joint_ki * *integral;
  }
  return tau.cwiseMax(-p.joint_torque_limit).cwiseMin(p.joint_torque_limit);
}

Vector4d rotor_lag(const Vector4d& current, const Vector4d& cmd, double dt,
                   const ModelParams& p) {
  const Vector4d target = cmd.cwiseMax(p.rotor_speed_min).cwiseMin(p.rotor_speed_max);
  Vector4d next = current + (dt / p.rotor_time_constant) * (target - current);
  return next.cwiseMax(p.rotor_speed_min).cwiseMin(p.rotor_speed_max);
}

namespace {

void enforce_joint_stops(SystemState& s, const ModelParams& p) {
  for (int j = 0; j < 2; ++j) {
    if (s.theta[j] > p.joint_limit) {
      s.theta[j] = p.joint_limit;
      s.theta_dot[j] = 0.0;
    } else if (s.theta[j] < -p.joint_limit) {
      s.theta[j] = -p.joint_limit;
      s.theta_dot[j] = 0.0;
    }
  }
}

void check_divergence(const SystemState& s, const ModelParams& p) {
  const Vector8d v = s.velocity();
  if (!v.allFinite() || !s.p_b.allFinite() || !s.R_wb.allFinite() ||
      !s.theta.allFinite() || v.cwiseAbs().maxCoeff() > p.velocity_ceiling)
    throw SimDivergence("state diverged");
}

// Flattened state for the RK4 stage arithmetic: p(3) q(4) theta(2) v(3)
// omega(3) theta_dot(2) rotors(4).
using Rk4Vec = Eigen::Matrix<double, 21, 1>;

Rk4Vec pack(const SystemState& s) {
  const Quat q = rotmat_to_quat(s.R_wb);
  Rk4Vec x;
  x << s.p_b, q.w, q.x, q.y, q.z, s.theta, s.v_b, s.omega_b, s.theta_dot, s.rotor_speeds;
  return x;
}

SystemState unpack(const Rk4Vec& x) {
  SystemState s;
  s.p_b = x.segment<3>(0);
  s.R_wb = quat_to_rotmat(Quat{x[3], x[4], x[5], x[6]});
  s.theta = x.segment<2>(7);
  s.v_b = x.segment<3>(9);
  s.omega_b = x.segment<3>(12);
  s.theta_dot = x.segment<2>(15);
  s.rotor_speeds = x.segment<4>(17);
  return s;
}

Rk4Vec state_derivative(const Rk4Vec& x, const ControlInput& u, const ExternalWrench& w,
                        const ModelParams& p) {
  const SystemState s = unpack(x);
  const Vector8d vdot = forward_dynamics(s, u.joint_torque, w, p);
  const Quat q{x[3], x[4], x[5], x[6]};
  // qdot = 1/2 q (0, omega), omega in the body frame.
  const Quat om{0.0, s.omega_b.x(), s.omega_b.y(), s.omega_b.z()};
  const Quat qd{0.5 * (q.w * om.w - q.x * om.x - q.y * om.y - q.z * om.z),
                0.5 * (q.w * om.x + q.x * om.w + q.y * om.z - q.z * om.y),
                0.5 * (q.w * om.y - q.x * om.z + q.y * om.w + q.z * om.x),
                0.5 * (q.w * om.z + q.x * om.y - q.y * om.x + q.z * om.w)};
  const Vector4d target =
      u.rotor_speed_cmd.cwiseMax(p.rotor_speed_min).cwiseMin(p.rotor_speed_max);
  Rk4Vec dx;
  dx << s.v_b, qd.w, qd.x, qd.y, qd.z, s.theta_dot, vdot,
      (target - s.rotor_speeds) / p.rotor_time_constant;
  return dx;
}

}  // namespace

SystemState step(const SystemState& s, const ControlInput& u, const ExternalWrench& w,
                 double dt, const ModelParams& p, Integrator integrator) {
  SystemState next = s;
  if (integrator == Integrator::SemiImplicitEuler) {
    const Vector8d vdot = forward_dynamics(s, u.joint_torque, w, p);
    next.v_b += dt * vdot.head<3>();
    next.omega_b += dt * vdot.segment<3>(3);
    next.theta_dot += dt * vdot.tail<2>();
    // Positions advance with the updated velocities.
    next.p_b += dt * next.v_b;
    next.R_wb = s.R_wb * rotmat_exp(next.omega_b * dt);
    next.theta += dt * next.theta_dot;
    next.rotor_speeds = rotor_lag(s.rotor_speeds, u.rotor_speed_cmd, dt, p);
  } else {
    const Rk4Vec x0 = pack(s);
    const Rk4Vec k1 = state_derivative(x0, u, w, p);
    const Rk4Vec k2 = state_derivative(x0 + 0.5 * dt * k1, u, w, p);
    const Rk4Vec k3 = state_derivative(x0 + 0.5 * dt * k2, u, w, p);
    const Rk4Vec k4 = state_derivative(x0 + dt * k3, u, w, p);
    Rk4Vec x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x1.segment<4>(3).normalize();
    next = unpack(x1);
    next.rotor_speeds =
        next.rotor_speeds.cwiseMax(p.rotor_speed_min).cwiseMin(p.rotor_speed_max);
  }
  enforce_joint_stops(next, p);
  check_divergence(next, p);
  return next;
}

double total_energy(const SystemState& s, const ModelParams& p) {
  const Vector8d v = s.velocity();
  const double kinetic = 0.5 * v.dot(mass_matrix(s, p) * v);
  const ArmFrames f = arm_frames(s.theta, p);
  const double m_ee = p.ee_mass + p.payload_mass;
  const double z_base = s.p_b.z();
  const double z_arm = (s.p_b + s.R_wb * f.u_arm).z();
  const double z_ee = (s.p_b + s.R_wb * f.u_ee).z();
  const double potential =
      p.gravity * (p.base_mass * z_base + p.arm_mass * z_arm + m_ee * z_ee) +
      0.5 * p.joint_stiffness * s.theta.squaredNorm();
  return kinetic + potential;
}

}  // namespace dsam
