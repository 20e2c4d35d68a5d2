#pragma once

// Physical description of the platform: a quadrotor base carrying a single
// rigid arm through a 2-DoF differential (pitch about body y, then roll about
// the pitched x axis), with a gripper at the arm tip.
//
// Bodies: base (quad frame B), arm link, end effector. The differential's
// moving parts are lumped into the arm/EE bodies; the drive friction and the
// elastic trace stiffness act directly on the joint coordinates.
//
// Numeric defaults are plausible for a ~0.86 kg vehicle with a 75 g arm and
// are meant to be overridden from config where a real platform is measured.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dsam/se3.hpp"

namespace dsam {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using Vector8d = Eigen::Matrix<double, 8, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;

struct ModelParams {
  // Masses [kg]. payload_mass is carried by the EE body.
  double base_mass = 0.785;
  double arm_mass = 0.040;
  double ee_mass = 0.035;
  double payload_mass = 0.0;

  // Body-frame inertia tensors about each body's own CoM [kg m^2].
  Matrix3d base_inertia = Vector3d(2.5e-3, 2.5e-3, 4.5e-3).asDiagonal();
  Matrix3d arm_inertia = Vector3d(5.0e-5, 5.0e-5, 2.0e-6).asDiagonal();
  Matrix3d ee_inertia = Vector3d(1.2e-5, 1.2e-5, 8.0e-6).asDiagonal();

  // Geometry, base frame. The arm hangs below the base at rest.
  Vector3d mount_offset{0.0, 0.0, -0.04};  // base CoM -> differential pivot
  double link_length = 0.12;               // pivot -> arm tip
  double ee_offset = 0.06;                 // arm tip -> gripper CoM
  Vector3d arm_com_offset{0.0, 0.0, -0.06};  // pivot -> arm CoM, arm frame

  // Rotors: X layout, azimuths 45/135/225/315 deg at radius rotor_arm.
  // spin[i] is the rotor's angular velocity sign about body z; the drag
  // reaction torque on the body is -spin[i] * drag_torque_coeff * w^2.
  double rotor_arm = 0.11;
  std::array<int, 4> rotor_spin{+1, +1, -1, -1};
  double thrust_coeff = 1.5e-6;       // N per (rad/s)^2
  double drag_torque_coeff = 2.4e-8;  // N m per (rad/s)^2
  double rotor_speed_min = 150.0;     // rad/s
  double rotor_speed_max = 2200.0;    // rad/s
  double rotor_time_constant = 0.03;  // s, first-order lag

  // Differential joint drive and passive effects. The elastic centering
  // comes from the flexible trace routed through the differential; it must
  // stay well below the drive authority or the far ends of the joint range
  // become unreachable (limit * stiffness << torque limit).
  double joint_limit = M_PI / 2.0;        // |theta| hard stop
  double joint_stiffness = 0.03;          // N m/rad, elastic centering
  double joint_damping = 0.002;           // N m s/rad, structural
  double joint_coulomb_friction = 0.010;  // N m
  double joint_viscous_friction = 0.002;  // N m s/rad, drive friction
  double joint_torque_limit = 0.6;        // N m
  double joint_kp = 4.0;                  // servo P gain, N m/rad
  double joint_kd = 0.09;                 // servo D gain, N m s/rad
  double joint_ki = 0.0;                  // optional servo integral gain

  double gravity = 9.81;
  double velocity_ceiling = 1e3;  // divergence guard on any velocity entry

  // Rotor positions in the base frame, z = 0 plane.
  std::array<Vector3d, 4> rotor_positions() const {
    const double a = rotor_arm / std::sqrt(2.0);
    return {Vector3d(a, -a, 0.0), Vector3d(-a, a, 0.0), Vector3d(a, a, 0.0),
            Vector3d(-a, -a, 0.0)};
  }

  double total_mass() const { return base_mass + arm_mass + ee_mass + payload_mass; }

  // Rotor speed that balances gravity with all four rotors level.
  double hover_rotor_speed() const {
    return std::sqrt(total_mass() * gravity / (4.0 * thrust_coeff));
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string("ModelParams: ") + name + " must be > 0");
    };
    positive(base_mass, "base_mass");
    positive(arm_mass, "arm_mass");
    positive(ee_mass, "ee_mass");
    if (!(ee_mass + payload_mass > 0.0))
      throw std::invalid_argument("ModelParams: EE body mass must stay positive");
    positive(thrust_coeff, "thrust_coeff");
    positive(drag_torque_coeff, "drag_torque_coeff");
    positive(rotor_time_constant, "rotor_time_constant");
    positive(link_length, "link_length");
    positive(gravity, "gravity");
    positive(joint_torque_limit, "joint_torque_limit");
    if (!(rotor_speed_min >= 0.0 && rotor_speed_max > rotor_speed_min))
      throw std::invalid_argument("ModelParams: rotor speed limits out of order");
    if (joint_stiffness < 0.0 || joint_damping < 0.0 || joint_coulomb_friction < 0.0 ||
        joint_viscous_friction < 0.0)
      throw std::invalid_argument("ModelParams: joint passive terms must be >= 0");
    for (const Matrix3d* I : {&base_inertia, &arm_inertia, &ee_inertia}) {
      Eigen::SelfAdjointEigenSolver<Matrix3d> es(*I);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("ModelParams: inertia tensors must be positive definite");
    }
  }
};

// Full simulator state. R_wb maps body to world.
struct SystemState {
  Vector3d p_b{0.0, 0.0, 0.0};
  Matrix3d R_wb = Matrix3d::Identity();
  Vector2d theta{0.0, 0.0};  // differential pitch, roll

  Vector3d v_b{0.0, 0.0, 0.0};      // world-frame linear velocity
  Vector3d omega_b{0.0, 0.0, 0.0};  // body-frame angular rate
  Vector2d theta_dot{0.0, 0.0};

  Vector4d rotor_speeds = Vector4d::Zero();  // rad/s, achieved (not commanded)

  // Generalized velocity [v_b; omega_b; theta_dot].
  Vector8d velocity() const {
    Vector8d v;
    v << v_b, omega_b, theta_dot;
    return v;
  }
};

struct ControlInput {
  Vector4d rotor_speed_cmd = Vector4d::Zero();  // rad/s
  Vector2d joint_torque = Vector2d::Zero();     // N m, before plant-side limits
};

// World-frame wrench applied at the EE body's CoM.
struct ExternalWrench {
  Vector3d force{0.0, 0.0, 0.0};
  Vector3d torque{0.0, 0.0, 0.0};
};

// Arm orientation relative to base: pitch about y, then roll about the
// pitched x axis.
inline Matrix3d arm_rotation(const Vector2d& theta) {
  return (Eigen::AngleAxisd(theta[0], Vector3d::UnitY()) *
          Eigen::AngleAxisd(theta[1], Vector3d::UnitX()))
      .toRotationMatrix();
}

// Maps theta_dot to the arm's angular velocity relative to the base,
// expressed in the base frame: omega_rel = W(theta) * theta_dot.
inline Eigen::Matrix<double, 3, 2> arm_rate_map(const Vector2d& theta) {
  Eigen::Matrix<double, 3, 2> W;
  W.col(0) = Vector3d::UnitY();
  W.col(1) = Eigen::AngleAxisd(theta[0], Vector3d::UnitY()) * Vector3d::UnitX();
  return W;
}

}  // namespace dsam
