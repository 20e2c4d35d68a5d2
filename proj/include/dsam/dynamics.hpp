#pragma once

// Floating-base rigid-body dynamics of the quad + differential-arm platform.
//
// Generalized coordinates q = (p_b, R_wb, theta) in R^3 x SO(3) x T^2 and
// velocity v = [v_b (world); omega_b (body); theta_dot] in R^8. The equations
// of motion are M(q) vdot + C(q,v) v + G(q) = Q(q, u, w_ext); mass_matrix and
// bias_forces build M and C v + G from per-body Jacobians, generalized_forces
// maps rotor speeds, joint drive torque and an external EE wrench into Q.
//
// The pose block of q is integrated on the manifold (R <- R Exp(omega dt));
// theta lives on an interval with hard stops at +-joint_limit.

#include <Eigen/Dense>
#include <stdexcept>

#include "dsam/model.hpp"
#include "dsam/se3.hpp"

namespace dsam {

// Any velocity entry above ModelParams::velocity_ceiling, or a non-finite
// state, aborts the step. Callers treat this as a crash, not a bug.
struct SimDivergence : std::runtime_error {
  explicit SimDivergence(const std::string& what) : std::runtime_error(what) {}
};

enum class Integrator { SemiImplicitEuler, Rk4 };

Matrix8d mass_matrix(const SystemState& s, const ModelParams& p);

// Coriolis/centrifugal plus gravity: C(q,v) v + G(q).
Vector8d bias_forces(const SystemState& s, const ModelParams& p);

// G(q) alone (bias at zero velocity).
Vector8d gravity_forces(const SystemState& s, const ModelParams& p);

// Rotor thrust/drag, joint drive torque (after the plant-side torque limit),
// joint passive torques (stiffness, damping, friction), external EE wrench.
Vector8d generalized_forces(const SystemState& s, const Vector4d& rotor_speeds,
                            const Vector2d& joint_torque, const ExternalWrench& w,
                            const ModelParams& p);

// Solves M vdot = Q - (C v + G) with a Cholesky factorization.
// Thrust comes from s.rotor_speeds (achieved), never from a command.
Vector8d forward_dynamics(const SystemState& s, const Vector2d& joint_torque,
                          const ExternalWrench& w, const ModelParams& p);

// Gripper pose in the world frame.
Pose forward_kinematics(const SystemState& s, const ModelParams& p);

// World-frame velocity of the gripper CoM.
Vector3d ee_velocity(const SystemState& s, const ModelParams& p);

// Servo PD (optionally PI D) on the joint coordinates, output clamped to the
// drive torque limit. `integral` accumulates only when ki > 0.
Vector2d joint_actuator(const Vector2d& theta_ref, const Vector2d& theta,
                        const Vector2d& theta_dot, const ModelParams& p,
                        Vector2d* integral = nullptr, double dt = 0.0);

// First-order rotor speed lag toward the (limit-clamped) command.
Vector4d rotor_lag(const Vector4d& current, const Vector4d& cmd, double dt,
                   const ModelParams& p);

// Advances one physics step of length dt. Applies joint hard stops, the rotor
// lag, and the divergence guard. Throws SimDivergence.
SystemState step(const SystemState& s, const ControlInput& u, const ExternalWrench& w,
                 double dt, const ModelParams& p,
                 Integrator integrator = Integrator::SemiImplicitEuler);

// Kinetic + gravitational + joint-spring energy. Conserved by the ideal
// plant (no rotors, no friction) up to integration error.
double total_energy(const SystemState& s, const ModelParams& p);

// Shared kinematic quantities, exposed for the benefit of tests and logging.
struct ArmFrames {
  Matrix3d R_arm;                    // base -> arm
  Eigen::Matrix<double, 3, 2> W;     // theta_dot -> omega_rel (base frame)
  Vector3d u_arm, u_ee;              // base CoM -> body CoM, base frame
  Vector3d r_arm, r_ee;              // pivot -> body CoM, base frame
};
ArmFrames arm_frames(const Vector2d& theta, const ModelParams& p);

}  // namespace dsam
