#pragma once

// Attitude / thrust inner loop, run at 300 Hz between the policy and the
// physics. Pipeline per tick:
//
//   outer command (mass-normalized accel, body-rate ff, yaw ref, joint refs)
//     -> thrust vector decomposition      (desired attitude + collective)
//     -> tilt-prioritized attitude error  (body-rate command)
//     -> rate loop                        (angular acceleration command)
//     -> INDI in torque space             (incremental torque from filtered
//                                          gyro derivative and filtered
//                                          actuator model torque)
//     -> allocation                       (per-rotor speeds, saturation
//                                          priority thrust > tilt > yaw)
//
// The controller carries its own nominal mass/inertia/rotor constants;
// domain randomization perturbs the plant, never this model.

#include <Eigen/Dense>
#include <array>

#include "dsam/model.hpp"
#include "dsam/se3.hpp"

namespace dsam {

// Policy-side command in physical units.
struct OuterCommand {
  Vector3d accel_des{0.0, 0.0, 0.0};    // world frame, gravity not included
  Vector3d bodyrate_ff{0.0, 0.0, 0.0};  // body frame feedforward
  double yaw_ref = 0.0;
  Vector2d joint_ref{0.0, 0.0};
};

struct AttitudeGains {
  // Rate-loop crossover must sit below the rotor spin-up pole (~33 rad/s) and
  // the attitude loop well below the rate loop, or saturation sustains a
  // tilt limit cycle.
  double k_tilt = 5.0;  // 1/s, must dominate k_yaw
  double k_yaw = 2.0;   // 1/s
  double k_rate = 15.0; // 1/s
};

struct InnerLoopParams {
  double mass = 0.0;
  Matrix3d inertia = Matrix3d::Identity();
  double thrust_coeff = 0.0;
  double drag_torque_coeff = 0.0;
  std::array<Vector3d, 4> rotor_positions{};
  std::array<int, 4> rotor_spin{};
  double rotor_speed_min = 0.0;
  double rotor_speed_max = 0.0;
  double gravity = 9.81;
  AttitudeGains gains;
  double filter_cutoff_hz = 20.0;
  double rate_hz = 300.0;
  double min_accel_norm = 0.1;  // m/s^2; below this the thrust axis is undefined
  bool ctbr = false;            // consume collective thrust + body rates only

  // Nominal controller model taken from (unrandomized) plant parameters.
  static InnerLoopParams from_model(const ModelParams& m);
  void validate() const;
};

// Second-order Butterworth low pass, direct form II transposed.
class BiquadLowPass {
 public:
  void configure(double cutoff_hz, double sample_hz);
  // Settles the filter so a constant input x0 produces x0 with no transient.
  void reset(double x0);
  double step(double x);

 private:
  double b0_{1.0}, b1_{0.0}, b2_{0.0}, a1_{0.0}, a2_{0.0};
  double z1_{0.0}, z2_{0.0};
};

template <int N>
struct BiquadVec {
  std::array<BiquadLowPass, N> ch;
  void configure(double cutoff_hz, double sample_hz) {
    for (auto& c : ch) c.configure(cutoff_hz, sample_hz);
  }
  void reset(const Eigen::Matrix<double, N, 1>& x0) {
    for (int i = 0; i < N; ++i) ch[i].reset(x0[i]);
  }
  Eigen::Matrix<double, N, 1> step(const Eigen::Matrix<double, N, 1>& x) {
    Eigen::Matrix<double, N, 1> y;
    for (int i = 0; i < N; ++i) y[i] = ch[i].step(x[i]);
    return y;
  }
};

struct InnerLoopState {
  bool primed = false;
  BiquadVec<3> gyro_filter;
  BiquadVec<4> rotor_filter;
  Vector3d gyro_f{0.0, 0.0, 0.0};
  Vector3d gyro_f_prev{0.0, 0.0, 0.0};
  Matrix3d R_des_last = Matrix3d::Identity();
};

struct ThrustAttitude {
  Matrix3d R_des = Matrix3d::Identity();
  double thrust = 0.0;  // collective force, N
  bool degenerate = false;
};

// Splits the desired thrust vector t = accel_des + g zhat into a desired
// attitude (body z along t, heading from yaw_ref) and a collective force.
// Near-zero t leaves the attitude at the fallback and commands minimum
// collective.
ThrustAttitude thrust_attitude_decomposition(const Vector3d& accel_des, double yaw_ref,
                                             const InnerLoopParams& p,
                                             const Matrix3d& R_des_fallback);

// Body-rate command from the attitude error, with the tilt component of the
// error quaternion served by k_tilt and the yaw remainder by k_yaw. The tilt
// command is invariant to any extra yaw in R_des by construction.
Vector3d tilt_prioritized_rate_cmd(const Matrix3d& R_wb, const Matrix3d& R_des,
                                   const AttitudeGains& g);

// Thrust [N] and body torque [N m] produced by the rotor model at the given
// speeds; the same algebra the allocator inverts.
void rotor_wrench(const Vector4d& rotor_speeds, const InnerLoopParams& p,
                  double* thrust, Vector3d* torque);

// Per-rotor speed commands realizing (thrust, torque) as well as the speed
// envelope allows. Saturation sacrifices yaw torque first, then tilt torque;
// commanded collective thrust is only clamped to the envelope itself.
Vector4d allocate_rotors(double thrust, const Vector3d& torque, const InnerLoopParams& p);

// One 300 Hz tick. Reads the measured state, updates filters, returns the
// rotor speed commands plus a joint torque evaluated at this instant (the
// plant loop recomputes joint torque at every physics step from joint_ref).
ControlInput inner_loop_tick(const OuterCommand& cmd, const SystemState& meas,
                             const ModelParams& servo, InnerLoopState& st,
                             const InnerLoopParams& p);

}  // namespace dsam
