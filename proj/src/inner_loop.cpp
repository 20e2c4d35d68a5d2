#include "dsam/inner_loop.hpp"

#include <cmath>
#include <stdexcept>

#include "dsam/dynamics.hpp"

namespace dsam {

InnerLoopParams InnerLoopParams::from_model(const ModelParams& m) {
  InnerLoopParams p;
  p.mass = m.total_mass();
  // Whole-vehicle inertia about the base frame with the arm at its reference
  // pose: the rate loop commands the composite body, not the base alone.
  auto point_mass = [](double mass, const Vector3d& r) -> Matrix3d {
    return mass * (r.squaredNorm() * Matrix3d::Identity() - r * r.transpose());
  };
  const Vector3d r_arm = m.mount_offset + m.arm_com_offset;
  const Vector3d r_ee = m.mount_offset + Vector3d(0.0, 0.0, -(m.link_length + m.ee_offset));
  p.inertia = m.base_inertia + m.arm_inertia + m.ee_inertia + point_mass(m.arm_mass, r_arm) +
              point_mass(m.ee_mass + m.payload_mass, r_ee);
  p.thrust_coeff = m.thrust_coeff;
  p.drag_torque_coeff = m.drag_torque_coeff;
  p.rotor_positions = m.rotor_positions();
  p.rotor_spin = m.rotor_spin;
  p.rotor_speed_min = m.rotor_speed_min;
  p.rotor_speed_max = m.rotor_speed_max;
  p.gravity = m.gravity;
  return p;
}

void InnerLoopParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("inner loop: mass must be positive");
  if (!(thrust_coeff > 0.0) || !(drag_torque_coeff > 0.0))
    throw std::invalid_argument("inner loop: rotor coefficients must be positive");
  if (!(rotor_speed_max > rotor_speed_min) || !(rotor_speed_min >= 0.0))
    throw std::invalid_argument("inner loop: bad rotor speed envelope");
  if (!(gains.k_tilt > gains.k_yaw))
    throw std::invalid_argument("inner loop: tilt gain must dominate yaw gain");
  if (!(gains.k_yaw > 0.0) || !(gains.k_rate > 0.0))
    throw std::invalid_argument("inner loop: gains must be positive");
  if (!(filter_cutoff_hz > 0.0) || !(filter_cutoff_hz < 0.5 * rate_hz))
    throw std::invalid_argument("inner loop: filter cutoff must sit below Nyquist");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("inner loop: rate must be positive");
  if (!(min_accel_norm > 0.0))
    throw std::invalid_argument("inner loop: min accel norm must be positive");
}

void BiquadLowPass::configure(double cutoff_hz, double sample_hz) {
  // Bilinear transform of the analog Butterworth section, Q = 1/sqrt(2).
  const double K = std::tan(M_PI * cutoff_hz / sample_hz);
  const double q = 1.0 / std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + K / q + K * K);
  b0_ = K * K * norm;
  b1_ = 2.0 * b0_;
  b2_ = b0_;
  a1_ = 2.0 * (K * K - 1.0) * norm;
  a2_ = (1.0 - K / q + K * K) * norm;
  z1_ = 0.0;
  z2_ = 0.0;
}

void BiquadLowPass::reset(double x0) {
  // Steady state of the DF2T recurrence at constant input (unity DC gain).
  z1_ = x0 * (1.0 - b0_);
  z2_ = x0 * (b2_ - a2_);
}

double BiquadLowPass::step(double x) {
  const double y = b0_ * x + z1_;
  z1_ = b1_ * x - a1_ * y + z2_;
  z2_ = b2_ * x - a2_ * y;
  return y;
}

ThrustAttitude thrust_attitude_decomposition(const Vector3d& accel_des, double yaw_ref,
                                             const InnerLoopParams& p,
                                             const Matrix3d& R_des_fallback) {
  ThrustAttitude out;
  const Vector3d t = accel_des + Vector3d(0.0, 0.0, p.gravity);
  const double tn = t.norm();
  if (tn < p.min_accel_norm) {
    out.R_des = R_des_fallback;
    out.thrust = p.mass * p.min_accel_norm;
    out.degenerate = true;
    return out;
  }
  const Vector3d z_des = t / tn;
  const Vector3d x_c(std::cos(yaw_ref), std::sin(yaw_ref), 0.0);
  Vector3d y_des = z_des.cross(x_c);
  const double yn = y_des.norm();
  if (yn < 1e-8) {
    // Thrust axis parallel to the heading; attitude is unconstrained by yaw.
    out.R_des = R_des_fallback;
    out.thrust = p.mass * tn;
    out.degenerate = true;
    return out;
  }
  y_des /= yn;
  const Vector3d x_des = y_des.cross(z_des);
  out.R_des.col(0) = x_des;
  out.R_des.col(1) = y_des;
  out.R_des.col(2) = z_des;
  out.thrust = p.mass * tn;
  return out;
}

Vector3d tilt_prioritized_rate_cmd(const Matrix3d& R_wb, const Matrix3d& R_des,
                                   const AttitudeGains& g) {
  // Error in the body frame; quat_mul returns the canonical (w >= 0)
  // representative so the shortest path is taken automatically.
  const Quat q_e = quat_mul(rotmat_to_quat(R_wb).conjugate(), rotmat_to_quat(R_des));
  const double n = std::sqrt(q_e.w * q_e.w + q_e.z * q_e.z);
  if (n < 1e-8) {
    // Pure 180 degree tilt: no yaw component to separate; continuous with the
    // regular branch, which approaches 2 k_tilt * (x, y) as n -> 0.
    return {2.0 * g.k_tilt * q_e.x, 2.0 * g.k_tilt * q_e.y, 0.0};
  }
  // q_e = q_red * q_yaw with q_yaw a pure z rotation and q_red a pure tilt.
  const double x_red = (q_e.x * q_e.w - q_e.y * q_e.z) / n;
  const double y_red = (q_e.y * q_e.w + q_e.x * q_e.z) / n;
  const double z_yaw = q_e.z / n;  // w_yaw = w/n >= 0: already the short way round
  return {2.0 * g.k_tilt * x_red, 2.0 * g.k_tilt * y_red, 2.0 * g.k_yaw * z_yaw};
}

void rotor_wrench(const Vector4d& rotor_speeds, const InnerLoopParams& p, double* thrust,
                  Vector3d* torque) {
  double T = 0.0;
  Vector3d tau = Vector3d::Zero();
  for (int j = 0; j < 4; ++j) {
    const double w2 = rotor_speeds[j] * rotor_speeds[j];
    const double f = p.thrust_coeff * w2;
    T += f;
    tau.x() += p.rotor_positions[j].y() * f;
    tau.y() -= p.rotor_positions[j].x() * f;
    tau.z() -= p.rotor_spin[j] * p.drag_torque_coeff * w2;
  }
  if (thrust) *thrust = T;
  if (torque) *torque = tau;
}

namespace {

// Largest s in [0, 1] with f0 + s*d inside [fmin, fmax] componentwise.
double max_feasible_scale(const Vector4d& f0, const Vector4d& d, double fmin, double fmax) {
  double s = 1.0;
  for (int j = 0; j < 4; ++j) {
    if (d[j] > 1e-12)
      s = std::min(s, (fmax - f0[j]) / d[j]);
    else if (d[j] < -1e-12)
      s = std::min(s, (fmin - f0[j]) / d[j]);
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

Vector4d allocate_rotors(double thrust, const Vector3d& torque, const InnerLoopParams& p) {
  const double fmin = p.thrust_coeff * p.rotor_speed_min * p.rotor_speed_min;
  const double fmax = p.thrust_coeff * p.rotor_speed_max * p.rotor_speed_max;

  Eigen::Matrix4d A;
  for (int j = 0; j < 4; ++j) {
    A(0, j) = 1.0;
    A(1, j) = p.rotor_positions[j].y();
    A(2, j) = -p.rotor_positions[j].x();
    A(3, j) = -p.rotor_spin[j] * p.drag_torque_coeff / p.thrust_coeff;
  }
  const Eigen::Matrix4d Ainv = A.inverse();

  const double T = std::clamp(thrust, 4.0 * fmin, 4.0 * fmax);

  auto to_speeds = [&](Vector4d f) {
    Vector4d speeds;
    for (int j = 0; j < 4; ++j)
      speeds[j] = std::sqrt(std::clamp(f[j], fmin, fmax) / p.thrust_coeff);
    return speeds;
  };

  // Feasible demands invert exactly; the priority staging below exists only
  // for saturation and would distort interior solutions.
  const Vector4d f_direct = Ainv * Eigen::Vector4d(T, torque.x(), torque.y(), torque.z());
  if ((f_direct.array() >= fmin - 1e-12).all() && (f_direct.array() <= fmax + 1e-12).all())
    return to_speeds(f_direct);

  // Priority thrust > tilt > yaw: collective is only clamped to the envelope;
  // tilt torque is scaled into what remains; yaw torque takes the leftovers.
  const Vector4d f_base = Ainv * Eigen::Vector4d(T, 0.0, 0.0, 0.0);
  const Vector4d d_tilt = Ainv * Eigen::Vector4d(0.0, torque.x(), torque.y(), 0.0);
  const Vector4d d_yaw = Ainv * Eigen::Vector4d(0.0, 0.0, 0.0, torque.z());

  const double beta = max_feasible_scale(f_base, d_tilt, fmin, fmax);
  const Vector4d f_tilt = f_base + beta * d_tilt;
  const double gamma = max_feasible_scale(f_tilt, d_yaw, fmin, fmax);
  return to_speeds(f_tilt + gamma * d_yaw);
}

ControlInput inner_loop_tick(const OuterCommand& cmd, const SystemState& meas,
                             const ModelParams& servo, InnerLoopState& st,
                             const InnerLoopParams& p) {
  if (!st.primed) {
    st.gyro_filter.configure(p.filter_cutoff_hz, p.rate_hz);
    st.rotor_filter.configure(p.filter_cutoff_hz, p.rate_hz);
    st.gyro_filter.reset(meas.omega_b);
    st.rotor_filter.reset(meas.rotor_speeds);
    st.gyro_f = meas.omega_b;
    st.R_des_last = meas.R_wb;
    st.primed = true;
  }

  st.gyro_f_prev = st.gyro_f;
  st.gyro_f = st.gyro_filter.step(meas.omega_b);
  const Vector3d alpha_f = (st.gyro_f - st.gyro_f_prev) * p.rate_hz;
  // Torque the actuators are currently producing: nominal rotor model at the
  // filtered measured speeds. Both incremental paths must see the same
  // dynamics, so this uses the actuator state (which carries the spin-up lag
  // the gyro also sees), never the commands.
  const Vector4d rotor_f = st.rotor_filter.step(meas.rotor_speeds);
  Vector3d tau_f;
  rotor_wrench(rotor_f, p, nullptr, &tau_f);

  double thrust;
  Vector3d omega_des;
  if (p.ctbr) {
    // Collective thrust + body rates only: no attitude closure in here.
    thrust = p.mass * std::max(cmd.accel_des.z() + p.gravity, p.min_accel_norm);
    omega_des = cmd.bodyrate_ff;
  } else {
    const ThrustAttitude ta =
        thrust_attitude_decomposition(cmd.accel_des, cmd.yaw_ref, p, st.R_des_last);
    st.R_des_last = ta.R_des;
    thrust = ta.thrust;
    omega_des = tilt_prioritized_rate_cmd(meas.R_wb, ta.R_des, p.gains) + cmd.bodyrate_ff;
  }

  const Vector3d alpha_cmd = p.gains.k_rate * (omega_des - meas.omega_b);
  const Vector3d tau_cmd = tau_f + p.inertia * (alpha_cmd - alpha_f);

  ControlInput u;
  u.rotor_speed_cmd = allocate_rotors(thrust, tau_cmd, p);
  u.joint_torque = joint_actuator(cmd.joint_ref, meas.theta, meas.theta_dot, servo);
  return u;
}

}  // namespace dsam
