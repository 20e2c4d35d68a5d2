#pragma once

// Rotation / rigid-transform utilities.
//
// Conventions used everywhere in this codebase:
//  - quaternions are Hamilton (w,x,y,z), unit norm, canonical sign w >= 0
//  - R_wb maps body vectors to world vectors: v_w = R_wb * v_b
//    (columns of R_wb are the body axes expressed in world)
//  - Pose{p, q} acts on local points as x_parent = p + R(q) * x_local

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace dsam {

using Eigen::Matrix3d;
using Eigen::Vector3d;

inline Matrix3d skew(const Vector3d& v) {
  Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

struct Quat {
  double w{1.0}, x{0.0}, y{0.0}, z{0.0};

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  // Normalizes and fixes the sign ambiguity: w >= 0, ties broken toward a
  // positive first nonzero vector component so serialization is unique.
  Quat normalized() const {
    double n = norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("Quat::normalized: zero or non-finite quaternion");
    Quat q{w / n, x / n, y / n, z / n};
    bool flip = q.w < 0.0;
    if (q.w == 0.0) {
      if (q.x != 0.0)
        flip = q.x < 0.0;
      else if (q.y != 0.0)
        flip = q.y < 0.0;
      else
        flip = q.z < 0.0;
    }
    if (flip) {
      q.w = -q.w;
      q.x = -q.x;
      q.y = -q.y;
      q.z = -q.z;
    }
    return q;
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  Vector3d vec() const { return {x, y, z}; }
};

// Hamilton product; result renormalized to the canonical representative.
inline Quat quat_mul(const Quat& a, const Quat& b) {
  Quat r{a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
         a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
         a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
         a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
  return r.normalized();
}

inline Vector3d quat_rotate(const Quat& q, const Vector3d& v) {
  // v' = v + 2 qv x (qv x v + w v)
  const Vector3d qv = q.vec();
  const Vector3d t = 2.0 * qv.cross(v);
  return v + q.w * t + qv.cross(t);
}

inline Matrix3d quat_to_rotmat(const Quat& qin) {
  const Quat q = qin.normalized();
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

// Shepperd's method: picks the largest of the four squared components to
// avoid cancellation. Rejects inputs that are not rotations.
inline Quat rotmat_to_quat(const Matrix3d& R) {
  const double ortho = (R.transpose() * R - Matrix3d::Identity()).norm();
  if (!(ortho < 1e-6) || !(R.determinant() > 0.0))
    throw std::invalid_argument("rotmat_to_quat: matrix is not a rotation");
  const double t = R.trace();
  Quat q;
  if (t > R(0, 0) && t > R(1, 1) && t > R(2, 2)) {
    double s = std::sqrt(1.0 + t) * 2.0;
    q = {0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s};
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q = {(R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s};
  } else if (R(1, 1) > R(2, 2)) {
    double s = std::sqrt(1.0 - R(0, 0) + R(1, 1) - R(2, 2)) * 2.0;
    q = {(R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 - R(0, 0) - R(1, 1) + R(2, 2)) * 2.0;
    q = {(R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s};
  }
  return q.normalized();
}

inline Quat quat_from_axis_angle(const Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw std::invalid_argument("quat_from_axis_angle: zero axis");
  const double h = 0.5 * angle;
  const Vector3d u = axis / n;
  return Quat{std::cos(h), u.x() * std::sin(h), u.y() * std::sin(h), u.z() * std::sin(h)}
      .normalized();
}

// Exp map of a rotation vector (axis * angle).
inline Quat quat_exp(const Vector3d& rotvec) {
  const double a = rotvec.norm();
  if (a < 1e-12) {
    return Quat{1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z()}.normalized();
  }
  return quat_from_axis_angle(rotvec, a);
}

inline Matrix3d rotmat_exp(const Vector3d& rotvec) { return quat_to_rotmat(quat_exp(rotvec)); }

// Smallest rotation angle between two orientations, in [0, pi]: the angle
// 2 arccos |<a, b>|, computed through the relative quaternion with atan2 so
// tiny angles are not lost to cancellation near |dot| = 1.
// Sign-flip invariant: q and -q represent the same rotation.
inline double geodesic_angle(const Quat& a, const Quat& b) {
  const Quat r = quat_mul(a.conjugate(), b);
  return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w));
}

struct Pose {
  Vector3d position{0.0, 0.0, 0.0};
  Quat orientation{};
};

// Applies `frame` to a pose expressed in its local coordinates.
inline Pose pose_compose(const Pose& frame, const Pose& local) {
  return {frame.position + quat_rotate(frame.orientation, local.position),
          quat_mul(frame.orientation, local.orientation)};
}

// Expresses `target` (world) in the coordinates of `frame` (world).
// Inverse of pose_compose: pose_compose(frame, pose_in_frame(t, frame)) == t.
inline Pose pose_in_frame(const Pose& target, const Pose& frame) {
  const Quat qi = frame.orientation.conjugate();
  return {quat_rotate(qi, target.position - frame.position),
          quat_mul(qi, target.orientation)};
}

// First two columns of R, column-major: a continuous 6-D attitude encoding.
inline Eigen::Matrix<double, 6, 1> rotmat_6d_encode(const Matrix3d& R) {
  Eigen::Matrix<double, 6, 1> e;
  e << R(0, 0), R(1, 0), R(2, 0), R(0, 1), R(1, 1), R(2, 1);
  return e;
}

// Intrinsic Z-Y-X composition: world yaw, then pitch, then roll.
inline Quat quat_from_euler_zyx(double yaw, double pitch, double roll) {
  const Quat qz = quat_from_axis_angle(Vector3d::UnitZ(), yaw);
  const Quat qy = quat_from_axis_angle(Vector3d::UnitY(), pitch);
  const Quat qx = quat_from_axis_angle(Vector3d::UnitX(), roll);
  return quat_mul(quat_mul(qz, qy), qx);
}

inline Vector3d euler_zyx_from_rotmat(const Matrix3d& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  double yaw, roll;
  if (std::abs(R(2, 0)) < 1.0 - 1e-9) {
    yaw = std::atan2(R(1, 0), R(0, 0));
    roll = std::atan2(R(2, 1), R(2, 2));
  } else {
    // Gimbal lock: roll is unobservable, fold it into yaw.
    yaw = std::atan2(-R(0, 1), R(1, 1));
    roll = 0.0;
  }
  return {yaw, pitch, roll};
}

}  // namespace dsam
