#pragma once

// Quaternion algebra and complementary attitude filters (Mahony, Madgwick).
//
// Convention (fixed project-wide): a UnitQuaternion q maps body-frame vectors
// into the earth frame, v_earth = q * v_body * conj(q). The earth frame is
// z-up, so a level sensor at rest measures accel = (0, 0, +g). Gyro rates are
// body-frame, so propagation right-multiplies: q' = q * exp(omega * dt / 2).
//
// No magnetometer is fused; yaw is observable only relative to the start.

#include "navcore/core.hpp"

#include <algorithm>

namespace navcore {

class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  /// Normalizes on construction; rejects zero or non-finite input.
  UnitQuaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    require(finite(n) && n > 0.0, "quaternion must be finite and non-zero");
    w_ = w / n;
    x_ = x / n;
    y_ = y / n;
    z_ = z / n;
  }

  static UnitQuaternion identity() { return {}; }

  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    require(finite(n) && n > 0.0 && finite(angle), "axis must be finite and non-zero");
    const double s = std::sin(0.5 * angle) / n;
    return {std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s};
  }

  /// Exponential map: rotation by |rv| radians about rv.
  static UnitQuaternion from_rotation_vector(const Vec3& rv) {
    require(rv.allFinite(), "rotation vector must be finite");
    const double theta = rv.norm();
    if (theta < 1e-12) return {1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()};
    const double s = std::sin(0.5 * theta) / theta;
    return {std::cos(0.5 * theta), rv.x() * s, rv.y() * s, rv.z() * s};
  }

  static UnitQuaternion from_yaw(double yaw) { return from_axis_angle(Vec3::UnitZ(), yaw); }

  /// Smallest rotation taking direction `from` onto direction `to`.
  static UnitQuaternion from_two_vectors(const Vec3& from, const Vec3& to) {
    const Vec3 a = from.normalized();
    const Vec3 b = to.normalized();
    require(a.allFinite() && b.allFinite(), "directions must be finite and non-zero");
    const double c = a.dot(b);
    if (c < -1.0 + 1e-12) {
      // Antiparallel: any perpendicular axis works.
      Vec3 axis = a.cross(Vec3::UnitX());
      if (axis.norm() < 1e-6) axis = a.cross(Vec3::UnitY());
      return from_axis_angle(axis, kPi);
    }
    const Vec3 v = a.cross(b);
    return {1.0 + c, v.x(), v.y(), v.z()};
  }

  double w() const noexcept { return w_; }
  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double z() const noexcept { return z_; }
  Vec3 vec() const { return {x_, y_, z_}; }
  double norm() const { return std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_); }

  UnitQuaternion conjugate() const {
    UnitQuaternion q;
    q.w_ = w_;
    q.x_ = -x_;
    q.y_ = -y_;
    q.z_ = -z_;
    return q;
  }

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
    return {a.w_ * b.w_ - a.x_ * b.x_ - a.y_ * b.y_ - a.z_ * b.z_,
            a.w_ * b.x_ + a.x_ * b.w_ + a.y_ * b.z_ - a.z_ * b.y_,
            a.w_ * b.y_ - a.x_ * b.z_ + a.y_ * b.w_ + a.z_ * b.x_,
            a.w_ * b.z_ + a.x_ * b.y_ - a.y_ * b.x_ + a.z_ * b.w_};
  }

  /// Body-to-earth rotation of v.
  Vec3 rotate(const Vec3& v) const {
    const Vec3 u = vec();
    const Vec3 t = 2.0 * u.cross(v);
    return v + w_ * t + u.cross(t);
  }

  Mat3 rotation_matrix() const {
    Mat3 r;
    r << 1 - 2 * (y_ * y_ + z_ * z_), 2 * (x_ * y_ - w_ * z_), 2 * (x_ * z_ + w_ * y_),
        2 * (x_ * y_ + w_ * z_), 1 - 2 * (x_ * x_ + z_ * z_), 2 * (y_ * z_ - w_ * x_),
        2 * (x_ * z_ - w_ * y_), 2 * (y_ * z_ + w_ * x_), 1 - 2 * (x_ * x_ + y_ * y_);
    return r;
  }

  /// Logarithm map; inverse of from_rotation_vector for angles in [0, pi].
  Vec3 rotation_vector() const {
    const Vec3 u = vec();
    const double s = u.norm();
    if (s < 1e-12) return 2.0 * u;
    // Shortest rotation: flip so the scalar part is non-negative.
    const double sign = w_ < 0.0 ? -1.0 : 1.0;
    const double angle = 2.0 * std::atan2(s, std::abs(w_));
    return sign * (angle / s) * u;
  }

  /// Rotation angle between two orientations, in [0, pi].
  double angle_to(const UnitQuaternion& other) const {
    // atan2 of the relative rotation stays accurate near zero, where acos does not.
    const double w = w_ * other.w_ + x_ * other.x_ + y_ * other.y_ + z_ * other.z_;
    const Vec3 a = vec(), b = other.vec();
    const Vec3 v = w_ * b - other.w_ * a - a.cross(b);
    return 2.0 * std::atan2(v.norm(), std::abs(w));
  }

  /// Heading of the body x axis projected on the earth xy plane.
  double yaw() const {
    return std::atan2(2.0 * (w_ * z_ + x_ * y_), 1.0 - 2.0 * (y_ * y_ + z_ * z_));
  }

  friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Spherical interpolation along the shorter arc. t = 0 gives a, t = 1 gives b exactly.
inline UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  double bw = b.w(), bx = b.x(), by = b.y(), bz = b.z();
  double d = a.w() * bw + a.x() * bx + a.y() * by + a.z() * bz;
  if (d < 0.0) {
    d = -d;
    bw = -bw;
    bx = -bx;
    by = -by;
    bz = -bz;
  }
  double ka = 1.0 - t;
  double kb = t;
  if (d < 1.0 - 1e-10) {
    const double theta = std::acos(d);
    const double s = std::sin(theta);
    ka = std::sin((1.0 - t) * theta) / s;
    kb = std::sin(t * theta) / s;
  }
  return {ka * a.w() + kb * bw, ka * a.x() + kb * bx, ka * a.y() + kb * by, ka * a.z() + kb * bz};
}

struct ImuSample {
  double t = 0.0;   // seconds
  Vec3 accel{0.0, 0.0, 0.0};  // m/s^2, body frame, includes gravity
  Vec3 gyro{0.0, 0.0, 0.0};   // rad/s, body frame
};

inline void validate_sample(const ImuSample& s) {
  require(finite(s.t) && s.accel.allFinite() && s.gyro.allFinite(),
          "IMU sample has non-finite components");
}

struct AhrsGains {
  double kp = 0.5;
  double ki = 0.0;
  double beta = 0.1;
  /// Reference gravity for the accel-correction gate [0.5 g, 1.5 g].
  double gravity = kStandardGravity;
};

struct AhrsState {
  UnitQuaternion q;
  Vec3 integral_error = Vec3::Zero();
  AhrsGains gains;
};

inline UnitQuaternion quat_integrate_gyro(const UnitQuaternion& q, const Vec3& gyro, double dt) {
  require(finite(dt) && dt > 0.0, "dt must be positive and finite");
  require(gyro.allFinite(), "gyro must be finite");
  return q * UnitQuaternion::from_rotation_vector(gyro * dt);
}

namespace detail {

inline void validate_update(const AhrsState& state, const ImuSample& sample, double dt) {
  validate_sample(sample);
  require(finite(dt) && dt > 0.0, "dt must be positive and finite");
  const auto& g = state.gains;
  require(g.kp >= 0.0 && g.ki >= 0.0 && g.beta >= 0.0, "filter gains must be non-negative");
}

inline bool accel_usable(const Vec3& accel, double gravity) {
  const double n = accel.norm();
  return n > 0.0 && n >= 0.5 * gravity && n <= 1.5 * gravity;
}

}  // namespace detail

/// Mahony complementary filter: PI feedback on the cross product between the
/// measured and the predicted gravity direction.
inline AhrsState mahony_update(AhrsState state, const ImuSample& sample, double dt) {
  detail::validate_update(state, sample, dt);
  Vec3 omega = sample.gyro;
  if (detail::accel_usable(sample.accel, state.gains.gravity)) {
    const Vec3 measured = sample.accel.normalized();
    const Vec3 predicted = state.q.conjugate().rotate(Vec3::UnitZ());
    const Vec3 error = measured.cross(predicted);
    if (state.gains.ki > 0.0) state.integral_error += state.gains.ki * error * dt;
    omega += state.gains.kp * error + state.integral_error;
  }
  state.q = quat_integrate_gyro(state.q, omega, dt);
  return state;
}

/// Madgwick filter (IMU variant). The normalized objective gradient is folded
/// into an equivalent body-rate correction, omega - 2 beta vec(q^-1 * grad),
/// so propagation shares the exponential-map step with quat_integrate_gyro.
inline AhrsState madgwick_update(AhrsState state, const ImuSample& sample, double dt) {
  detail::validate_update(state, sample, dt);
  Vec3 omega = sample.gyro;
  if (state.gains.beta > 0.0 && detail::accel_usable(sample.accel, state.gains.gravity)) {
    const Vec3 a = sample.accel.normalized();
    const double q0 = state.q.w(), q1 = state.q.x(), q2 = state.q.y(), q3 = state.q.z();
    const double f1 = 2.0 * (q1 * q3 - q0 * q2) - a.x();
    const double f2 = 2.0 * (q0 * q1 + q2 * q3) - a.y();
    const double f3 = 2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z();
    // J^T f for the gravity objective.
    const double g0 = -2.0 * q2 * f1 + 2.0 * q1 * f2;
    const double g1 = 2.0 * q3 * f1 + 2.0 * q0 * f2 - 4.0 * q1 * f3;
    const double g2 = -2.0 * q0 * f1 + 2.0 * q3 * f2 - 4.0 * q2 * f3;
    const double g3 = 2.0 * q1 * f1 + 2.0 * q2 * f2;
    const double gn = std::sqrt(g0 * g0 + g1 * g1 + g2 * g2 + g3 * g3);
    if (gn > 1e-15) {
      // vec(conj(q) * grad) with grad normalized.
      const double w = q0, x = -q1, y = -q2, z = -q3;
      const double s0 = g0 / gn, s1 = g1 / gn, s2 = g2 / gn, s3 = g3 / gn;
      const Vec3 rate{w * s1 + x * s0 + y * s3 - z * s2,
                      w * s2 - x * s3 + y * s0 + z * s1,
                      w * s3 + x * s2 - y * s1 + z * s0};
      omega -= 2.0 * state.gains.beta * rate;
    }
  }
  state.q = quat_integrate_gyro(state.q, omega, dt);
  return state;
}

/// Body acceleration rotated into the earth frame with gravity removed.
inline Vec3 earth_accel(const UnitQuaternion& q, const Vec3& accel, double g) {
  return q.rotate(accel) - Vec3(0.0, 0.0, g);
}

}  // namespace navcore
