#pragma once

// Rotation algebra shared by the estimator.
//
// Quaternion convention: JPL, scalar-last, q = [qx qy qz qw].  For a
// quaternion ^B_A q the matrix R(q) = ^B_A R maps vectors expressed in frame
// A into frame B, and quaternion products compose as R(q (x) p) = R(q) R(p).
// Attitude errors are left-multiplicative: R = exp(-[dtheta]x) R_hat, i.e.
// dq ~ [dtheta/2; 1] (x) q_hat.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gvwo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Mat3 skew(const Vec3& v);

/// Rodrigues: exp([phi]x).
Mat3 so3_exp(const Vec3& phi);
/// Inverse of so3_exp, rotation angle in [0, pi].
Vec3 so3_log(const Mat3& R);
/// Left Jacobian of SO(3): integral_0^1 exp(s [phi]x) ds.
Mat3 so3_left_jacobian(const Vec3& phi);

class UnitQuaternion {
 public:
  UnitQuaternion() : q_(0.0, 0.0, 0.0, 1.0) {}

  /// Normalizes the coefficients; throws InvalidArgument on zero or
  /// non-finite input.
  static UnitQuaternion from_coeffs(const Vec4& xyzw);
  static UnitQuaternion from_coeffs(double x, double y, double z, double w) {
    return from_coeffs(Vec4(x, y, z, w));
  }
  static UnitQuaternion from_rotation(const Mat3& R);
  /// Quaternion whose rotation matrix is exp(-[theta]x).
  static UnitQuaternion exp(const Vec3& theta);

  const Vec4& coeffs() const { return q_; }
  Vec3 vec() const { return q_.head<3>(); }
  double w() const { return q_(3); }
  double norm() const { return q_.norm(); }

  Mat3 to_rotation() const;
  UnitQuaternion inverse() const;
  /// JPL product; R(a * b) = R(a) R(b).
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;

  bool operator==(const UnitQuaternion&) const = default;

 private:
  explicit UnitQuaternion(const Vec4& unit) : q_(unit) {}
  Vec4 q_;
};

/// Body-rate integration of qdot = 1/2 Omega(omega) q with omega held
/// constant over dt (closed-form exponential, renormalized).
UnitQuaternion quat_integrate(const UnitQuaternion& q, const Vec3& omega, double dt);

/// 4x4 Omega(omega) matrix of the quaternion kinematics.
Mat4 omega_matrix(const Vec3& omega);
/// Xi(q) with qdot = 1/2 Xi(q) omega.
Eigen::Matrix<double, 4, 3> xi_matrix(const Vec4& q);

struct EulerZYX {
  double yaw = 0.0;    // alpha, about z
  double pitch = 0.0;  // beta, about y
  double roll = 0.0;   // gamma, about x

  Vec3 as_vector() const { return {yaw, pitch, roll}; }
  static EulerZYX from_vector(const Vec3& v) { return {v(0), v(1), v(2)}; }
};

Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);
/// d rot_*(a) / da.
Mat3 rot_x_derivative(double a);
Mat3 rot_y_derivative(double a);
Mat3 rot_z_derivative(double a);

/// Rz(yaw) Ry(pitch) Rx(roll).
Mat3 euler_zyx_to_rotation(const EulerZYX& e);
/// Inverse of euler_zyx_to_rotation for |pitch| < pi/2.
EulerZYX rotation_to_euler_zyx(const Mat3& R);

/// Largest |R^T R - I| entry and |det R - 1|, for invariant checks.
double orthonormality_error(const Mat3& R);

}  // namespace gvwo
