#include "gvwo/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "gvwo/errors.hpp"

namespace gvwo {

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
       -v(1), v(0), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) return Mat3::Identity() + skew(phi);
  return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

Vec3 so3_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double th = phi.norm();
  const Mat3 K = skew(phi);
  if (th < 1e-6) {
    // Series to third order keeps FD checks clean near zero rate.
    return Mat3::Identity() + 0.5 * K + K * K / 6.0;
  }
  const double th2 = th * th;
  return Mat3::Identity() + (1.0 - std::cos(th)) / th2 * K +
         (th - std::sin(th)) / (th2 * th) * K * K;
}

UnitQuaternion UnitQuaternion::from_coeffs(const Vec4& xyzw) {
  if (!xyzw.allFinite()) throw InvalidArgument("quaternion: non-finite coefficients");
  const double n = xyzw.norm();
  if (n < 1e-12) throw InvalidArgument("quaternion: zero norm");
  Vec4 q = xyzw / n;
  return UnitQuaternion(q);
}

UnitQuaternion UnitQuaternion::from_rotation(const Mat3& R) {
  // JPL R(q) is the transpose of the Hamilton matrix of the same coefficients.
  const Eigen::Quaterniond h(Mat3(R.transpose()));
  return from_coeffs(h.x(), h.y(), h.z(), h.w());
}

UnitQuaternion UnitQuaternion::exp(const Vec3& theta) {
  if (!theta.allFinite()) throw InvalidArgument("quaternion exp: non-finite input");
  const double angle = theta.norm();
  Vec4 q;
  if (angle < 1e-12) {
    q << 0.5 * theta, 1.0;
    q.normalize();
  } else {
    q << std::sin(0.5 * angle) / angle * theta, std::cos(0.5 * angle);
  }
  return UnitQuaternion(q);
}

Mat3 UnitQuaternion::to_rotation() const {
  const Vec3 v = vec();
  const double s = w();
  return (2.0 * s * s - 1.0) * Mat3::Identity() - 2.0 * s * skew(v) + 2.0 * v * v.transpose();
}

UnitQuaternion UnitQuaternion::inverse() const {
  return UnitQuaternion(Vec4(-q_(0), -q_(1), -q_(2), q_(3)));
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  const Vec3 qv = vec();
  const Vec3 pv = rhs.vec();
  const double q4 = w();
  const double p4 = rhs.w();
  Vec4 out;
  out << q4 * pv + p4 * qv - qv.cross(pv), q4 * p4 - qv.dot(pv);
  // Products of unit quaternions drift off the sphere at the 1e-16 level.
  out.normalize();
  return UnitQuaternion(out);
}

UnitQuaternion quat_integrate(const UnitQuaternion& q, const Vec3& omega, double dt) {
  if (!omega.allFinite() || !std::isfinite(dt)) {
    throw InvalidArgument("quat_integrate: non-finite input");
  }
  if (dt < 0.0) throw InvalidArgument("quat_integrate: negative dt");
  return UnitQuaternion::exp(omega * dt) * q;
}

Mat4 omega_matrix(const Vec3& omega) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = -skew(omega);
  m.topRightCorner<3, 1>() = omega;
  m.bottomLeftCorner<1, 3>() = -omega.transpose();
  return m;
}

Eigen::Matrix<double, 4, 3> xi_matrix(const Vec4& q) {
  Eigen::Matrix<double, 4, 3> m;
  m.topRows<3>() = q(3) * Mat3::Identity() + skew(q.head<3>());
  m.bottomRows<1>() = -q.head<3>().transpose();
  return m;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 rot_x_derivative(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

Mat3 rot_y_derivative(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Mat3 rot_z_derivative(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

Mat3 euler_zyx_to_rotation(const EulerZYX& e) {
  return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

EulerZYX rotation_to_euler_zyx(const Mat3& R) {
  EulerZYX e;
  e.pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  e.yaw = std::atan2(R(1, 0), R(0, 0));
  e.roll = std::atan2(R(2, 1), R(2, 2));
  return e;
}

double orthonormality_error(const Mat3& R) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(R.determinant() - 1.0));
}

}  // namespace gvwo
