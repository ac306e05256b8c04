#include "gvwo/wheel.hpp"

#include <array>
#include <cmath>

#include "gvwo/errors.hpp"

namespace gvwo {

void WheelGeometry::validate() const {
  if (!(ticks_per_rev_l > 0 && ticks_per_rev_r > 0 && diameter_l > 0 && diameter_r > 0 &&
        baseline > 0)) {
    throw InvalidArgument("wheel geometry: all parameters must be strictly positive");
  }
}

void OdomNoise::validate() const {
  if (sigma_ticks_l < 0 || sigma_ticks_r < 0 || sigma_wx < 0 || sigma_wy < 0 || sigma_vy < 0 ||
      sigma_vz < 0) {
    throw InvalidArgument("odometry noise: standard deviations must be non-negative");
  }
}

BodyRates encoder_to_body_rates(const WheelEncoderSample& s, const WheelGeometry& g) {
  if (!(s.dt > 0.0)) throw InvalidArgument("encoder sample: dt must be positive");
  const double v_l = s.dm_l / (g.ticks_per_rev_l * s.dt) * kPi * g.diameter_l;
  const double v_r = s.dm_r / (g.ticks_per_rev_r * s.dt) * kPi * g.diameter_r;
  return {0.5 * (v_l + v_r), (v_r - v_l) / g.baseline};
}

WheelEncoderSample body_rates_to_encoder(const BodyRates& r, double t, double dt,
                                         const WheelGeometry& g) {
  if (!(dt > 0.0)) throw InvalidArgument("encoder sample: dt must be positive");
  const double v_l = r.v_x - 0.5 * r.omega_z * g.baseline;
  const double v_r = r.v_x + 0.5 * r.omega_z * g.baseline;
  WheelEncoderSample s;
  s.t = t;
  s.dt = dt;
  s.dm_l = v_l * g.ticks_per_rev_l * dt / (kPi * g.diameter_l);
  s.dm_r = v_r * g.ticks_per_rev_r * dt / (kPi * g.diameter_r);
  return s;
}

Eigen::Matrix<double, 6, 6> body_rate_noise(const OdomNoise& n, const WheelGeometry& g,
                                            double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("body_rate_noise: dt must be positive");
  const double kl = kPi * g.diameter_l / (g.ticks_per_rev_l * dt);
  const double kr = kPi * g.diameter_r / (g.ticks_per_rev_r * dt);
  const double var_l = std::pow(n.sigma_ticks_l * kl, 2);
  const double var_r = std::pow(n.sigma_ticks_r * kr, 2);
  const double b = g.baseline;

  Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
  Q(0, 0) = n.sigma_wx * n.sigma_wx;
  Q(1, 1) = n.sigma_wy * n.sigma_wy;
  Q(2, 2) = (var_l + var_r) / (b * b);          // omega_z
  Q(3, 3) = 0.25 * (var_l + var_r);             // v_x
  Q(2, 3) = Q(3, 2) = 0.5 * (var_r - var_l) / b;
  Q(4, 4) = n.sigma_vy * n.sigma_vy;
  Q(5, 5) = n.sigma_vz * n.sigma_vz;
  return Q;
}

void propagate_mean(UnitQuaternion& q_VO, Vec3& p_O_in_V, const Vec3& omega, const Vec3& v,
                    double dt) {
  const Mat3 Rt = q_VO.to_rotation().transpose();
  p_O_in_V += Rt * (dt * so3_left_jacobian(omega * dt) * v);
  q_VO = quat_integrate(q_VO, omega, dt);
}

namespace {

// d/domega of integral_0^dt exp([omega]x tau) v dtau, by 4-point Gauss-Legendre
// on the analytic integrand.
Mat3 displacement_rate_jacobian(const Vec3& omega, const Vec3& v, double dt) {
  static constexpr std::array<double, 4> kNodes = {-0.8611363115940526, -0.3399810435848563,
                                                   0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> kWeights = {0.3478548451374538, 0.6521451548625461,
                                                     0.6521451548625461, 0.3478548451374538};
  Mat3 acc = Mat3::Zero();
  for (std::size_t i = 0; i < kNodes.size(); ++i) {
    const double tau = 0.5 * dt * (kNodes[i] + 1.0);
    const Vec3 rotated = so3_exp(omega * tau) * v;
    acc += kWeights[i] * (-skew(rotated) * so3_left_jacobian(omega * tau) * tau);
  }
  return 0.5 * dt * acc;
}

}  // namespace

PropagationJacobians propagation_jacobians(const Mat3& R_VO, const Vec3& omega, const Vec3& v,
                                           double dt) {
  const Mat3 Rt = R_VO.transpose();
  const Vec3 disp = dt * so3_left_jacobian(omega * dt) * v;

  PropagationJacobians J;
  J.Phi.setIdentity();
  J.Phi.topLeftCorner<3, 3>() = so3_exp(-omega * dt);
  J.Phi.bottomLeftCorner<3, 3>() = -Rt * skew(disp);

  J.G.setZero();
  J.G.topLeftCorner<3, 3>() = dt * so3_left_jacobian(-omega * dt);
  J.G.bottomLeftCorner<3, 3>() = Rt * displacement_rate_jacobian(omega, v, dt);
  J.G.bottomRightCorner<3, 3>() = Rt * dt * so3_left_jacobian(omega * dt);
  return J;
}

FilterState propagate(FilterState s, const WheelEncoderSample& sample, const WheelGeometry& g,
                      const OdomNoise& n) {
  if (!(sample.t > s.t)) throw InvalidArgument("propagate: stale encoder sample");
  const BodyRates rates = encoder_to_body_rates(sample, g);
  const double h = sample.t - s.t;
  const Vec3 omega(0.0, 0.0, rates.omega_z);
  const Vec3 v(rates.v_x, 0.0, 0.0);

  const PropagationJacobians J = propagation_jacobians(s.nav.q_VO.to_rotation(), omega, v, h);
  const Eigen::Matrix<double, 6, 6> Q = body_rate_noise(n, g, sample.dt);

  constexpr int nav = ErrorLayout::nav_dim();
  const Eigen::Index rest = s.layout().dim() - nav;
  Eigen::Matrix<double, 6, 6> Pnn = s.cov.topLeftCorner<nav, nav>();
  Pnn = J.Phi * Pnn * J.Phi.transpose() + J.G * Q * J.G.transpose();
  s.cov.topLeftCorner<nav, nav>() = 0.5 * (Pnn + Pnn.transpose());
  if (rest > 0) {
    const Eigen::MatrixXd Pnx = J.Phi * s.cov.topRightCorner(nav, rest);
    s.cov.topRightCorner(nav, rest) = Pnx;
    s.cov.bottomLeftCorner(rest, nav) = Pnx.transpose();
  }

  propagate_mean(s.nav.q_VO, s.nav.p_O_in_V, omega, v, h);
  s.t = sample.t;
  return s;
}

}  // namespace gvwo
