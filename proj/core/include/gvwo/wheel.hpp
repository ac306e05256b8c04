#pragma once

#include <Eigen/Core>

#include "gvwo/filter_state.hpp"

namespace gvwo {

/// Tick increments since the previous sample; `dt` is the sampling interval
/// the increments were accumulated over and `t` the sample timestamp.
struct WheelEncoderSample {
  double t = 0.0;
  double dt = 0.0;
  double dm_l = 0.0;
  double dm_r = 0.0;
};

struct WheelGeometry {
  double ticks_per_rev_l = 4096.0;
  double ticks_per_rev_r = 4096.0;
  double diameter_l = 0.623;  // m
  double diameter_r = 0.623;  // m
  double baseline = 1.52;     // m, wheel separation

  void validate() const;
};

/// Per-sample standard deviations.  The tick noise is in ticks and reaches
/// (v_x, omega_z) through the encoder model; the remaining four channels are
/// the unmeasured body rates that only enter the covariance.
struct OdomNoise {
  double sigma_ticks_l = 0.01;
  double sigma_ticks_r = 0.01;
  double sigma_wx = 0.01;  // rad/s
  double sigma_wy = 0.01;  // rad/s
  double sigma_vy = 0.1;   // m/s
  double sigma_vz = 0.01;  // m/s

  void validate() const;
};

struct BodyRates {
  double v_x = 0.0;      // m/s
  double omega_z = 0.0;  // rad/s
};

BodyRates encoder_to_body_rates(const WheelEncoderSample& s, const WheelGeometry& g);

/// Inverse of encoder_to_body_rates (used by the simulator).
WheelEncoderSample body_rates_to_encoder(const BodyRates& r, double t, double dt,
                                         const WheelGeometry& g);

/// 6x6 covariance of the body-rate noise [w_x w_y w_z v_x v_y v_z] for one
/// sample of length dt; the (w_z, v_x) block is the tick noise mapped through
/// the encoder model.
Eigen::Matrix<double, 6, 6> body_rate_noise(const OdomNoise& n, const WheelGeometry& g, double dt);

/// Discrete linearization of one zero-order-hold step over dt with body rates
/// omega, v (constant over the step) starting at attitude R_VO.
struct PropagationJacobians {
  Eigen::Matrix<double, 6, 6> Phi;  // d(nav error_{k+1}) / d(nav error_k)
  Eigen::Matrix<double, 6, 6> G;    // d(nav error_{k+1}) / d(rate noise)
};

PropagationJacobians propagation_jacobians(const Mat3& R_VO, const Vec3& omega, const Vec3& v,
                                           double dt);

/// Mean-only step: q <- exp(omega dt) q, p <- p + R^T dt J_l(omega dt) v.
void propagate_mean(UnitQuaternion& q_VO, Vec3& p_O_in_V, const Vec3& omega, const Vec3& v,
                    double dt);

/// Propagates nav mean and covariance from s.t to sample.t with the rates of
/// `sample`.  The clone, feature and extrinsic blocks only change through
/// their cross-terms with the nav block.
FilterState propagate(FilterState s, const WheelEncoderSample& sample, const WheelGeometry& g,
                      const OdomNoise& n);

}  // namespace gvwo
