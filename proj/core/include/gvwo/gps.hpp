#pragma once

#include <vector>

#include <Eigen/Core>

#include "gvwo/filter_state.hpp"

namespace gvwo {

/// Position of the antenna in {E} with a diagonal covariance.
struct GpsFix {
  double t = 0.0;
  Vec3 p_G_in_E = Vec3::Zero();
  Vec3 var = Vec3::Ones();  // m^2 per axis

  void validate() const;
};

/// ^E p_G = ^E p_V + ^E_V R (^V p_O + ^O_V R^T ^O p_G).
Vec3 predict_gps(const ExtrinsicBlock& ext, const UnitQuaternion& q_VO, const Vec3& p_O_in_V);
/// Prediction at the current navigation pose.
Vec3 predict_gps(const FilterState& s);

/// Compact Jacobian over [dtheta_VO(3) dp_O(3) dtheta_EV(D) dp_V(0|3)]; the
/// extrinsic blocks follow the layout of `ext`.
Eigen::MatrixXd gps_jacobian(const ExtrinsicBlock& ext, const UnitQuaternion& q_VO,
                             const Vec3& p_O_in_V);
Eigen::MatrixXd gps_jacobian(const FilterState& s);

enum class GpsStatus {
  Accepted,
  Rejected,  // failed the chi-square gate, state untouched
  Buffered,  // newer than the state, retry after propagation
  Dropped,   // older than the clone window
};

struct GpsUpdateResult {
  GpsStatus status = GpsStatus::Buffered;
  double mahalanobis2 = 0.0;
  double threshold = 0.0;
};

/// EKF update with one fix.  The pose at fix.t is taken from the clone (or
/// current pose) at that time, or interpolated between the two bracketing
/// poses: positions linearly, attitude by slerp, with Jacobian weights
/// (1 - w, w).  Gated at `gate_prob` with 3 dof.  With iterations > 1 the
/// update is an iterated EKF that relinearizes at each new estimate (useful
/// while the extrinsic angle is far off); 1 is the plain EKF update.
GpsUpdateResult gps_update(FilterState& s, const GpsFix& fix, double gate_prob = 0.95,
                           int iterations = 1);

struct TimedPosition {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

/// Rigid alignment of VWO positions onto GPS positions.  Pairs are associated
/// by nearest timestamp within `max_dt`.  Throws DegenerateGeometry for fewer
/// than 3 pairs or a collinear trajectory.
ExtrinsicBlock initialize_extrinsics(const std::vector<GpsFix>& gps,
                                     const std::vector<TimedPosition>& vwo, ExtrinsicMode mode,
                                     const Vec3& p_G_in_O = Vec3::Zero(),
                                     bool estimate_translation = false, double max_dt = 0.05);

}  // namespace gvwo
