#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "gvwo/filter_state.hpp"

namespace gvwo {

/// ^C_O R and ^C p_O.  The default is the identity transform; forward_looking()
/// gives a camera looking along the odometer x axis (z_C = x_O, x_C = -y_O).
struct CameraExtrinsics {
  Mat3 R_OC = Mat3::Identity();
  Vec3 p_O_in_C = Vec3::Zero();

  static CameraExtrinsics forward_looking(const Vec3& p_O_in_C = Vec3::Zero());
  void validate() const;
};

struct FeatureObservation {
  double t = 0.0;  // clone timestamp
  Vec2 uv = Vec2::Zero();  // normalized image coordinates
};

struct FeatureTrack {
  std::int64_t id = 0;
  std::vector<FeatureObservation> obs;
};

/// How features enter the update.  Nullspace marginalizes the feature by
/// projecting onto the left nullspace of its Jacobian; InState keeps it in
/// the state vector (delayed initialization, then joint updates).
enum class FeatureMode { Nullspace, InState };

/// Point in the camera frame: ^C_O R ^O_V R (p_f - p_O) + ^C p_O.
Vec3 feature_in_camera(const UnitQuaternion& q_VO, const Vec3& p_O_in_V, const Vec3& p_f_in_V,
                       const CameraExtrinsics& ext);

/// Normalized image point (x/z, y/z).  Throws BehindCamera for depth <= 1e-6 m.
Vec2 project(const UnitQuaternion& q_VO, const Vec3& p_O_in_V, const Vec3& p_f_in_V,
             const CameraExtrinsics& ext);

struct ProjectionJacobians {
  Vec2 uv = Vec2::Zero();
  Eigen::Matrix<double, 2, 3> d_theta;  // attitude error of the observing pose
  Eigen::Matrix<double, 2, 3> d_p;      // position of the observing pose
  Eigen::Matrix<double, 2, 3> d_f;      // feature position
};

ProjectionJacobians project_with_jacobians(const UnitQuaternion& q_VO, const Vec3& p_O_in_V,
                                           const Vec3& p_f_in_V, const CameraExtrinsics& ext);

/// Feature position in {V} from the track's observations at the given
/// clones: linear intersection, then at most 5 Gauss-Newton steps on the
/// reprojection error.  Observations without a clone are ignored.  Throws
/// DegenerateGeometry for fewer than two usable views, a baseline below 1e-3
/// m, an ill-conditioned intersection or a diverging refinement.
Vec3 triangulate(const FeatureTrack& track, const std::vector<PoseClone>& clones,
                 const CameraExtrinsics& ext);

/// Residuals and Jacobians of one track at the feature estimate f; H_x spans
/// the full error state.  Every observation must sit on a clone.
struct TrackLinearization {
  Eigen::VectorXd r;
  Eigen::MatrixXd H_x;
  Eigen::MatrixXd H_f;
};
TrackLinearization linearize_track(const FilterState& s, const FeatureTrack& track, const Vec3& f,
                                   const CameraExtrinsics& ext);

/// Left-nullspace projection of a linearized track (QR of H_f): the 2m-3 rows
/// that do not see the feature.  H_f is projected too, so it comes back as
/// zero up to round-off.
TrackLinearization nullspace_projection(const TrackLinearization& lin);

/// MSCKF update with a batch of finished tracks.  Every observation must sit
/// on a clone (InvalidArgument otherwise).  Each track is gated separately at
/// 95% (dof 2m-3 in the nullspace form, 2m for in-state features); accepted
/// tracks are stacked, compressed and applied in one EKF update.  Tracks whose
/// feature is already in the state are updated jointly with it; in InState
/// mode new features are added to the state after their first update.
FilterState visual_update(FilterState s, const std::vector<FeatureTrack>& tracks,
                          const CameraExtrinsics& ext, double sigma_px,
                          FeatureMode mode = FeatureMode::Nullspace);

}  // namespace gvwo
