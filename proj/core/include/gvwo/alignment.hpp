#pragma once

#include <vector>

#include "gvwo/geometry.hpp"

namespace gvwo {

/// dst ~ R * src + p.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + p; }
};

/// Closed-form least-squares rigid alignment (no scale) of corresponding
/// points: SVD of the centered cross-covariance with the reflection fix.
/// Throws InvalidArgument on size mismatch or fewer than 3 points, and
/// DegenerateGeometry when the source points are (nearly) collinear unless
/// `allow_collinear` is set; the returned transform is then one of the
/// equally good minimizers (the residual is still unique).
RigidTransform align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                           bool allow_collinear = false);

}  // namespace gvwo
