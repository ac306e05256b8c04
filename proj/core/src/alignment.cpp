#include "gvwo/alignment.hpp"

#include <Eigen/SVD>

#include "gvwo/errors.hpp"

namespace gvwo {

RigidTransform align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                           bool allow_collinear) {
  if (src.size() != dst.size()) throw InvalidArgument("align_rigid: size mismatch");
  if (src.size() < 3) throw InvalidArgument("align_rigid: need at least 3 correspondences");
  const double n = static_cast<double>(src.size());

  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Mat3 cross = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s;
    cross += (dst[i] - mu_d) * a.transpose();
    scatter += a * a.transpose();
  }

  // A rotation is pinned down once the source spans at least a plane.
  const Eigen::JacobiSVD<Mat3> spread(scatter);
  const Vec3 sv = spread.singularValues();
  if (!allow_collinear && (!(sv(0) > 0.0) || sv(1) < 1e-8 * sv(0))) {
    throw DegenerateGeometry("align_rigid: correspondences are collinear");
  }

  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) S(2, 2) = -1.0;

  RigidTransform T;
  T.R = svd.matrixU() * S * svd.matrixV().transpose();
  T.p = mu_d - T.R * mu_s;
  return T;
}

}  // namespace gvwo
