#include "gvwo/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "gvwo/ekf.hpp"
#include "gvwo/errors.hpp"

namespace gvwo {

CameraExtrinsics CameraExtrinsics::forward_looking(const Vec3& p_O_in_C) {
  CameraExtrinsics e;
  e.R_OC << 0, -1, 0,
            0, 0, -1,
            1, 0, 0;
  e.p_O_in_C = p_O_in_C;
  return e;
}

void CameraExtrinsics::validate() const {
  if (!R_OC.allFinite() || !p_O_in_C.allFinite() || orthonormality_error(R_OC) > 1e-9) {
    throw InvalidArgument("camera extrinsics: R_OC must be a rotation");
  }
}

Vec3 feature_in_camera(const UnitQuaternion& q_VO, const Vec3& p_O_in_V, const Vec3& p_f_in_V,
                       const CameraExtrinsics& ext) {
  return ext.R_OC * (q_VO.to_rotation() * (p_f_in_V - p_O_in_V)) + ext.p_O_in_C;
}

namespace {

constexpr double kMinDepth = 1e-6;

Eigen::Matrix<double, 2, 3> pinhole_jacobian(const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> J;
  J << iz, 0.0, -pc.x() * iz * iz,
       0.0, iz, -pc.y() * iz * iz;
  return J;
}

}  // namespace

Vec2 project(const UnitQuaternion& q_VO, const Vec3& p_O_in_V, const Vec3& p_f_in_V,
             const CameraExtrinsics& ext) {
  const Vec3 pc = feature_in_camera(q_VO, p_O_in_V, p_f_in_V, ext);
  if (!(pc.z() > kMinDepth)) throw BehindCamera("project: feature depth is not positive");
  return pc.head<2>() / pc.z();
}

ProjectionJacobians project_with_jacobians(const UnitQuaternion& q_VO, const Vec3& p_O_in_V,
                                           const Vec3& p_f_in_V, const CameraExtrinsics& ext) {
  const Mat3 R = q_VO.to_rotation();
  const Vec3 rel = R * (p_f_in_V - p_O_in_V);
  const Vec3 pc = ext.R_OC * rel + ext.p_O_in_C;
  if (!(pc.z() > kMinDepth)) throw BehindCamera("project: feature depth is not positive");
  const Eigen::Matrix<double, 2, 3> Jp = pinhole_jacobian(pc);
  const Mat3 RcV = ext.R_OC * R;

  ProjectionJacobians out;
  out.uv = pc.head<2>() / pc.z();
  out.d_theta = Jp * ext.R_OC * skew(rel);
  out.d_f = Jp * RcV;
  out.d_p = -out.d_f;
  return out;
}

namespace {

const PoseClone* find_clone(const std::vector<PoseClone>& clones, double t) {
  for (const auto& c : clones) {
    if (std::abs(c.t - t) < 1e-9) return &c;
  }
  return nullptr;
}

}  // namespace

Vec3 triangulate(const FeatureTrack& track, const std::vector<PoseClone>& clones,
                 const CameraExtrinsics& ext) {
  std::vector<const PoseClone*> views;
  std::vector<Vec2> meas;
  for (const auto& o : track.obs) {
    if (const PoseClone* c = find_clone(clones, o.t)) {
      views.push_back(c);
      meas.push_back(o.uv);
    }
  }
  if (views.size() < 2) throw DegenerateGeometry("triangulate: fewer than two views");

  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  std::vector<Vec3> centers;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Mat3 RcV = ext.R_OC * views[i]->q_VO.to_rotation();
    const Vec3 center = views[i]->p_O_in_V - RcV.transpose() * ext.p_O_in_C;
    const Vec3 dir = (RcV.transpose() * Vec3(meas[i].x(), meas[i].y(), 1.0)).normalized();
    const Mat3 perp = Mat3::Identity() - dir * dir.transpose();
    A += perp;
    b += perp * center;
    centers.push_back(center);
  }
  double baseline = 0.0;
  for (const auto& c : centers) baseline = std::max(baseline, (c - centers.front()).norm());
  if (baseline < 1e-3) throw DegenerateGeometry("triangulate: baseline below 1 mm");

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(A);
  if (eig.eigenvalues()(0) < 1e-10 * eig.eigenvalues()(2)) {
    throw DegenerateGeometry("triangulate: rays are parallel");
  }
  Vec3 p = A.ldlt().solve(b);

  auto cost = [&](const Vec3& x) {
    double c = 0.0;
    for (std::size_t i = 0; i < views.size(); ++i) {
      const Vec3 pc = feature_in_camera(views[i]->q_VO, views[i]->p_O_in_V, x, ext);
      if (!(pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
      c += (meas[i] - pc.head<2>() / pc.z()).squaredNorm();
    }
    return c;
  };

  double c0 = cost(p);
  if (!std::isfinite(c0)) throw DegenerateGeometry("triangulate: point behind a camera");
  for (int it = 0; it < 5 && c0 > 0.0; ++it) {
    Mat3 JtJ = Mat3::Zero();
    Vec3 Jtr = Vec3::Zero();
    for (std::size_t i = 0; i < views.size(); ++i) {
      const auto J = project_with_jacobians(views[i]->q_VO, views[i]->p_O_in_V, p, ext);
      JtJ += J.d_f.transpose() * J.d_f;
      Jtr += J.d_f.transpose() * (meas[i] - J.uv);
    }
    const Vec3 step = JtJ.ldlt().solve(Jtr);
    if (!step.allFinite()) throw DegenerateGeometry("triangulate: singular refinement");
    const double c1 = cost(p + step);
    if (!std::isfinite(c1) || c1 > 10.0 * c0 + 1e-12) {
      throw DegenerateGeometry("triangulate: refinement diverged");
    }
    if (c1 >= c0) break;
    p += step;
    c0 = c1;
    if (step.norm() < 1e-12 * (1.0 + p.norm())) break;
  }
  return p;
}

namespace {

// Track Jacobians are kept compact: H_x only spans `cols`, the state columns
// of the clones (and the feature, when it is in the state) the track touches.
struct TrackSystem {
  Eigen::VectorXd r;
  Eigen::MatrixXd H_x;
  Eigen::MatrixXd H_f;
  std::vector<Eigen::Index> cols;
};

TrackSystem build_track(const FilterState& s, const FeatureTrack& track, const Vec3& f,
                        const CameraExtrinsics& ext) {
  const ErrorLayout l = s.layout();
  const int m = static_cast<int>(track.obs.size());
  std::vector<int> clone_ids;
  for (const auto& o : track.obs) clone_ids.push_back(s.clone_index(o.t));
  std::vector<int> unique_ids = clone_ids;
  std::sort(unique_ids.begin(), unique_ids.end());
  unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());

  TrackSystem sys;
  for (int ci : unique_ids) {
    for (int k = 0; k < 6; ++k) sys.cols.push_back(l.clone(ci) + k);
  }
  sys.r.resize(2 * m);
  sys.H_x = Eigen::MatrixXd::Zero(2 * m, static_cast<Eigen::Index>(sys.cols.size()));
  sys.H_f.resize(2 * m, 3);
  for (int i = 0; i < m; ++i) {
    const int ci = clone_ids[i];
    const int local =
        6 * static_cast<int>(std::lower_bound(unique_ids.begin(), unique_ids.end(), ci) - unique_ids.begin());
    const auto& c = s.clones[ci];
    const auto J = project_with_jacobians(c.q_VO, c.p_O_in_V, f, ext);
    sys.r.segment<2>(2 * i) = track.obs[i].uv - J.uv;
    sys.H_x.block<2, 3>(2 * i, local) = J.d_theta;
    sys.H_x.block<2, 3>(2 * i, local + 3) = J.d_p;
    sys.H_f.middleRows<2>(2 * i) = J.d_f;
  }
  return sys;
}

// Appends the feature columns so H_x covers [clones, feature].
void include_feature(TrackSystem& sys, Eigen::Index feature_col) {
  const Eigen::Index n = sys.H_x.cols();
  sys.H_x.conservativeResize(Eigen::NoChange, n + 3);
  sys.H_x.rightCols<3>() = sys.H_f;
  for (int k = 0; k < 3; ++k) sys.cols.push_back(feature_col + k);
}

struct Projected {
  Eigen::VectorXd r;
  Eigen::MatrixXd H;   // compact, over cols
  Eigen::Vector3d r1;  // feature-informative part, Q1^T r
  Eigen::MatrixXd H1;  // Q1^T H_x, compact
  Mat3 R1;             // Q1^T H_f (upper triangular)
  std::vector<Eigen::Index> cols;
};

Projected nullspace_project(const TrackSystem& sys) {
  const int rows = static_cast<int>(sys.r.size());
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(sys.H_f);
  Eigen::MatrixXd QtH = sys.H_x;
  Eigen::VectorXd Qtr = sys.r;
  QtH.applyOnTheLeft(qr.householderQ().transpose());
  Qtr.applyOnTheLeft(qr.householderQ().transpose());
  Projected p;
  p.r = Qtr.tail(rows - 3);
  p.H = QtH.bottomRows(rows - 3);
  p.r1 = Qtr.head<3>();
  p.H1 = QtH.topRows(3);
  p.R1 = qr.matrixQR().topLeftCorner<3, 3>().triangularView<Eigen::Upper>();
  p.cols = sys.cols;
  return p;
}

void check_coverage(const FilterState& s, const FeatureTrack& track) {
  for (const auto& o : track.obs) {
    if (s.clone_index(o.t) < 0) {
      throw InvalidArgument("visual_update: observation at t=" + std::to_string(o.t) +
                            " has no clone");
    }
  }
}

}  // namespace

TrackLinearization linearize_track(const FilterState& s, const FeatureTrack& track, const Vec3& f,
                                   const CameraExtrinsics& ext) {
  check_coverage(s, track);
  const TrackSystem sys = build_track(s, track, f, ext);
  TrackLinearization lin;
  lin.r = sys.r;
  lin.H_x = Eigen::MatrixXd::Zero(sys.r.size(), s.layout().dim());
  lin.H_x(Eigen::all, sys.cols) = sys.H_x;
  lin.H_f = sys.H_f;
  return lin;
}

TrackLinearization nullspace_projection(const TrackLinearization& lin) {
  const Eigen::Index rows = lin.r.size();
  if (rows < 4 || lin.H_f.cols() != 3) {
    throw InvalidArgument("nullspace_projection: need two or more views");
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(lin.H_f);
  TrackLinearization out = lin;
  out.r.applyOnTheLeft(qr.householderQ().transpose());
  out.H_x.applyOnTheLeft(qr.householderQ().transpose());
  out.H_f.applyOnTheLeft(qr.householderQ().transpose());
  out.r = out.r.tail(rows - 3).eval();
  out.H_x = out.H_x.bottomRows(rows - 3).eval();
  out.H_f = out.H_f.bottomRows(rows - 3).eval();
  return out;
}

namespace {

bool gate(const FilterState& s, const Eigen::MatrixXd& H, const std::vector<Eigen::Index>& cols,
          const Eigen::VectorXd& r, double var) {
  const int dof = static_cast<int>(r.size());
  Eigen::MatrixXd S = H * s.cov(cols, cols) * H.transpose();
  S.diagonal().array() += var;
  return r.dot(S.ldlt().solve(r)) <= chi2_quantile(dof);
}

}  // namespace

FilterState visual_update(FilterState s, const std::vector<FeatureTrack>& tracks,
                          const CameraExtrinsics& ext, double sigma_px, FeatureMode mode) {
  if (!(sigma_px > 0.0)) throw InvalidArgument("visual_update: sigma_px must be positive");
  if (tracks.empty()) return s;
  for (const auto& t : tracks) check_coverage(s, t);
  const double var = sigma_px * sigma_px;

  // New in-state features: delayed initialization from the feature-informative
  // rows, before any rows are stacked (adding a feature changes the layout).
  std::set<std::int64_t> just_initialized;
  std::set<std::int64_t> rejected;
  if (mode == FeatureMode::InState) {
    for (const auto& track : tracks) {
      if (s.feature_index(track.id) >= 0) continue;
      try {
        const Vec3 f = triangulate(track, s.clones, ext);
        const Projected p = nullspace_project(build_track(s, track, f, ext));
        if (!gate(s, p.H, p.cols, p.r, var)) {
          ++s.diag.tracks_gated;
          rejected.insert(track.id);
          continue;
        }
        const Mat3 R1inv = p.R1.inverse();
        const Eigen::MatrixXd cross = -R1inv * p.H1 * s.cov(p.cols, Eigen::all);
        const Mat3 f_cov = R1inv *
                           (p.H1 * s.cov(p.cols, p.cols) * p.H1.transpose() + var * Mat3::Identity()) *
                           R1inv.transpose();
        s = add_feature(std::move(s), {track.id, f + R1inv * p.r1}, cross, f_cov);
        just_initialized.insert(track.id);
      } catch (const DegenerateGeometry&) {
        ++s.diag.tracks_degenerate;
        rejected.insert(track.id);
      } catch (const BehindCamera&) {
        ++s.diag.tracks_degenerate;
        rejected.insert(track.id);
      }
    }
  }

  const int dim = s.layout().dim();
  std::vector<Eigen::MatrixXd> Hs;
  std::vector<std::vector<Eigen::Index>> cs;
  std::vector<Eigen::VectorXd> rs;
  int total_rows = 0;
  int accepted = 0;
  for (const auto& track : tracks) {
    if (rejected.count(track.id)) continue;
    try {
      const int fi = s.feature_index(track.id);
      if (fi >= 0 && !just_initialized.count(track.id)) {
        TrackSystem sys = build_track(s, track, s.nav.features[fi].p_in_V, ext);
        include_feature(sys, s.layout().feature(fi));
        if (!gate(s, sys.H_x, sys.cols, sys.r, var)) {
          ++s.diag.tracks_gated;
          continue;
        }
        Hs.push_back(std::move(sys.H_x));
        cs.push_back(std::move(sys.cols));
        rs.push_back(std::move(sys.r));
      } else {
        const bool initialized = fi >= 0;
        const Vec3 f = initialized ? s.nav.features[fi].p_in_V : triangulate(track, s.clones, ext);
        Projected p = nullspace_project(build_track(s, track, f, ext));
        if (!initialized && !gate(s, p.H, p.cols, p.r, var)) {
          ++s.diag.tracks_gated;
          continue;
        }
        Hs.push_back(std::move(p.H));
        cs.push_back(std::move(p.cols));
        rs.push_back(std::move(p.r));
      }
      total_rows += static_cast<int>(rs.back().size());
      ++accepted;
    } catch (const DegenerateGeometry&) {
      ++s.diag.tracks_degenerate;
    } catch (const BehindCamera&) {
      ++s.diag.tracks_degenerate;
    }
  }
  s.diag.tracks_used += accepted;
  if (accepted == 0) {
    if (just_initialized.empty()) ++s.diag.visual_updates_empty;
    return s;
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total_rows, dim);
  Eigen::VectorXd r(total_rows);
  int row = 0;
  for (std::size_t i = 0; i < Hs.size(); ++i) {
    const auto n = rs[i].size();
    H.middleRows(row, n)(Eigen::all, cs[i]) = Hs[i];
    r.segment(row, n) = rs[i];
    row += static_cast<int>(n);
  }
  compress_measurements(H, r);
  const Eigen::MatrixXd R = var * Eigen::MatrixXd::Identity(r.size(), r.size());
  ekf_update(s, H, r, R, 0.0);
  return s;
}

}  // namespace gvwo
