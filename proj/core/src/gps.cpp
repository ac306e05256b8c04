#include "gvwo/gps.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "gvwo/alignment.hpp"
#include "gvwo/ekf.hpp"
#include "gvwo/errors.hpp"

namespace gvwo {

void GpsFix::validate() const {
  if (!std::isfinite(t) || !p_G_in_E.allFinite()) throw InvalidArgument("gps fix: non-finite");
  if (!(var.array() > 0.0).all() || !var.allFinite()) {
    throw InvalidArgument("gps fix: variances must be positive");
  }
}

Vec3 predict_gps(const ExtrinsicBlock& ext, const UnitQuaternion& q_VO, const Vec3& p_O_in_V) {
  const Vec3 p_G_in_V = p_O_in_V + q_VO.to_rotation().transpose() * ext.p_G_in_O;
  return ext.p_V_in_E + ext.R_EV() * p_G_in_V;
}

Vec3 predict_gps(const FilterState& s) {
  return predict_gps(s.extrinsic, s.nav.q_VO, s.nav.p_O_in_V);
}

Eigen::MatrixXd gps_jacobian(const ExtrinsicBlock& ext, const UnitQuaternion& q_VO,
                             const Vec3& p_O_in_V) {
  const int D = ext.rotation_dim();
  const int T = ext.translation_dim();
  const Mat3 R_EV = ext.R_EV();
  const Mat3 Rt = q_VO.to_rotation().transpose();
  const Vec3 p_G_in_V = p_O_in_V + Rt * ext.p_G_in_O;

  Eigen::MatrixXd H(3, 6 + D + T);
  H.leftCols<3>() = -R_EV * Rt * skew(ext.p_G_in_O);
  H.middleCols<3>(3) = R_EV;
  if (D > 0) H.middleCols(6, D) = ext.rotation_jacobian(p_G_in_V);
  if (T > 0) H.rightCols<3>().setIdentity();
  return H;
}

Eigen::MatrixXd gps_jacobian(const FilterState& s) {
  return gps_jacobian(s.extrinsic, s.nav.q_VO, s.nav.p_O_in_V);
}

namespace {

struct Pose {
  UnitQuaternion q;
  Vec3 p;
  double t;
  int col;  // error-state offset of the pose block
};

// Iterated EKF: Gauss-Newton on the prior plus this measurement, relinearizing
// at x_i = x_hat [+] dx_i.  The gate uses the first linearization.
template <typename Linearize>
EkfOutcome iterated_update(FilterState& s, const Eigen::MatrixXd& H0, const Eigen::VectorXd& r0,
                           const Eigen::MatrixXd& R, double gate_prob, int iterations,
                           Linearize&& linearize) {
  EkfOutcome out;
  const auto cols = support_columns(H0);
  Eigen::MatrixXd S = H0(Eigen::all, cols) * s.cov(cols, cols) * H0(Eigen::all, cols).transpose() + R;
  out.mahalanobis2 = r0.dot(S.ldlt().solve(r0));
  if (gate_prob > 0.0 && gate_prob < 1.0) {
    out.threshold = chi2_quantile(static_cast<int>(r0.size()), gate_prob);
    if (!(out.mahalanobis2 <= out.threshold)) return out;
  }
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(s.cov.rows());
  Eigen::MatrixXd H = H0;
  Eigen::VectorXd r = r0;
  Eigen::MatrixXd PHt, Kt;
  for (int it = 0; it < iterations; ++it) {
    if (it > 0) linearize(apply_correction(s, dx), r, H);
    PHt = s.cov * H.transpose();
    S = H * PHt + R;
    Kt = S.ldlt().solve(PHt.transpose());
    const Eigen::VectorXd next = Kt.transpose() * (r + H * dx);
    const double step = (next - dx).norm();
    dx = next;
    if (step < 1e-12 * (1.0 + dx.norm())) break;
  }
  s.cov.noalias() -= Kt.transpose() * PHt.transpose();
  s = apply_correction(std::move(s), dx);
  enforce_symmetry_and_check(s);
  out.accepted = true;
  return out;
}

}  // namespace

GpsUpdateResult gps_update(FilterState& s, const GpsFix& fix, double gate_prob, int iterations) {
  fix.validate();
  GpsUpdateResult res;
  const ErrorLayout l = s.layout();

  std::vector<Pose> poses;
  poses.reserve(s.clones.size() + 1);
  for (int i = 0; i < l.num_clones; ++i) {
    poses.push_back({s.clones[i].q_VO, s.clones[i].p_O_in_V, s.clones[i].t, l.clone(i)});
  }
  if (poses.empty() || s.t > poses.back().t + 1e-9) {
    poses.push_back({s.nav.q_VO, s.nav.p_O_in_V, s.t, ErrorLayout::nav_theta()});
  }

  constexpr double kTol = 1e-9;
  if (fix.t > poses.back().t + kTol) {
    res.status = GpsStatus::Buffered;
    return res;
  }
  if (fix.t < poses.front().t - kTol) {
    res.status = GpsStatus::Dropped;
    ++s.diag.gps_dropped;
    return res;
  }

  // Bracketing pair (a, b) and weight w of b; a == b for an exact hit.
  std::size_t b = 0;
  while (b < poses.size() && poses[b].t < fix.t - kTol) ++b;
  std::size_t a = b;
  double w = 0.0;
  if (std::abs(poses[b].t - fix.t) > kTol) {
    a = b - 1;
    w = (fix.t - poses[a].t) / (poses[b].t - poses[a].t);
  }

  // Pose blocks are read from `st` so the iterated form can relinearize.
  auto linearize = [&](const FilterState& st, Eigen::VectorXd& r, Eigen::MatrixXd& H) {
    auto pose_at = [&](std::size_t i) -> std::pair<UnitQuaternion, Vec3> {
      if (poses[i].col == ErrorLayout::nav_theta()) return {st.nav.q_VO, st.nav.p_O_in_V};
      const auto& c = st.clones[i];
      return {c.q_VO, c.p_O_in_V};
    };
    auto [q, p] = pose_at(a);
    if (a != b) {
      const auto [qb, pb] = pose_at(b);
      const Vec3 phi = -so3_log(qb.to_rotation() * q.to_rotation().transpose());
      q = UnitQuaternion::exp(w * phi) * q;
      p = (1.0 - w) * p + w * pb;
    }
    r = fix.p_G_in_E - predict_gps(st.extrinsic, q, p);
    const Eigen::MatrixXd Hc = gps_jacobian(st.extrinsic, q, p);
    H = Eigen::MatrixXd::Zero(3, l.dim());
    H.middleCols<6>(poses[a].col) += (a == b ? 1.0 : 1.0 - w) * Hc.leftCols<6>();
    if (a != b) H.middleCols<6>(poses[b].col) += w * Hc.leftCols<6>();
    const int ext_cols = l.rot_dim + l.trans_dim;
    if (ext_cols > 0) H.middleCols(l.ext_theta(), ext_cols) = Hc.rightCols(ext_cols);
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd H;
  linearize(s, r, H);
  const Eigen::MatrixXd R = fix.var.asDiagonal();
  EkfOutcome out;
  if (iterations <= 1) {
    out = ekf_update(s, H, r, R, gate_prob);
  } else {
    out = iterated_update(s, H, r, R, gate_prob, iterations, linearize);
  }
  res.mahalanobis2 = out.mahalanobis2;
  res.threshold = out.threshold;
  if (out.accepted) {
    res.status = GpsStatus::Accepted;
    ++s.diag.gps_accepted;
  } else {
    res.status = GpsStatus::Rejected;
    ++s.diag.gps_rejected;
  }
  return res;
}

ExtrinsicBlock initialize_extrinsics(const std::vector<GpsFix>& gps,
                                     const std::vector<TimedPosition>& vwo, ExtrinsicMode mode,
                                     const Vec3& p_G_in_O, bool estimate_translation,
                                     double max_dt) {
  std::vector<Vec3> src, dst;
  for (const auto& fix : gps) {
    auto it = std::lower_bound(vwo.begin(), vwo.end(), fix.t,
                               [](const TimedPosition& x, double t) { return x.t < t; });
    const TimedPosition* best = nullptr;
    if (it != vwo.end()) best = &*it;
    if (it != vwo.begin() && (!best || fix.t - std::prev(it)->t < best->t - fix.t)) {
      best = &*std::prev(it);
    }
    if (best && std::abs(best->t - fix.t) <= max_dt) {
      src.push_back(best->p);
      dst.push_back(fix.p_G_in_E);
    }
  }
  if (src.size() < 3) throw DegenerateGeometry("initialize_extrinsics: fewer than 3 pairs");

  const RigidTransform T = align_rigid(src, dst);
  ExtrinsicBlock ext;
  ext.mode = mode;
  ext.theta_EV = rotation_to_euler_zyx(T.R);
  ext.p_V_in_E = T.p;
  ext.p_G_in_O = p_G_in_O;
  ext.estimate_translation = estimate_translation;
  return ext;
}

}  // namespace gvwo
