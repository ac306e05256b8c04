#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "gvwo/errors.hpp"
#include "gvwo/vision.hpp"
#include "gvwo/wheel.hpp"
#include "test_support.hpp"

using namespace gvwo;
using gvwo::testing::central_diff;
using gvwo::testing::random_quaternion;
using gvwo::testing::random_vec;
using gvwo::testing::relative_error;

namespace {

const CameraExtrinsics kCam = CameraExtrinsics::forward_looking(Vec3(0.1, -0.2, 0.3));

// Drives a gentle arc at 100 Hz, cloning every 0.5 s; the last clone sits at
// the final pose.  Returns the propagated state, whose mean is the truth.
FilterState arc_with_clones(int clones) {
  NavState nav;
  ExtrinsicBlock ext;
  FilterState s = make_filter_state(0.0, nav, ext, Eigen::Matrix<double, 6, 6>::Identity() * 1e-8,
                                    Eigen::MatrixXd(0, 0), Mat3::Zero(), clones);
  const WheelGeometry g;
  OdomNoise n;
  n.sigma_wx = n.sigma_wy = 0.05;
  n.sigma_vy = n.sigma_vz = 0.5;
  n.sigma_ticks_l = n.sigma_ticks_r = 2.0;
  s = augment_clone(std::move(s), 0.0);
  int k = 0;
  for (int c = 1; c < clones; ++c) {
    for (int i = 0; i < 50; ++i) {
      ++k;
      s = propagate(std::move(s), body_rates_to_encoder({2.0, 0.05}, k * 0.01, 0.01, g), g, n);
    }
    s = augment_clone(std::move(s), s.t);
  }
  return s;
}

std::vector<Vec3> features_ahead(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> x(12, 30), y(-8, 8), z(-2, 4);
  std::vector<Vec3> out;
  for (int i = 0; i < count; ++i) out.emplace_back(x(rng), y(rng), z(rng));
  return out;
}

std::vector<FeatureTrack> observe(const FilterState& truth, const std::vector<Vec3>& pts,
                                  std::mt19937_64* rng = nullptr, double sigma = 0.0) {
  std::normal_distribution<double> n(0.0, sigma > 0 ? sigma : 1.0);
  std::vector<FeatureTrack> tracks;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    FeatureTrack t;
    t.id = static_cast<std::int64_t>(i);
    for (const auto& c : truth.clones) {
      Vec2 uv = project(c.q_VO, c.p_O_in_V, pts[i], kCam);
      if (rng) uv += sigma * Vec2(n(*rng), n(*rng));
      t.obs.push_back({c.t, uv});
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

Eigen::VectorXd sample_error(std::mt19937_64& rng, const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  const Eigen::VectorXd sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd z(P.rows());
  for (auto& v : z) v = n(rng);
  return es.eigenvectors() * sd.cwiseProduct(z);
}

double position_error(const FilterState& est, const FilterState& truth) {
  const Eigen::VectorXd d = state_difference(est, truth);
  const ErrorLayout l = truth.layout();
  double acc = d.segment<3>(ErrorLayout::nav_p()).squaredNorm();
  for (int c = 0; c < l.num_clones; ++c) acc += d.segment<3>(l.clone(c) + 3).squaredNorm();
  return std::sqrt(acc);
}

int rank_of(const Eigen::MatrixXd& A) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-9);
  return static_cast<int>(lu.rank());
}

}  // namespace

TEST(Project, OpticalAxisAndPinholeRatio) {
  const CameraExtrinsics id;
  EXPECT_EQ(project(UnitQuaternion(), Vec3::Zero(), Vec3(0, 0, 5), id), Vec2(0, 0));
  EXPECT_LT((project(UnitQuaternion(), Vec3::Zero(), Vec3(1, 0, 5), id) - Vec2(0.2, 0)).norm(), 1e-15);
}

TEST(Project, MatchesTransformThenDivide) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = random_quaternion(rng);
    const Vec3 p = random_vec(rng, -5, 5);
    CameraExtrinsics ext;
    ext.R_OC = random_quaternion(rng).to_rotation();
    ext.p_O_in_C = random_vec(rng, -1, 1);
    // A point straight ahead of the camera, then mapped back to {V}.
    const Vec3 pc = random_vec(rng, -2, 2) + Vec3(0, 0, 8);
    const Vec3 f = q.to_rotation().transpose() * ext.R_OC.transpose() * (pc - ext.p_O_in_C) + p;
    const Vec2 uv = project(q, p, f, ext);
    EXPECT_LT((uv - Vec2(pc.x() / pc.z(), pc.y() / pc.z())).norm(), 1e-12);
  }
}

TEST(Project, BehindCameraThrows) {
  const CameraExtrinsics id;
  EXPECT_THROW(project(UnitQuaternion(), Vec3::Zero(), Vec3(0, 0, -1), id), BehindCamera);
  EXPECT_THROW(project(UnitQuaternion(), Vec3::Zero(), Vec3(1, 0, 0), id), BehindCamera);
}

TEST(Project, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = random_quaternion(rng);
    const Vec3 p = random_vec(rng, -5, 5);
    const Vec3 pc = random_vec(rng, -2, 2) + Vec3(0, 0, 6);
    const Vec3 f = q.to_rotation().transpose() * kCam.R_OC.transpose() * (pc - kCam.p_O_in_C) + p;
    const ProjectionJacobians J = project_with_jacobians(q, p, f, kCam);
    const Eigen::MatrixXd Jt = central_diff(
        [&](const Eigen::VectorXd& d) {
          return Eigen::VectorXd(project(UnitQuaternion::exp(Vec3(d)) * q, p, f, kCam));
        },
        3);
    const Eigen::MatrixXd Jp = central_diff(
        [&](const Eigen::VectorXd& d) { return Eigen::VectorXd(project(q, p + Vec3(d), f, kCam)); }, 3);
    const Eigen::MatrixXd Jf = central_diff(
        [&](const Eigen::VectorXd& d) { return Eigen::VectorXd(project(q, p, f + Vec3(d), kCam)); }, 3);
    EXPECT_LT(relative_error(J.d_theta, Jt), 1e-5);
    EXPECT_LT(relative_error(J.d_p, Jp), 1e-5);
    EXPECT_LT(relative_error(J.d_f, Jf), 1e-5);
  }
}

TEST(Triangulate, NoiselessTwoViews) {
  std::vector<PoseClone> clones(2);
  clones[0].t = 0.0;
  clones[1].t = 1.0;
  clones[1].p_O_in_V = Vec3(0, 1.0, 0);
  const Vec3 f(10, 2, 1);
  FeatureTrack t;
  for (const auto& c : clones) t.obs.push_back({c.t, project(c.q_VO, c.p_O_in_V, f, kCam)});
  EXPECT_LT((triangulate(t, clones, kCam) - f).norm(), 1e-9);
}

TEST(Triangulate, IdenticalPosesAreDegenerate) {
  std::vector<PoseClone> clones(3);
  for (int i = 0; i < 3; ++i) clones[i].t = i;
  FeatureTrack t;
  for (const auto& c : clones) t.obs.push_back({c.t, Vec2(0.1, 0.2)});
  EXPECT_THROW(triangulate(t, clones, kCam), DegenerateGeometry);
  FeatureTrack single;
  single.obs.push_back({0.0, Vec2::Zero()});
  EXPECT_THROW(triangulate(single, clones, kCam), DegenerateGeometry);
}

TEST(Triangulate, FiveNoisyViewsAtTenMetres) {
  // Views 2 m apart across the line of sight: depth sigma ~ z^2 sigma / sqrt(sum dy^2)
  // = 100e-3 / sqrt(40) = 1.6 cm, so 5 cm is about 3 sigma.
  std::mt19937_64 rng(43);
  std::normal_distribution<double> n(0.0, 1e-3);
  std::uniform_real_distribution<double> lateral(-3, 3);
  std::vector<PoseClone> clones(5);
  for (int i = 0; i < 5; ++i) {
    clones[i].t = i;
    clones[i].p_O_in_V = Vec3(0, 2.0 * (i - 2), 0);
  }
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 f(10, lateral(rng), lateral(rng));
    FeatureTrack t;
    for (const auto& c : clones) {
      t.obs.push_back({c.t, project(c.q_VO, c.p_O_in_V, f, kCam) + Vec2(n(rng), n(rng))});
    }
    if ((triangulate(t, clones, kCam) - f).norm() < 0.05) ++good;
  }
  EXPECT_GE(good, 95);
}

TEST(Nullspace, ProjectedFeatureJacobianVanishes) {
  std::mt19937_64 rng(44);
  const FilterState s = arc_with_clones(6);
  for (const auto& f : features_ahead(rng, 20)) {
    const FeatureTrack t = observe(s, {f}).front();
    const TrackLinearization lin = linearize_track(s, t, f, kCam);
    ASSERT_EQ(lin.r.size(), 12);
    EXPECT_LT(lin.r.cwiseAbs().maxCoeff(), 1e-12);
    const TrackLinearization proj = nullspace_projection(lin);
    EXPECT_EQ(proj.r.size(), 9);
    EXPECT_LT(proj.H_f.cwiseAbs().maxCoeff(), 1e-10);
    Eigen::MatrixXd full(lin.H_x.rows(), lin.H_x.cols() + 3);
    full << lin.H_x, lin.H_f;
    Eigen::MatrixXd projected(proj.H_x.rows(), proj.H_x.cols() + 3);
    projected << proj.H_x, proj.H_f;
    EXPECT_EQ(rank_of(projected), rank_of(full) - 3);
  }
}

TEST(Nullspace, TooFewRowsRejected) {
  TrackLinearization lin{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 6),
                         Eigen::MatrixXd::Identity(2, 3)};
  EXPECT_THROW(nullspace_projection(lin), InvalidArgument);
}

TEST(VisualUpdate, ZeroResidualLeavesStateUnchanged) {
  std::mt19937_64 rng(45);
  const FilterState s = arc_with_clones(6);
  for (auto mode : {FeatureMode::Nullspace, FeatureMode::InState}) {
    const FilterState t = visual_update(s, observe(s, features_ahead(rng, 10)), kCam, 1e-3, mode);
    if (mode == FeatureMode::Nullspace) {
      EXPECT_LT(state_difference(t, s).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LE(t.cov.trace(), s.cov.trace());
      EXPECT_EQ(t.diag.tracks_used, 10);
    } else {
      EXPECT_EQ(t.layout().num_features, 10);
      EXPECT_LT((t.nav.p_O_in_V - s.nav.p_O_in_V).norm(), 1e-9);
      const int n = s.layout().dim();
      const int off = t.layout().clones_begin();
      EXPECT_LE(t.cov.block(off, off, n - 6, n - 6).trace(), s.cov.bottomRightCorner(n - 6, n - 6).trace());
    }
  }
}

TEST(VisualUpdate, DriftedStateIsPulledTowardTruth) {
  std::mt19937_64 rng(46);
  const FilterState truth = arc_with_clones(8);
  int improved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const FilterState est = apply_correction(truth, sample_error(rng, truth.cov));
    const FilterState post = visual_update(est, observe(truth, features_ahead(rng, 15)), kCam, 1e-3);
    if (position_error(post, truth) < position_error(est, truth)) ++improved;
  }
  EXPECT_GE(improved, 95);
}

TEST(VisualUpdate, OutlierTrackIsGatedOut) {
  std::mt19937_64 rng(47);
  const FilterState s = arc_with_clones(6);
  std::vector<FeatureTrack> tracks = observe(s, features_ahead(rng, 1));
  tracks[0].obs[2].uv += Vec2(0.05, -0.05);
  const FilterState t = visual_update(s, tracks, kCam, 1e-3);
  EXPECT_EQ(t.diag.tracks_gated, 1);
  EXPECT_EQ(t.diag.visual_updates_empty, 1);
  EXPECT_EQ(t.cov, s.cov);
  EXPECT_EQ(t.nav.p_O_in_V, s.nav.p_O_in_V);
}

TEST(VisualUpdate, ObservationOffTheWindowRejected) {
  std::mt19937_64 rng(48);
  const FilterState s = arc_with_clones(4);
  std::vector<FeatureTrack> tracks = observe(s, features_ahead(rng, 1));
  tracks[0].obs[1].t += 0.25;
  EXPECT_THROW(visual_update(s, tracks, kCam, 1e-3), InvalidArgument);
  EXPECT_THROW(visual_update(s, {}, kCam, 0.0), InvalidArgument);
}

TEST(VisualUpdate, TraceNonIncreasingUnderNoise) {
  std::mt19937_64 rng(49);
  const FilterState truth = arc_with_clones(8);
  for (int trial = 0; trial < 20; ++trial) {
    const FilterState est = apply_correction(truth, sample_error(rng, truth.cov));
    const FilterState post =
        visual_update(est, observe(truth, features_ahead(rng, 10), &rng, 1e-3), kCam, 1e-3);
    EXPECT_LE(post.cov.trace(), est.cov.trace());
    EXPECT_TRUE(covariance_is_psd(post.cov));
  }
}
