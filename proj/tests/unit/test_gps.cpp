#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gvwo/errors.hpp"
#include "gvwo/gps.hpp"
#include "gvwo/wheel.hpp"
#include "test_support.hpp"

using namespace gvwo;
using gvwo::testing::central_diff;
using gvwo::testing::random_euler;
using gvwo::testing::random_quaternion;
using gvwo::testing::random_spd;
using gvwo::testing::random_state;
using gvwo::testing::random_vec;
using gvwo::testing::relative_error;

namespace {

bool bit_identical(const FilterState& a, const FilterState& b) {
  if (a.cov.rows() != b.cov.rows() || a.cov != b.cov) return false;
  if (a.nav.q_VO.coeffs() != b.nav.q_VO.coeffs() || a.nav.p_O_in_V != b.nav.p_O_in_V) return false;
  if (a.clones.size() != b.clones.size()) return false;
  for (std::size_t i = 0; i < a.clones.size(); ++i) {
    if (a.clones[i].q_VO.coeffs() != b.clones[i].q_VO.coeffs()) return false;
    if (a.clones[i].p_O_in_V != b.clones[i].p_O_in_V) return false;
  }
  const auto& x = a.extrinsic.theta_EV;
  const auto& y = b.extrinsic.theta_EV;
  return x.yaw == y.yaw && x.pitch == y.pitch && x.roll == y.roll &&
         a.extrinsic.p_V_in_E == b.extrinsic.p_V_in_E;
}

// Independent composition of the three rigid transforms O -> V -> E.
Vec3 compose_oracle(const ExtrinsicBlock& ext, const UnitQuaternion& q_VO, const Vec3& p_O) {
  Eigen::Matrix4d T_EV = Eigen::Matrix4d::Identity(), T_VO = Eigen::Matrix4d::Identity();
  T_EV.topLeftCorner<3, 3>() = euler_zyx_to_rotation(ext.theta_EV);
  T_EV.topRightCorner<3, 1>() = ext.p_V_in_E;
  T_VO.topLeftCorner<3, 3>() = q_VO.to_rotation().transpose();
  T_VO.topRightCorner<3, 1>() = p_O;
  return (T_EV * T_VO * ext.p_G_in_O.homogeneous()).head<3>();
}

}  // namespace

TEST(PredictGps, IdentityFramesReturnOdometerPosition) {
  ExtrinsicBlock ext;
  const Vec3 p(3, -4, 5);
  EXPECT_EQ(predict_gps(ext, UnitQuaternion(), p), p);
}

TEST(PredictGps, PureTranslation) {
  ExtrinsicBlock ext;
  ext.p_V_in_E = Vec3(1, 2, 3);
  ext.p_G_in_O = Vec3(0.5, 0, 0);
  EXPECT_EQ(predict_gps(ext, UnitQuaternion(), Vec3::Zero()), Vec3(1.5, 2, 3));
}

TEST(PredictGps, MatchesComposedTransforms) {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 100; ++i) {
    ExtrinsicBlock ext;
    ext.theta_EV = random_euler(rng);
    ext.p_V_in_E = random_vec(rng, -50, 50);
    ext.p_G_in_O = random_vec(rng, -2, 2);
    const UnitQuaternion q = random_quaternion(rng);
    const Vec3 p = random_vec(rng, -100, 100);
    EXPECT_LT((predict_gps(ext, q, p) - compose_oracle(ext, q, p)).norm(), 1e-10);
  }
}

TEST(GpsJacobian, ThreeDofAtIdentity) {
  ExtrinsicBlock ext;
  ext.mode = ExtrinsicMode::ThreeDoF;
  const Eigen::MatrixXd H = gps_jacobian(ext, UnitQuaternion(), Vec3(1, 0, 0));
  ASSERT_EQ(H.cols(), 9);
  EXPECT_EQ(Mat3(H.rightCols<3>()), skew(Vec3(1, 0, 0)));
  EXPECT_EQ(Mat3(H.middleCols<3>(3)), Mat3::Identity());
}

TEST(GpsJacobian, YawColumnAtZeroAngles) {
  ExtrinsicBlock ext;
  ext.mode = ExtrinsicMode::Yaw;
  const Eigen::MatrixXd H = gps_jacobian(ext, UnitQuaternion(), Vec3(1, 0, 0));
  ASSERT_EQ(H.cols(), 7);
  EXPECT_LT((H.col(6) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(GpsJacobian, ColumnsFollowLayout) {
  ExtrinsicBlock ext;
  ext.mode = ExtrinsicMode::Fixed;
  EXPECT_EQ(gps_jacobian(ext, UnitQuaternion(), Vec3::Zero()).cols(), 6);
  ext.estimate_translation = true;
  const Eigen::MatrixXd H = gps_jacobian(ext, UnitQuaternion(), Vec3::Zero());
  ASSERT_EQ(H.cols(), 9);
  EXPECT_EQ(Mat3(H.rightCols<3>()), Mat3::Identity());
}

// With no clones or features the error state is exactly the compact Jacobian
// layout, so apply_correction drives the finite differences.
TEST(GpsJacobian, MatchesFiniteDifferencesInEveryMode) {
  std::mt19937_64 rng(52);
  for (auto mode : {ExtrinsicMode::ThreeDoF, ExtrinsicMode::Yaw, ExtrinsicMode::Pitch,
                    ExtrinsicMode::Roll, ExtrinsicMode::Fixed}) {
    for (bool trans : {false, true}) {
      for (int i = 0; i < 40; ++i) {
        const FilterState s = random_state(rng, mode, 0, 0, trans);
        const Eigen::MatrixXd H = gps_jacobian(s);
        ASSERT_EQ(H.cols(), s.layout().dim());
        const Eigen::MatrixXd H_fd = central_diff(
            [&](const Eigen::VectorXd& dx) {
              return Eigen::VectorXd(predict_gps(apply_correction(s, dx)));
            },
            s.layout().dim());
        EXPECT_LT(relative_error(H, H_fd), 1e-6) << to_string(mode) << " " << trans;
      }
    }
  }
}

TEST(GpsUpdate, ExactCloneZeroResidualLeavesStateUnchanged) {
  std::mt19937_64 rng(53);
  FilterState s = random_state(rng, ExtrinsicMode::Yaw, 3, 0);
  s.t = 0.35;
  const FilterState before = s;
  GpsFix fix;
  fix.t = s.clones[1].t;
  fix.p_G_in_E = predict_gps(s.extrinsic, s.clones[1].q_VO, s.clones[1].p_O_in_V);
  const auto res = gps_update(s, fix, 0.95, 3);
  EXPECT_EQ(res.status, GpsStatus::Accepted);
  EXPECT_LT(state_difference(s, before).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(s.cov.trace(), before.cov.trace());
}

TEST(GpsUpdate, MidpointOfLinearMotionHasZeroResidual) {
  std::mt19937_64 rng(54);
  for (int i = 0; i < 20; ++i) {
    FilterState s = random_state(rng, ExtrinsicMode::ThreeDoF, 2, 0);
    const UnitQuaternion q = random_quaternion(rng);
    const Vec3 a = random_vec(rng, -10, 10), b = random_vec(rng, -10, 10);
    s.clones[0].q_VO = s.clones[1].q_VO = s.nav.q_VO = q;
    s.clones[0].p_O_in_V = a;
    s.clones[1].p_O_in_V = s.nav.p_O_in_V = b;
    s.t = s.clones[1].t;
    GpsFix fix;
    fix.t = 0.5 * (s.clones[0].t + s.clones[1].t);
    fix.p_G_in_E = predict_gps(s.extrinsic, q, 0.5 * (a + b));
    const auto res = gps_update(s, fix, 0.95, 1);
    EXPECT_EQ(res.status, GpsStatus::Accepted);
    EXPECT_LT(res.mahalanobis2, 1e-18);
  }
}

TEST(GpsUpdate, InterpolatesAttitudeBySlerp) {
  std::mt19937_64 rng(55);
  FilterState s = random_state(rng, ExtrinsicMode::Fixed, 2, 0);
  s.extrinsic.p_G_in_O = Vec3(1.0, 0.5, -0.2);
  const UnitQuaternion q0 = random_quaternion(rng);
  const Vec3 phi(0.0, 0.0, 0.3);
  s.clones[0].q_VO = q0;
  s.clones[1].q_VO = s.nav.q_VO = UnitQuaternion::exp(phi) * q0;
  s.clones[0].p_O_in_V = s.clones[1].p_O_in_V = s.nav.p_O_in_V = Vec3::Zero();
  s.t = s.clones[1].t;
  GpsFix fix;
  const double w = 0.25;
  fix.t = (1 - w) * s.clones[0].t + w * s.clones[1].t;
  fix.p_G_in_E = predict_gps(s.extrinsic, UnitQuaternion::exp(w * phi) * q0, Vec3::Zero());
  EXPECT_LT(gps_update(s, fix, 0.95, 1).mahalanobis2, 1e-18);
}

TEST(GpsUpdate, GateRejectionIsBitIdentical) {
  std::mt19937_64 rng(56);
  for (int iterations : {1, 3}) {
    FilterState s = random_state(rng, ExtrinsicMode::Yaw, 2, 1);
    s.t = s.clones.back().t;
    const FilterState before = s;
    GpsFix fix;
    fix.t = s.t;
    fix.p_G_in_E = predict_gps(s) + Vec3(500, 0, 0);
    const auto res = gps_update(s, fix, 0.95, iterations);
    EXPECT_EQ(res.status, GpsStatus::Rejected);
    EXPECT_GT(res.mahalanobis2, res.threshold);
    EXPECT_NEAR(res.threshold, 7.814727903251178, 1e-9);
    EXPECT_TRUE(bit_identical(s, before));
    EXPECT_EQ(s.diag.gps_rejected, 1);
  }
}

TEST(GpsUpdate, FixedModeNeverTouchesExtrinsics) {
  std::mt19937_64 rng(57);
  std::normal_distribution<double> n(0.0, 1.0);
  FilterState s = random_state(rng, ExtrinsicMode::Fixed, 1, 0);
  const ExtrinsicBlock before = s.extrinsic;
  for (int k = 0; k < 50; ++k) {
    s.t += 0.1;
    GpsFix fix;
    fix.t = s.t;
    fix.p_G_in_E = predict_gps(s) + Vec3(n(rng), n(rng), 2 * n(rng));
    fix.var = Vec3(1, 1, 4);
    gps_update(s, fix, 0.95, 3);
  }
  EXPECT_GT(s.diag.gps_accepted, 0);
  EXPECT_EQ(s.extrinsic.theta_EV.yaw, before.theta_EV.yaw);
  EXPECT_EQ(s.extrinsic.theta_EV.pitch, before.theta_EV.pitch);
  EXPECT_EQ(s.extrinsic.theta_EV.roll, before.theta_EV.roll);
  EXPECT_EQ(s.extrinsic.p_V_in_E, before.p_V_in_E);
}

TEST(GpsUpdate, FutureFixIsBufferedAndStaleFixDropped) {
  std::mt19937_64 rng(58);
  FilterState s = random_state(rng, ExtrinsicMode::Yaw, 2, 0);
  s.t = 1.0;
  const FilterState before = s;
  GpsFix future;
  future.t = 1.5;
  EXPECT_EQ(gps_update(s, future).status, GpsStatus::Buffered);
  GpsFix stale;
  stale.t = 0.05;
  EXPECT_EQ(gps_update(s, stale).status, GpsStatus::Dropped);
  EXPECT_EQ(s.diag.gps_dropped, 1);
  EXPECT_TRUE(bit_identical(s, before));
  GpsFix bad;
  bad.var = Vec3(1, 0, 1);
  EXPECT_THROW(gps_update(s, bad), InvalidArgument);
}

TEST(GpsUpdate, YawVarianceStrictlyDecreasesOnAcceptedFixes) {
  // Circle at 5 m/s and 0.2 rad/s, fixes at 1 Hz, truth yaw offset 20 deg.
  const WheelGeometry g;
  const OdomNoise n;
  ExtrinsicBlock truth_ext;
  truth_ext.mode = ExtrinsicMode::Yaw;
  truth_ext.theta_EV = {deg2rad(20.0), 0.0, 0.0};
  truth_ext.p_V_in_E = Vec3(3, -2, 1);
  ExtrinsicBlock ext = truth_ext;
  ext.theta_EV.yaw = 0.0;
  FilterState s = make_filter_state(0.0, NavState{}, ext, Eigen::Matrix<double, 6, 6>::Identity() * 1e-6,
                                    Eigen::MatrixXd::Constant(1, 1, std::pow(deg2rad(30.0), 2)));
  FilterState truth = s;
  std::mt19937_64 rng(59);
  std::normal_distribution<double> z(0.0, 1.0);
  double var = s.cov(s.layout().ext_theta(), s.layout().ext_theta());
  int accepted = 0;
  for (int k = 1; k <= 6000; ++k) {
    const auto sample = body_rates_to_encoder({5.0, 0.2}, k * 0.01, 0.01, g);
    s = propagate(std::move(s), sample, g, n);
    propagate_mean(truth.nav.q_VO, truth.nav.p_O_in_V, Vec3(0, 0, 0.2), Vec3(5, 0, 0), 0.01);
    if (k % 100 != 0) continue;
    GpsFix fix;
    fix.t = s.t;
    fix.var = Vec3(1, 1, 4);
    fix.p_G_in_E = predict_gps(truth_ext, truth.nav.q_VO, truth.nav.p_O_in_V) +
                   Vec3(z(rng), z(rng), 2 * z(rng));
    if (gps_update(s, fix, 0.95, 3).status != GpsStatus::Accepted) continue;
    ++accepted;
    const double next = s.cov(s.layout().ext_theta(), s.layout().ext_theta());
    EXPECT_LT(next, var) << "fix " << k / 100;
    var = next;
  }
  EXPECT_GE(accepted, 50);
  EXPECT_LT(std::abs(wrap_angle(s.extrinsic.theta_EV.yaw - deg2rad(20.0))), deg2rad(2.0));
}

TEST(InitializeExtrinsics, IdenticalTrajectoriesGiveIdentity) {
  std::vector<GpsFix> gps;
  std::vector<TimedPosition> vwo;
  for (int i = 0; i < 20; ++i) {
    const Vec3 p(i, i < 10 ? 0.0 : i - 10.0, 0.1 * i);
    vwo.push_back({0.1 * i, p});
    gps.push_back({0.1 * i, p, Vec3::Ones()});
  }
  const ExtrinsicBlock e = initialize_extrinsics(gps, vwo, ExtrinsicMode::Yaw);
  EXPECT_LT((e.R_EV() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(e.p_V_in_E.norm(), 1e-12);
  EXPECT_EQ(e.mode, ExtrinsicMode::Yaw);
}

TEST(InitializeExtrinsics, RecoversExactTransform) {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 20; ++trial) {
    const EulerZYX e = random_euler(rng);
    const Mat3 R = euler_zyx_to_rotation(e);
    const Vec3 p = random_vec(rng, -100, 100);
    std::vector<GpsFix> gps;
    std::vector<TimedPosition> vwo;
    for (int i = 0; i < 30; ++i) {
      const Vec3 q = random_vec(rng, -50, 50);
      vwo.push_back({1.0 * i, q});
      gps.push_back({1.0 * i + 0.01, R * q + p, Vec3::Ones()});
    }
    const ExtrinsicBlock out = initialize_extrinsics(gps, vwo, ExtrinsicMode::ThreeDoF);
    EXPECT_LT((out.R_EV() - R).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((out.p_V_in_E - p).norm(), 1e-9);
  }
}

TEST(InitializeExtrinsics, NoisyLShapeWithinTwoDegrees) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n(0.0, 1.0);
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 R = euler_zyx_to_rotation(random_euler(rng, deg2rad(30.0)));
    const Vec3 p = random_vec(rng, -100, 100);
    std::vector<GpsFix> gps;
    std::vector<TimedPosition> vwo;
    for (int i = 0; i < 100; ++i) {
      const Vec3 q = i < 50 ? Vec3(2.0 * i, 0, 0) : Vec3(100, 2.0 * (i - 50), 0);
      vwo.push_back({1.0 * i, q});
      gps.push_back({1.0 * i, R * q + p + Vec3(n(rng), n(rng), n(rng)), Vec3::Ones()});
    }
    const ExtrinsicBlock out = initialize_extrinsics(gps, vwo, ExtrinsicMode::ThreeDoF);
    if (so3_log(out.R_EV() * R.transpose()).norm() < deg2rad(2.0)) ++good;
  }
  EXPECT_GE(good, 95);
}

TEST(InitializeExtrinsics, DegenerateInputsThrow) {
  std::vector<GpsFix> gps;
  std::vector<TimedPosition> vwo;
  for (int i = 0; i < 10; ++i) {
    vwo.push_back({1.0 * i, Vec3(i, 0, 0)});
    gps.push_back({1.0 * i, Vec3(0, i, 0), Vec3::Ones()});
  }
  EXPECT_THROW(initialize_extrinsics(gps, vwo, ExtrinsicMode::Yaw), DegenerateGeometry);
  // Timestamps too far apart to associate.
  for (auto& f : gps) f.t += 0.5;
  EXPECT_THROW(initialize_extrinsics(gps, vwo, ExtrinsicMode::Yaw), DegenerateGeometry);
}
