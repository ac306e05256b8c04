#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "gvwo/errors.hpp"
#include "gvwo/observability.hpp"
#include "test_support.hpp"

using namespace gvwo;
using gvwo::testing::random_quaternion;
using gvwo::testing::random_vec;
using gvwo::testing::relative_error;

namespace {

ObservabilitySystem identity_system(ExtrinsicMode mode) {
  ObservabilitySystem sys;
  sys.ext.mode = mode;
  sys.p_f_in_V = Vec3(0, 0, 5);
  return sys;
}

// Closed form for P(0) = I: P^-1 = I + M t^3 / 3.
Mat3 riccati_exact(const Mat3& M, double t) {
  return (Mat3::Identity() + M * t * t * t / 3.0).inverse();
}

}  // namespace

TEST(LieGradients, LayoutIsThirteenRowsByThirteenPlusD) {
  for (auto mode : {ExtrinsicMode::ThreeDoF, ExtrinsicMode::Yaw}) {
    const ObservabilityMatrix O = lie_gradients(identity_system(mode));
    const int D = mode == ExtrinsicMode::ThreeDoF ? 3 : 1;
    EXPECT_EQ(O.O.rows(), 13);
    EXPECT_EQ(O.O.cols(), 13 + D);
    EXPECT_EQ(O.col("theta").size, D);
    EXPECT_EQ(O.row("L1f2h3").offset, 10);
  }
}

TEST(LieGradients, ThreeDofYAtIdentity) {
  const ObservabilityMatrix O = lie_gradients(identity_system(ExtrinsicMode::ThreeDoF));
  EXPECT_LT((O.block("L1f2h3", "theta") - skew(Vec3(1, 0, 0))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LieGradients, YawYAtZeroAngles) {
  const ObservabilityMatrix O = lie_gradients(identity_system(ExtrinsicMode::Yaw));
  EXPECT_LT((O.block("L1f2h3", "theta") - Eigen::Vector3d(0, 1, 0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LieGradients, AnalyticMatchesNumericOnRandomStates) {
  std::mt19937_64 rng(71);
  for (auto mode : {ExtrinsicMode::ThreeDoF, ExtrinsicMode::Yaw, ExtrinsicMode::Pitch,
                    ExtrinsicMode::Roll}) {
    for (int i = 0; i < 100; ++i) {
      const ObservabilitySystem sys = random_generic_system(rng, mode);
      const ObservabilityMatrix a = lie_gradients_analytic(sys);
      const ObservabilityMatrix n = lie_gradients_numeric(sys);
      for (const auto& r : a.rows) {
        for (const auto& c : a.cols) {
          EXPECT_LT(relative_error(a.block(r.name, c.name), n.block(r.name, c.name)), 1e-5)
              << to_string(mode) << " " << r.name << "/" << c.name;
        }
      }
      EXPECT_NO_THROW(lie_gradients(sys));
    }
  }
}

TEST(LieGradients, CrossCheckFailureNamesTheBlock) {
  // An impossibly tight tolerance trips the cross-check on round-off.
  std::mt19937_64 rng(72);
  const ObservabilitySystem sys = random_generic_system(rng, ExtrinsicMode::ThreeDoF);
  try {
    lie_gradients(sys, 1e-300);
    FAIL() << "expected InternalConsistency";
  } catch (const InternalConsistency& e) {
    EXPECT_NE(std::string(e.what()).find("(L0h1, q)"), std::string::npos) << e.what();
  }
}

TEST(QuadraticRotation, MatchesUnitQuaternionOnSphere) {
  std::mt19937_64 rng(73);
  for (int i = 0; i < 50; ++i) {
    const UnitQuaternion q = random_quaternion(rng);
    EXPECT_LT((quadratic_rotation(q.coeffs()) - q.to_rotation()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RankReport, ThreeDofThetaBlockIsRankDeficient) {
  std::mt19937_64 rng(74);
  for (int i = 0; i < 100; ++i) {
    const RankReport r = rank_report(lie_gradients(random_generic_system(rng, ExtrinsicMode::ThreeDoF)));
    EXPECT_LE(r.theta_rank_vs_positions, 2);
    EXPECT_GT(r.nullity, 0);
    EXPECT_EQ(r.rank + r.nullity, 16);
    EXPECT_EQ(r.nullspace.cols(), r.nullity);
  }
}

TEST(RankReport, YawThetaBlockHasFullRank) {
  std::mt19937_64 rng(75);
  for (auto mode : {ExtrinsicMode::Yaw, ExtrinsicMode::Pitch, ExtrinsicMode::Roll}) {
    for (int i = 0; i < 100; ++i) {
      const RankReport r = rank_report(lie_gradients(random_generic_system(rng, mode)));
      EXPECT_EQ(r.theta_rank_vs_positions, 1) << to_string(mode);
      EXPECT_EQ(r.rank + r.nullity, 14);
    }
  }
}

TEST(RankReport, NullspaceIsAnnihilatedAndOrthonormal) {
  std::mt19937_64 rng(76);
  for (auto mode : {ExtrinsicMode::ThreeDoF, ExtrinsicMode::Yaw}) {
    const ObservabilityMatrix O = lie_gradients(random_generic_system(rng, mode));
    const RankReport r = rank_report(O);
    EXPECT_LT((O.O * r.nullspace).cwiseAbs().maxCoeff(), 1e-8 * r.singular_values(0));
    EXPECT_LT((r.nullspace.transpose() * r.nullspace -
               Eigen::MatrixXd::Identity(r.nullity, r.nullity))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(O.O);
    lu.setThreshold(1e-8);
    EXPECT_EQ(r.rank, lu.rank());
  }
}

TEST(Riccati, InformationRateForThreeFour) {
  Mat3 M;
  M << 16, -12, 0, -12, 9, 0, 0, 0, 25;
  EXPECT_LT((riccati_information_rate(3, 4) - M).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Riccati, ZeroVelocityKeepsCovariance) {
  Mat3 P0;
  P0 << 2, 0.5, 0, 0.5, 1, 0.1, 0, 0.1, 3;
  const RiccatiTrace tr = riccati_simulate(0, 0, P0, 5.0, 0.01, 50);
  for (const auto& d : tr.diagonal) EXPECT_EQ(d, P0.diagonal());
}

TEST(Riccati, Rk4MatchesClosedForm) {
  const Mat3 M = riccati_information_rate(3, 4);
  const RiccatiTrace tr = riccati_simulate(3, 4, Mat3::Identity(), 8.0, 1e-3, 500);
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    EXPECT_LT((tr.diagonal[k] - riccati_exact(M, tr.t[k]).diagonal()).cwiseAbs().maxCoeff(), 1e-8)
        << "t=" << tr.t[k];
  }
}

TEST(Riccati, SymmetricAndMonotone) {
  const RiccatiTrace tr = riccati_simulate(3, 4, Mat3::Identity(), 10.0, 1e-3);
  EXPECT_LT(tr.max_asymmetry, 1e-10);
  for (std::size_t k = 1; k < tr.t.size(); ++k) {
    for (int i = 0; i < 3; ++i) EXPECT_LE(tr.diagonal[k](i), tr.diagonal[k - 1](i));
  }
}

TEST(Riccati, FrozenCollapseTimeAndPlanarLimits) {
  // Frozen from the closed form: P33 = 1 / (1 + 25 t^3 / 3) drops below 1e-3
  // at t = (3 * 999 / 25)^(1/3) = 4.93078...; the planar block tends to
  // I - u u^T with u = (4, -3) / 5, i.e. diagonal (0.36, 0.64).
  const double t_star = std::cbrt(3.0 * 999.0 / 25.0);
  EXPECT_NEAR(t_star, 4.93078, 1e-5);
  const RiccatiTrace tr = riccati_simulate(3, 4, Mat3::Identity(), 40.0, 1e-3);
  double first = -1;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    if (tr.diagonal[k](2) < 1e-3) {
      first = tr.t[k];
      break;
    }
  }
  EXPECT_NEAR(first, t_star, 2e-3);
  EXPECT_NEAR(tr.diagonal.back()(0), 0.36, 1e-3);
  EXPECT_NEAR(tr.diagonal.back()(1), 0.64, 1e-3);
}

TEST(Riccati, BadArgumentsRejected) {
  EXPECT_THROW(riccati_simulate(3, 4, Mat3::Identity(), 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(riccati_simulate(3, 4, Mat3::Identity(), -1.0, 0.01), InvalidArgument);
}
