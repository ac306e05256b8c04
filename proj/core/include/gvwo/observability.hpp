#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gvwo/filter_state.hpp"
#include "gvwo/vision.hpp"

namespace gvwo {

// Observability of the reduced system with state
//   x = [q_VO (4, raw quaternion) | p_O (3) | p_f (3) | theta_EV (D) | p_V (3)]
// driven by omega_z through f1 = [1/2 Xi(q); 0] and v_x through
// f2 = [0; R(q)^T; 0], with measurements
//   h1 = ^C p_f (camera point), h2 = q^T q - 1, h3 = p_V + R_EV p_O (GPS, zero lever arm).
// R(q) uses its homogeneous quadratic form so that gradients with respect to
// the raw quaternion are well defined off the unit sphere.  For D = 3 the
// theta columns are the left-multiplicative rotation error of R_EV; for D = 1
// they are the active Euler angle.

struct ObservabilitySystem {
  Vec4 q_VO = Vec4(0, 0, 0, 1);
  Vec3 p_O_in_V = Vec3::Zero();
  Vec3 p_f_in_V = Vec3::Zero();
  ExtrinsicBlock ext;  // mode in {ThreeDoF, Yaw, Pitch, Roll}
  CameraExtrinsics cam;

  int D() const { return ext.rotation_dim(); }
  int dim() const { return 13 + D(); }
  void validate() const;
};

struct LabeledRange {
  std::string name;
  int offset = 0;
  int size = 0;
};

struct ObservabilityMatrix {
  Eigen::MatrixXd O;                 // 13 x (13 + D)
  std::vector<LabeledRange> rows;    // L0h1, L0h2, L0h3, L1f1h1, L1f2h3
  std::vector<LabeledRange> cols;    // q, p_O, p_f, theta, p_V

  const LabeledRange& row(const std::string& name) const;
  const LabeledRange& col(const std::string& name) const;
  Eigen::MatrixXd block(const std::string& row_name, const std::string& col_name) const;
};

/// Rotation R(q) in homogeneous quadratic form:
/// (q4^2 - |qv|^2) I - 2 q4 [qv]x + 2 qv qv^T.
Mat3 quadratic_rotation(const Vec4& q);
/// d(R(q) p)/dq, 3 x 4, for the quadratic form.
Eigen::Matrix<double, 3, 4> rotation_point_jacobian(const Vec4& q, const Vec3& p);

/// Stacked Lie derivatives at x (flat, same ordering as the columns).  For
/// D = 3, x's theta entries are a rotation error about sys.ext's R_EV.
Eigen::VectorXd lie_derivatives(const ObservabilitySystem& sys, const Eigen::VectorXd& x);
/// Flat state at the nominal point (theta entries zero for D = 3).
Eigen::VectorXd nominal_state(const ObservabilitySystem& sys);

ObservabilityMatrix lie_gradients_analytic(const ObservabilitySystem& sys);
/// Central differences of lie_derivatives with step eps.
ObservabilityMatrix lie_gradients_numeric(const ObservabilitySystem& sys, double eps = 1e-6);

/// Analytic gradients, cross-checked block by block against central
/// differences.  Throws InternalConsistency naming the first block whose
/// max-abs error exceeds tol * max(1, max-abs of the analytic block).
ObservabilityMatrix lie_gradients(const ObservabilitySystem& sys, double tol = 1e-5);

struct RankReport {
  Eigen::VectorXd singular_values;
  double threshold = 0.0;  // rel_threshold * sigma_max
  int rank = 0;
  int nullity = 0;
  Eigen::MatrixXd nullspace;  // orthonormal columns

  std::vector<LabeledRange> cols;
  std::vector<int> block_rank;  // rank of each column block on its own

  /// Rank of the theta columns after removing their component in the span of
  /// the position-type columns (p_O, p_f, p_V): the column reduction that
  /// leaves Y in the last row group.
  int theta_rank_vs_positions = 0;
  /// Rank of the theta columns after removing their component in the span of
  /// every other column, the quaternion columns included.
  int theta_rank_vs_all = 0;
  /// Same reduction for the p_V columns against every other column.
  int p_V_rank_vs_all = 0;
};

RankReport rank_report(const ObservabilityMatrix& O, double rel_threshold = 1e-8);

/// Random state with unit quaternion, positions in a 20 m box, extrinsic
/// Euler angles uniform (|pitch| < 80 deg); resampled while |Y| < 1e-6.
ObservabilitySystem random_generic_system(std::mt19937_64& rng, ExtrinsicMode mode);

/// H^T H / t^2 of the planar-motion example: [v]x^T [v]x with v = (vx, vy, 0).
Mat3 riccati_information_rate(double vx, double vy);

struct RiccatiTrace {
  std::vector<double> t;
  std::vector<Vec3> diagonal;
  std::vector<double> trace;
  double max_asymmetry = 0.0;  // max |P - P^T| seen over all steps
  int halvings = 0;            // extra step halvings used anywhere
};

/// RK4 integration of dP/dt = -P (t^2 M) P, M from riccati_information_rate,
/// sampled every `sample_every` steps (and at t_end).  A step that leaves P
/// outside the PSD tolerance is retried with dt halved, up to 10 times, then
/// IntegrationError.
RiccatiTrace riccati_simulate(double vx, double vy, const Mat3& P0, double t_end, double dt,
                              int sample_every = 1);

}  // namespace gvwo
