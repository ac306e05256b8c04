#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gvwo/geometry.hpp"

namespace gvwo {

/// Rotation parameterization of ^E_V R.  In the single-angle modes the two
/// remaining Euler angles are constants.
enum class ExtrinsicMode { ThreeDoF, Yaw, Pitch, Roll, Fixed };

std::string_view to_string(ExtrinsicMode m);
ExtrinsicMode extrinsic_mode_from_string(std::string_view s);

struct ExtrinsicBlock {
  ExtrinsicMode mode = ExtrinsicMode::Fixed;
  EulerZYX theta_EV;         // ^E_V R = Rz(yaw) Ry(pitch) Rx(roll)
  Vec3 p_V_in_E = Vec3::Zero();
  Vec3 p_G_in_O = Vec3::Zero();  // GPS antenna lever arm, known
  bool estimate_translation = false;

  int rotation_dim() const;
  int translation_dim() const { return estimate_translation ? 3 : 0; }
  Mat3 R_EV() const { return euler_zyx_to_rotation(theta_EV); }

  /// d(^E_V R p) / d(rotation error), 3 x rotation_dim().  For ThreeDoF the
  /// error is left-multiplicative, for the single-angle modes it is additive
  /// on the active Euler angle.
  Eigen::MatrixXd rotation_jacobian(const Vec3& p_in_V) const;
};

struct Landmark {
  std::int64_t id = 0;
  Vec3 p_in_V = Vec3::Zero();
};

struct NavState {
  UnitQuaternion q_VO;  // ^O_V q
  Vec3 p_O_in_V = Vec3::Zero();
  std::vector<Landmark> features;
};

struct PoseClone {
  UnitQuaternion q_VO;
  Vec3 p_O_in_V = Vec3::Zero();
  double t = 0.0;
};

struct Diagnostics {
  int psd_violations = 0;
  int gps_accepted = 0;
  int gps_rejected = 0;
  int gps_dropped = 0;
  int tracks_used = 0;
  int tracks_gated = 0;
  int tracks_degenerate = 0;
  int visual_updates_empty = 0;
};

/// Error-state offsets.  Order: [dtheta_VO(3) dp_O(3) dp_f(3F) clones(6N)
/// dtheta_EV(D) dp_V(0|3)]; each clone is [dtheta(3) dp(3)].  This is the only
/// place offsets are computed.
struct ErrorLayout {
  int num_features = 0;
  int num_clones = 0;
  int rot_dim = 0;
  int trans_dim = 0;

  static constexpr int nav_theta() { return 0; }
  static constexpr int nav_p() { return 3; }
  static constexpr int nav_dim() { return 6; }
  int feature(int i) const { return 6 + 3 * i; }
  int clones_begin() const { return 6 + 3 * num_features; }
  int clone(int i) const { return clones_begin() + 6 * i; }
  int ext_theta() const { return clones_begin() + 6 * num_clones; }
  int ext_p() const { return ext_theta() + rot_dim; }
  int dim() const { return ext_p() + trans_dim; }
};

struct FilterState {
  double t = 0.0;
  NavState nav;
  std::vector<PoseClone> clones;  // oldest first
  ExtrinsicBlock extrinsic;
  Eigen::MatrixXd cov;
  int max_clones = 11;
  Diagnostics diag;

  ErrorLayout layout() const;
  /// Index of the feature with this id, or -1.
  int feature_index(std::int64_t id) const;
  /// Index of the clone at exactly this timestamp (|dt| < 1e-9), or -1.
  int clone_index(double t) const;
};

/// State with the given nav/extrinsic values and a block-diagonal covariance:
/// nav pose 6x6, extrinsic rotation D x D, translation 3x3 (if estimated).
FilterState make_filter_state(double t, const NavState& nav, const ExtrinsicBlock& ext,
                              const Eigen::Matrix<double, 6, 6>& nav_cov,
                              const Eigen::MatrixXd& ext_rot_cov,
                              const Mat3& ext_trans_cov = Mat3::Zero(), int max_clones = 11);

/// Appends a clone of the current pose labelled `t`; the covariance is
/// J P J^T with J the cloning Jacobian (copy of the nav pose rows).
FilterState augment_clone(FilterState s, double t);

FilterState marginalize_oldest_clone(FilterState s);

/// Boxplus: multiplicative attitude blocks, additive vector blocks; the
/// single-angle extrinsic modes take a scalar.
FilterState apply_correction(FilterState s, const Eigen::VectorXd& dx);

/// Adds a landmark with the given cross-covariance row block (3 x n) and
/// marginal covariance; the landmark block is inserted after existing ones.
FilterState add_feature(FilterState s, const Landmark& f, const Eigen::MatrixXd& cross_cov,
                        const Mat3& f_cov);
FilterState remove_feature(FilterState s, std::int64_t id);

/// Boxminus of two states with the same layout: a [-] b.
Eigen::VectorXd state_difference(const FilterState& a, const FilterState& b);

/// Symmetrizes cov and raises diag.psd_violations when the smallest
/// eigenvalue is below -1e-9 trace.  Nothing is clamped.
void enforce_symmetry_and_check(FilterState& s);
bool covariance_is_psd(const Eigen::MatrixXd& P, double rel_tol = 1e-9);

// Line-oriented text record of a state snapshot:
//   t,qx,qy,qz,qw,px,py,pz,yaw,pitch,roll,pVx,pVy,pVz,n,d_0,...,d_{n-1}
// where d_i are the covariance diagonal entries.
struct StateRecord {
  double t = 0.0;
  Vec4 q_VO = Vec4(0, 0, 0, 1);
  Vec3 p_O_in_V = Vec3::Zero();
  EulerZYX theta_EV;
  Vec3 p_V_in_E = Vec3::Zero();
  Eigen::VectorXd cov_diagonal;
};

std::string state_record_header();
std::string to_record(const FilterState& s);
StateRecord parse_record(std::string_view line);

}  // namespace gvwo
