#pragma once

#include <vector>

#include <Eigen/Core>

#include "gvwo/filter_state.hpp"

namespace gvwo {

/// Chi-square quantile, cached for small dof.
double chi2_quantile(int dof, double prob = 0.95);

struct EkfOutcome {
  bool accepted = false;
  double mahalanobis2 = 0.0;
  double threshold = 0.0;
};

/// Indices of the columns of H that hold a nonzero entry.
std::vector<Eigen::Index> support_columns(const Eigen::MatrixXd& H);

/// r^T (H P H^T + R)^-1 r, evaluated on the columns H touches.
double mahalanobis2(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H, const Eigen::VectorXd& r,
                    const Eigen::MatrixXd& R);

/// EKF update of the full error state with residual r = z - h(x_hat).  When
/// `gate_prob` is in (0, 1) the update is skipped (state untouched) if the
/// Mahalanobis distance exceeds the chi-square quantile with dim(r) dof.
EkfOutcome ekf_update(FilterState& s, const Eigen::MatrixXd& H, const Eigen::VectorXd& r,
                      const Eigen::MatrixXd& R, double gate_prob = 0.95);

/// Replaces (H, r) by an equivalent system with at most as many rows as H has
/// nonzero columns, via QR; R must be sigma^2 I for this to be exact.
void compress_measurements(Eigen::MatrixXd& H, Eigen::VectorXd& r);

}  // namespace gvwo
