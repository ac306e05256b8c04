#include "gvwo/ekf.hpp"

#include <array>
#include <mutex>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/distributions/chi_squared.hpp>

#include "gvwo/errors.hpp"

namespace gvwo {

double chi2_quantile(int dof, double prob) {
  if (dof < 1) throw InvalidArgument("chi2_quantile: dof must be positive");
  constexpr int kTable = 512;
  if (prob == 0.95 && dof < kTable) {
    static const std::array<double, kTable> table = [] {
      std::array<double, kTable> t{};
      for (int i = 1; i < kTable; ++i) {
        t[i] = boost::math::quantile(boost::math::chi_squared(i), 0.95);
      }
      return t;
    }();
    return table[dof];
  }
  return boost::math::quantile(boost::math::chi_squared(dof), prob);
}

std::vector<Eigen::Index> support_columns(const Eigen::MatrixXd& H) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    if ((H.col(j).array() != 0.0).any()) cols.push_back(j);
  }
  return cols;
}

double mahalanobis2(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H, const Eigen::VectorXd& r,
                    const Eigen::MatrixXd& R) {
  const auto cols = support_columns(H);
  const Eigen::MatrixXd Hs = H(Eigen::all, cols);
  const Eigen::MatrixXd S = Hs * P(cols, cols) * Hs.transpose() + R;
  return r.dot(S.ldlt().solve(r));
}

EkfOutcome ekf_update(FilterState& s, const Eigen::MatrixXd& H, const Eigen::VectorXd& r,
                      const Eigen::MatrixXd& R, double gate_prob) {
  const Eigen::Index n = s.cov.rows();
  if (H.cols() != n || H.rows() != r.size() || R.rows() != r.size() || R.cols() != r.size()) {
    throw InvalidArgument("ekf_update: dimension mismatch");
  }
  EkfOutcome out;
  if (r.size() == 0) return out;

  const auto cols = support_columns(H);
  const Eigen::MatrixXd PHt = s.cov(Eigen::all, cols) * H(Eigen::all, cols).transpose();
  Eigen::MatrixXd S = H(Eigen::all, cols) * PHt(cols, Eigen::all) + R;
  S = 0.5 * (S + S.transpose()).eval();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  out.mahalanobis2 = r.dot(ldlt.solve(r));
  if (gate_prob > 0.0 && gate_prob < 1.0) {
    out.threshold = chi2_quantile(static_cast<int>(r.size()), gate_prob);
    if (!(out.mahalanobis2 <= out.threshold)) return out;
  }
  // K = P H^T S^-1, computed as (S^-1 H P)^T.
  const Eigen::MatrixXd Kt = ldlt.solve(PHt.transpose());
  const Eigen::VectorXd dx = Kt.transpose() * r;
  s.cov.noalias() -= Kt.transpose() * PHt.transpose();
  s = apply_correction(std::move(s), dx);
  enforce_symmetry_and_check(s);
  out.accepted = true;
  return out;
}

void compress_measurements(Eigen::MatrixXd& H, Eigen::VectorXd& r) {
  const auto cols = support_columns(H);
  const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
  if (H.rows() <= k) return;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(H(Eigen::all, cols));
  r.applyOnTheLeft(qr.householderQ().transpose());
  r.conservativeResize(k);
  const Eigen::MatrixXd Rk = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  H = Eigen::MatrixXd::Zero(k, H.cols());
  H(Eigen::all, cols) = Rk;
}

}  // namespace gvwo
