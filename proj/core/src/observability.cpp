#include "gvwo/observability.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gvwo/errors.hpp"

namespace gvwo {

namespace {

constexpr int kRows = 13;
const Vec3 kE1(1.0, 0.0, 0.0);
const Vec3 kE3(0.0, 0.0, 1.0);

struct Split {
  Vec4 q;
  Vec3 p_O, p_f, p_V;
  Eigen::VectorXd theta;
};

Split split(const ObservabilitySystem& sys, const Eigen::VectorXd& x) {
  const int D = sys.D();
  Split s;
  s.q = x.segment<4>(0);
  s.p_O = x.segment<3>(4);
  s.p_f = x.segment<3>(7);
  s.theta = x.segment(10, D);
  s.p_V = x.segment<3>(10 + D);
  return s;
}

ExtrinsicBlock extrinsic_at(const ObservabilitySystem& sys, const Eigen::VectorXd& theta) {
  ExtrinsicBlock e = sys.ext;
  switch (e.mode) {
    case ExtrinsicMode::ThreeDoF:
      e.theta_EV = rotation_to_euler_zyx(so3_exp(-Vec3(theta)) * sys.ext.R_EV());
      break;
    case ExtrinsicMode::Yaw: e.theta_EV.yaw = theta(0); break;
    case ExtrinsicMode::Pitch: e.theta_EV.pitch = theta(0); break;
    case ExtrinsicMode::Roll: e.theta_EV.roll = theta(0); break;
    case ExtrinsicMode::Fixed: break;
  }
  return e;
}

Mat3 extrinsic_rotation_at(const ObservabilitySystem& sys, const Eigen::VectorXd& theta) {
  if (sys.ext.mode == ExtrinsicMode::ThreeDoF) {
    // Avoid the Euler round trip so finite differences stay clean.
    return so3_exp(-Vec3(theta)) * sys.ext.R_EV();
  }
  return extrinsic_at(sys, theta).R_EV();
}

std::vector<LabeledRange> row_labels() {
  return {{"L0h1", 0, 3}, {"L0h2", 3, 1}, {"L0h3", 4, 3}, {"L1f1h1", 7, 3}, {"L1f2h3", 10, 3}};
}

std::vector<LabeledRange> col_labels(int D) {
  return {{"q", 0, 4}, {"p_O", 4, 3}, {"p_f", 7, 3}, {"theta", 10, D}, {"p_V", 10 + D, 3}};
}

Eigen::Matrix<double, 4, 4> xi_e3_jacobian() {
  // xi = Xi(q) e3 = [q4 e3 + qv x e3; -q3].
  Eigen::Matrix<double, 4, 4> J = Eigen::Matrix<double, 4, 4>::Zero();
  J.topLeftCorner<3, 3>() = -skew(kE3);
  J.topRightCorner<3, 1>() = kE3;
  J.bottomLeftCorner<1, 3>() = -kE3.transpose();
  return J;
}

}  // namespace

void ObservabilitySystem::validate() const {
  if (ext.mode == ExtrinsicMode::Fixed) {
    throw InvalidArgument("observability: extrinsic rotation must be estimated");
  }
  if (!q_VO.allFinite() || q_VO.norm() < 1e-12 || !p_O_in_V.allFinite() || !p_f_in_V.allFinite()) {
    throw InvalidArgument("observability: invalid state sample");
  }
  cam.validate();
}

const LabeledRange& ObservabilityMatrix::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw InvalidArgument("observability matrix: no row group " + name);
}

const LabeledRange& ObservabilityMatrix::col(const std::string& name) const {
  for (const auto& c : cols) {
    if (c.name == name) return c;
  }
  throw InvalidArgument("observability matrix: no column block " + name);
}

Eigen::MatrixXd ObservabilityMatrix::block(const std::string& row_name,
                                           const std::string& col_name) const {
  const auto& r = row(row_name);
  const auto& c = col(col_name);
  return O.block(r.offset, c.offset, r.size, c.size);
}

Mat3 quadratic_rotation(const Vec4& q) {
  const Vec3 v = q.head<3>();
  const double w = q(3);
  return (w * w - v.squaredNorm()) * Mat3::Identity() - 2.0 * w * skew(v) +
         2.0 * v * v.transpose();
}

Eigen::Matrix<double, 3, 4> rotation_point_jacobian(const Vec4& q, const Vec3& p) {
  const Vec3 v = q.head<3>();
  const double w = q(3);
  Eigen::Matrix<double, 3, 4> J;
  J.leftCols<3>() = -2.0 * p * v.transpose() + 2.0 * w * skew(p) +
                    2.0 * v.dot(p) * Mat3::Identity() + 2.0 * v * p.transpose();
  J.col(3) = 2.0 * w * p - 2.0 * v.cross(p);
  return J;
}

Eigen::VectorXd nominal_state(const ObservabilitySystem& sys) {
  const int D = sys.D();
  Eigen::VectorXd x(sys.dim());
  x.segment<4>(0) = sys.q_VO;
  x.segment<3>(4) = sys.p_O_in_V;
  x.segment<3>(7) = sys.p_f_in_V;
  switch (sys.ext.mode) {
    case ExtrinsicMode::ThreeDoF: x.segment<3>(10).setZero(); break;
    case ExtrinsicMode::Yaw: x(10) = sys.ext.theta_EV.yaw; break;
    case ExtrinsicMode::Pitch: x(10) = sys.ext.theta_EV.pitch; break;
    case ExtrinsicMode::Roll: x(10) = sys.ext.theta_EV.roll; break;
    case ExtrinsicMode::Fixed: break;
  }
  x.segment<3>(10 + D) = sys.ext.p_V_in_E;
  return x;
}

Eigen::VectorXd lie_derivatives(const ObservabilitySystem& sys, const Eigen::VectorXd& x) {
  if (x.size() != sys.dim()) throw InvalidArgument("lie_derivatives: state length mismatch");
  const Split s = split(sys, x);
  const Mat3 R = quadratic_rotation(s.q);
  const Mat3 R_EV = extrinsic_rotation_at(sys, s.theta);
  const Vec3 p = s.p_f - s.p_O;
  const Vec4 xi = xi_matrix(s.q) * kE3;

  Eigen::VectorXd L(kRows);
  L.segment<3>(0) = sys.cam.R_OC * R * p + sys.cam.p_O_in_C;
  L(3) = s.q.squaredNorm() - 1.0;
  L.segment<3>(4) = s.p_V + R_EV * s.p_O;
  L.segment<3>(7) = 0.5 * sys.cam.R_OC * rotation_point_jacobian(s.q, p) * xi;
  L.segment<3>(10) = R_EV * R.transpose() * kE1;
  return L;
}

ObservabilityMatrix lie_gradients_analytic(const ObservabilitySystem& sys) {
  sys.validate();
  const int D = sys.D();
  const Vec4 q = sys.q_VO;
  const Vec3 v = q.head<3>();
  const double w = q(3);
  const Mat3 R = quadratic_rotation(q);
  const Mat3 R_EV = sys.ext.R_EV();
  const Mat3& R_OC = sys.cam.R_OC;
  const Vec3 p = sys.p_f_in_V - sys.p_O_in_V;
  const Vec4 xi = xi_matrix(q) * kE3;
  const Vec3 xv = xi.head<3>();
  const double x4 = xi(3);
  const Eigen::Matrix<double, 3, 4> Jp = rotation_point_jacobian(q, p);

  ObservabilityMatrix M;
  M.rows = row_labels();
  M.cols = col_labels(D);
  M.O = Eigen::MatrixXd::Zero(kRows, sys.dim());
  const int cq = 0, cpo = 4, cpf = 7, cth = 10, cpv = 10 + D;

  // L0 h1
  M.O.block<3, 4>(0, cq) = R_OC * Jp;  // Psi
  M.O.block<3, 3>(0, cpo) = -R_OC * R;
  M.O.block<3, 3>(0, cpf) = R_OC * R;
  // L0 h2
  M.O.block<1, 4>(3, cq) = 2.0 * q.transpose();
  // L0 h3
  M.O.block<3, 3>(4, cpo) = R_EV;
  M.O.block(4, cth, 3, D) = sys.ext.rotation_jacobian(sys.p_O_in_V);  // H_theta
  M.O.block<3, 3>(4, cpv).setIdentity();

  // L1_f1 h1 = 1/2 R_OC J(q, p) xi(q)
  Eigen::Matrix<double, 3, 4> G;
  G.leftCols<3>() = -2.0 * p * xv.transpose() + 2.0 * xv * p.transpose() +
                    2.0 * p.dot(xv) * Mat3::Identity() + 2.0 * x4 * skew(p);
  G.col(3) = 2.0 * p.cross(xv) + 2.0 * x4 * p;
  G += Jp * xi_e3_jacobian();
  const Mat3 U_raw = (2.0 * w * x4 - 2.0 * v.dot(xv)) * Mat3::Identity() - 2.0 * w * skew(xv) +
                     2.0 * xv * v.transpose() + 2.0 * v * xv.transpose() - 2.0 * x4 * skew(v);
  const Mat3 Upsilon = 0.5 * R_OC * U_raw;
  M.O.block<3, 4>(7, cq) = 0.5 * R_OC * G;  // Gamma
  M.O.block<3, 3>(7, cpo) = -Upsilon;
  M.O.block<3, 3>(7, cpf) = Upsilon;

  // L1_f2 h3 = R_EV R(q)^T e1
  const Vec3 Rte1 = R.transpose() * kE1;
  Eigen::Matrix<double, 3, 4> dRte1;
  dRte1.leftCols<3>() = -2.0 * kE1 * v.transpose() - 2.0 * w * skew(kE1) +
                        2.0 * v(0) * Mat3::Identity() + 2.0 * v * kE1.transpose();
  dRte1.col(3) = 2.0 * w * kE1 + 2.0 * v.cross(kE1);
  M.O.block<3, 4>(10, cq) = R_EV * dRte1;                      // X
  M.O.block(10, cth, 3, D) = sys.ext.rotation_jacobian(Rte1);  // Y
  return M;
}

ObservabilityMatrix lie_gradients_numeric(const ObservabilitySystem& sys, double eps) {
  sys.validate();
  ObservabilityMatrix M;
  M.rows = row_labels();
  M.cols = col_labels(sys.D());
  const Eigen::VectorXd x0 = nominal_state(sys);
  M.O.resize(kRows, sys.dim());
  for (int j = 0; j < sys.dim(); ++j) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += eps;
    xm(j) -= eps;
    M.O.col(j) = (lie_derivatives(sys, xp) - lie_derivatives(sys, xm)) / (2.0 * eps);
  }
  return M;
}

ObservabilityMatrix lie_gradients(const ObservabilitySystem& sys, double tol) {
  ObservabilityMatrix A = lie_gradients_analytic(sys);
  const ObservabilityMatrix N = lie_gradients_numeric(sys);
  for (const auto& r : A.rows) {
    for (const auto& c : A.cols) {
      const Eigen::MatrixXd a = A.O.block(r.offset, c.offset, r.size, c.size);
      const Eigen::MatrixXd n = N.O.block(r.offset, c.offset, r.size, c.size);
      if (a.size() == 0) continue;
      const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
      const double err = (a - n).cwiseAbs().maxCoeff();
      if (!(err <= tol * scale)) {
        throw InternalConsistency("lie_gradients: block (" + r.name + ", " + c.name +
                                  ") disagrees with finite differences, error " +
                                  std::to_string(err));
      }
    }
  }
  return A;
}

namespace {

int rank_of(const Eigen::MatrixXd& A, double threshold) {
  if (A.size() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return static_cast<int>((svd.singularValues().array() > threshold).count());
}

// Rank of T after removing its component in range(B).
int rank_after_projection(const Eigen::MatrixXd& T, const Eigen::MatrixXd& B, double threshold) {
  if (T.cols() == 0) return 0;
  Eigen::MatrixXd Tp = T;
  if (B.cols() > 0) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU);
    const int r = static_cast<int>((svd.singularValues().array() > threshold).count());
    const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
    Tp -= U * (U.transpose() * T);
  }
  return rank_of(Tp, threshold);
}

Eigen::MatrixXd gather(const ObservabilityMatrix& O, const std::vector<std::string>& names) {
  int n = 0;
  for (const auto& name : names) n += O.col(name).size;
  Eigen::MatrixXd out(O.O.rows(), n);
  int k = 0;
  for (const auto& name : names) {
    const auto& c = O.col(name);
    out.middleCols(k, c.size) = O.O.middleCols(c.offset, c.size);
    k += c.size;
  }
  return out;
}

}  // namespace

RankReport rank_report(const ObservabilityMatrix& O, double rel_threshold) {
  RankReport rep;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(O.O, Eigen::ComputeFullV);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values.size() ? rep.singular_values(0) : 0.0;
  rep.threshold = rel_threshold * smax;
  rep.rank = static_cast<int>((rep.singular_values.array() > rep.threshold).count());
  rep.nullity = static_cast<int>(O.O.cols()) - rep.rank;
  rep.nullspace = svd.matrixV().rightCols(rep.nullity);

  rep.cols = O.cols;
  for (const auto& c : O.cols) {
    rep.block_rank.push_back(rank_of(O.O.middleCols(c.offset, c.size), rep.threshold));
  }
  const Eigen::MatrixXd theta = gather(O, {"theta"});
  rep.theta_rank_vs_positions =
      rank_after_projection(theta, gather(O, {"p_O", "p_f", "p_V"}), rep.threshold);
  rep.theta_rank_vs_all =
      rank_after_projection(theta, gather(O, {"q", "p_O", "p_f", "p_V"}), rep.threshold);
  rep.p_V_rank_vs_all = rank_after_projection(gather(O, {"p_V"}),
                                              gather(O, {"q", "p_O", "p_f", "theta"}),
                                              rep.threshold);
  return rep;
}

ObservabilitySystem random_generic_system(std::mt19937_64& rng, ExtrinsicMode mode) {
  if (mode == ExtrinsicMode::Fixed) {
    throw InvalidArgument("random_generic_system: extrinsic rotation must be estimated");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> tilt(-deg2rad(80.0), deg2rad(80.0));
  for (;;) {
    ObservabilitySystem sys;
    Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
    sys.q_VO = q.normalized();
    sys.p_O_in_V = Vec3(box(rng), box(rng), box(rng));
    sys.p_f_in_V = Vec3(box(rng), box(rng), box(rng));
    sys.ext.mode = mode;
    sys.ext.theta_EV = {angle(rng), tilt(rng), angle(rng)};
    sys.ext.p_V_in_E = Vec3(box(rng), box(rng), box(rng));
    sys.cam = CameraExtrinsics::forward_looking(Vec3(box(rng), box(rng), box(rng)) * 0.1);
    const Vec3 Rte1 = quadratic_rotation(sys.q_VO).transpose() * kE1;
    if (sys.ext.rotation_jacobian(Rte1).norm() >= 1e-6) return sys;
  }
}

Mat3 riccati_information_rate(double vx, double vy) {
  const Mat3 S = skew(Vec3(vx, vy, 0.0));
  return S.transpose() * S;
}

namespace {

Mat3 riccati_rhs(const Mat3& P, const Mat3& M, double t) { return -(P * M * P) * (t * t); }

Mat3 rk4_step(const Mat3& P, const Mat3& M, double t, double h) {
  const Mat3 k1 = riccati_rhs(P, M, t);
  const Mat3 k2 = riccati_rhs(P + 0.5 * h * k1, M, t + 0.5 * h);
  const Mat3 k3 = riccati_rhs(P + 0.5 * h * k2, M, t + 0.5 * h);
  const Mat3 k4 = riccati_rhs(P + h * k3, M, t + h);
  return P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

bool acceptable(const Mat3& P) {
  if (!P.allFinite()) return false;
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (P + P.transpose()));
  return eig.eigenvalues()(0) >= -1e-9 * std::max(P.trace(), 0.0);
}

}  // namespace

RiccatiTrace riccati_simulate(double vx, double vy, const Mat3& P0, double t_end, double dt,
                              int sample_every) {
  if (!(dt > 0.0) || !(t_end >= 0.0) || sample_every < 1) {
    throw InvalidArgument("riccati_simulate: need dt > 0, t_end >= 0, sample_every >= 1");
  }
  if ((P0 - P0.transpose()).cwiseAbs().maxCoeff() > 1e-12 || !acceptable(P0)) {
    throw InvalidArgument("riccati_simulate: P0 must be symmetric PSD");
  }
  const Mat3 M = riccati_information_rate(vx, vy);
  RiccatiTrace out;
  auto record = [&](double t, const Mat3& P) {
    out.t.push_back(t);
    out.diagonal.push_back(P.diagonal());
    out.trace.push_back(P.trace());
  };

  Mat3 P = P0;
  record(0.0, P);
  const long steps = std::lround(std::ceil(t_end / dt - 1e-9));
  for (long k = 0; k < steps; ++k) {
    const double t0 = k * dt;
    const double h = std::min(dt, t_end - t0);
    Mat3 next;
    bool ok = false;
    for (int halving = 0; halving <= 10 && !ok; ++halving) {
      const int sub = 1 << halving;
      next = P;
      for (int i = 0; i < sub; ++i) next = rk4_step(next, M, t0 + i * h / sub, h / sub);
      ok = acceptable(next);
      if (!ok) ++out.halvings;
    }
    if (!ok) throw IntegrationError("riccati_simulate: P left the PSD cone at t=" + std::to_string(t0));
    P = next;
    out.max_asymmetry = std::max(out.max_asymmetry, (P - P.transpose()).cwiseAbs().maxCoeff());
    if ((k + 1) % sample_every == 0 || k + 1 == steps) record(t0 + h, P);
  }
  return out;
}

}  // namespace gvwo
