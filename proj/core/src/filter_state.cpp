#include "gvwo/filter_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Cholesky>

#include "gvwo/errors.hpp"

namespace gvwo {

std::string_view to_string(ExtrinsicMode m) {
  switch (m) {
    case ExtrinsicMode::ThreeDoF: return "3dof";
    case ExtrinsicMode::Yaw: return "yaw";
    case ExtrinsicMode::Pitch: return "pitch";
    case ExtrinsicMode::Roll: return "roll";
    case ExtrinsicMode::Fixed: return "fixed";
  }
  return "fixed";
}

ExtrinsicMode extrinsic_mode_from_string(std::string_view s) {
  if (s == "3dof") return ExtrinsicMode::ThreeDoF;
  if (s == "yaw") return ExtrinsicMode::Yaw;
  if (s == "pitch") return ExtrinsicMode::Pitch;
  if (s == "roll") return ExtrinsicMode::Roll;
  if (s == "fixed") return ExtrinsicMode::Fixed;
  throw InvalidArgument("unknown extrinsic mode: " + std::string(s));
}

int ExtrinsicBlock::rotation_dim() const {
  switch (mode) {
    case ExtrinsicMode::ThreeDoF: return 3;
    case ExtrinsicMode::Fixed: return 0;
    default: return 1;
  }
}

Eigen::MatrixXd ExtrinsicBlock::rotation_jacobian(const Vec3& p) const {
  const auto& e = theta_EV;
  switch (mode) {
    case ExtrinsicMode::ThreeDoF:
      return skew(R_EV() * p);
    case ExtrinsicMode::Yaw:
      return rot_z_derivative(e.yaw) * rot_y(e.pitch) * rot_x(e.roll) * p;
    case ExtrinsicMode::Pitch:
      return rot_z(e.yaw) * rot_y_derivative(e.pitch) * rot_x(e.roll) * p;
    case ExtrinsicMode::Roll:
      return rot_z(e.yaw) * rot_y(e.pitch) * rot_x_derivative(e.roll) * p;
    case ExtrinsicMode::Fixed:
      break;
  }
  return Eigen::MatrixXd(3, 0);
}

ErrorLayout FilterState::layout() const {
  ErrorLayout l;
  l.num_features = static_cast<int>(nav.features.size());
  l.num_clones = static_cast<int>(clones.size());
  l.rot_dim = extrinsic.rotation_dim();
  l.trans_dim = extrinsic.translation_dim();
  return l;
}

int FilterState::feature_index(std::int64_t id) const {
  for (std::size_t i = 0; i < nav.features.size(); ++i) {
    if (nav.features[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int FilterState::clone_index(double tc) const {
  for (std::size_t i = 0; i < clones.size(); ++i) {
    if (std::abs(clones[i].t - tc) < 1e-9) return static_cast<int>(i);
  }
  return -1;
}

FilterState make_filter_state(double t, const NavState& nav, const ExtrinsicBlock& ext,
                              const Eigen::Matrix<double, 6, 6>& nav_cov,
                              const Eigen::MatrixXd& ext_rot_cov, const Mat3& ext_trans_cov,
                              int max_clones) {
  if (max_clones < 1) throw InvalidArgument("max_clones must be positive");
  FilterState s;
  s.t = t;
  s.nav = nav;
  s.extrinsic = ext;
  s.max_clones = max_clones;
  const ErrorLayout l = s.layout();
  if (ext_rot_cov.rows() != l.rot_dim || ext_rot_cov.cols() != l.rot_dim) {
    throw InvalidArgument("extrinsic rotation covariance does not match the mode");
  }
  s.cov = Eigen::MatrixXd::Zero(l.dim(), l.dim());
  s.cov.topLeftCorner<6, 6>() = nav_cov;
  if (l.rot_dim > 0) s.cov.block(l.ext_theta(), l.ext_theta(), l.rot_dim, l.rot_dim) = ext_rot_cov;
  if (l.trans_dim > 0) s.cov.block(l.ext_p(), l.ext_p(), 3, 3) = ext_trans_cov;
  return s;
}

namespace {

// P'(i, j) = P(src[i], src[j]); this is J P J^T for a selection/duplication J.
Eigen::MatrixXd reindex(const Eigen::MatrixXd& P, const std::vector<int>& src) {
  const int n = static_cast<int>(src.size());
  Eigen::MatrixXd out(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) out(i, j) = P(src[i], src[j]);
  }
  return out;
}

}  // namespace

FilterState augment_clone(FilterState s, double t) {
  if (static_cast<int>(s.clones.size()) >= s.max_clones) {
    throw InvalidState("augment_clone: clone window is full, marginalize first");
  }
  if (!s.clones.empty() && t <= s.clones.back().t) {
    throw InvalidArgument("augment_clone: clone timestamp must be strictly increasing");
  }
  const ErrorLayout l = s.layout();
  const int n = l.dim();
  const int ins = l.ext_theta();
  std::vector<int> src;
  src.reserve(n + 6);
  for (int i = 0; i < ins; ++i) src.push_back(i);
  for (int i = 0; i < 6; ++i) src.push_back(i);
  for (int i = ins; i < n; ++i) src.push_back(i);
  s.cov = reindex(s.cov, src);
  s.clones.push_back({s.nav.q_VO, s.nav.p_O_in_V, t});
  return s;
}

FilterState marginalize_oldest_clone(FilterState s) {
  if (s.clones.empty()) throw InvalidState("marginalize_oldest_clone: empty clone window");
  const ErrorLayout l = s.layout();
  const int begin = l.clone(0);
  std::vector<int> src;
  for (int i = 0; i < l.dim(); ++i) {
    if (i < begin || i >= begin + 6) src.push_back(i);
  }
  s.cov = reindex(s.cov, src);
  s.clones.erase(s.clones.begin());
  return s;
}

FilterState add_feature(FilterState s, const Landmark& f, const Eigen::MatrixXd& cross_cov,
                        const Mat3& f_cov) {
  if (s.feature_index(f.id) >= 0) throw InvalidArgument("add_feature: duplicate feature id");
  const ErrorLayout l = s.layout();
  const int n = l.dim();
  if (cross_cov.rows() != 3 || cross_cov.cols() != n) {
    throw InvalidArgument("add_feature: cross covariance has the wrong shape");
  }
  const int ins = l.clones_begin();
  Eigen::MatrixXd P(n + 3, n + 3);
  auto map_old = [ins](int i) { return i < ins ? i : i + 3; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) P(map_old(i), map_old(j)) = s.cov(i, j);
  }
  for (int j = 0; j < n; ++j) {
    P.block<3, 1>(ins, map_old(j)) = cross_cov.col(j);
    P.block<1, 3>(map_old(j), ins) = cross_cov.col(j).transpose();
  }
  P.block<3, 3>(ins, ins) = 0.5 * (f_cov + f_cov.transpose());
  s.cov = std::move(P);
  s.nav.features.push_back(f);
  return s;
}

FilterState remove_feature(FilterState s, std::int64_t id) {
  const int k = s.feature_index(id);
  if (k < 0) throw InvalidArgument("remove_feature: unknown feature id");
  const ErrorLayout l = s.layout();
  const int begin = l.feature(k);
  std::vector<int> src;
  for (int i = 0; i < l.dim(); ++i) {
    if (i < begin || i >= begin + 3) src.push_back(i);
  }
  s.cov = reindex(s.cov, src);
  s.nav.features.erase(s.nav.features.begin() + k);
  return s;
}

FilterState apply_correction(FilterState s, const Eigen::VectorXd& dx) {
  const ErrorLayout l = s.layout();
  if (dx.size() != l.dim()) throw InvalidArgument("apply_correction: length mismatch");
  if (!dx.allFinite()) throw InvalidArgument("apply_correction: non-finite correction");

  s.nav.q_VO = UnitQuaternion::exp(dx.segment<3>(ErrorLayout::nav_theta())) * s.nav.q_VO;
  s.nav.p_O_in_V += dx.segment<3>(ErrorLayout::nav_p());
  for (int i = 0; i < l.num_features; ++i) s.nav.features[i].p_in_V += dx.segment<3>(l.feature(i));
  for (int i = 0; i < l.num_clones; ++i) {
    auto& c = s.clones[i];
    c.q_VO = UnitQuaternion::exp(dx.segment<3>(l.clone(i))) * c.q_VO;
    c.p_O_in_V += dx.segment<3>(l.clone(i) + 3);
  }

  auto& ext = s.extrinsic;
  switch (ext.mode) {
    case ExtrinsicMode::ThreeDoF: {
      const Mat3 R = so3_exp(-dx.segment<3>(l.ext_theta())) * ext.R_EV();
      ext.theta_EV = rotation_to_euler_zyx(R);
      break;
    }
    case ExtrinsicMode::Yaw:
      ext.theta_EV.yaw = wrap_angle(ext.theta_EV.yaw + dx(l.ext_theta()));
      break;
    case ExtrinsicMode::Pitch:
      ext.theta_EV.pitch = wrap_angle(ext.theta_EV.pitch + dx(l.ext_theta()));
      break;
    case ExtrinsicMode::Roll:
      ext.theta_EV.roll = wrap_angle(ext.theta_EV.roll + dx(l.ext_theta()));
      break;
    case ExtrinsicMode::Fixed:
      break;
  }
  if (l.trans_dim > 0) ext.p_V_in_E += dx.segment<3>(l.ext_p());
  return s;
}

Eigen::VectorXd state_difference(const FilterState& a, const FilterState& b) {
  const ErrorLayout la = a.layout();
  const ErrorLayout lb = b.layout();
  if (la.dim() != lb.dim() || la.num_clones != lb.num_clones ||
      la.num_features != lb.num_features || a.extrinsic.mode != b.extrinsic.mode) {
    throw InvalidArgument("state_difference: layouts differ");
  }
  auto att = [](const UnitQuaternion& qa, const UnitQuaternion& qb) -> Vec3 {
    return -so3_log(qa.to_rotation() * qb.to_rotation().transpose());
  };
  Eigen::VectorXd d(la.dim());
  d.segment<3>(ErrorLayout::nav_theta()) = att(a.nav.q_VO, b.nav.q_VO);
  d.segment<3>(ErrorLayout::nav_p()) = a.nav.p_O_in_V - b.nav.p_O_in_V;
  for (int i = 0; i < la.num_features; ++i) {
    d.segment<3>(la.feature(i)) = a.nav.features[i].p_in_V - b.nav.features[i].p_in_V;
  }
  for (int i = 0; i < la.num_clones; ++i) {
    d.segment<3>(la.clone(i)) = att(a.clones[i].q_VO, b.clones[i].q_VO);
    d.segment<3>(la.clone(i) + 3) = a.clones[i].p_O_in_V - b.clones[i].p_O_in_V;
  }
  const auto& ea = a.extrinsic.theta_EV;
  const auto& eb = b.extrinsic.theta_EV;
  switch (a.extrinsic.mode) {
    case ExtrinsicMode::ThreeDoF:
      d.segment<3>(la.ext_theta()) = -so3_log(a.extrinsic.R_EV() * b.extrinsic.R_EV().transpose());
      break;
    case ExtrinsicMode::Yaw: d(la.ext_theta()) = wrap_angle(ea.yaw - eb.yaw); break;
    case ExtrinsicMode::Pitch: d(la.ext_theta()) = wrap_angle(ea.pitch - eb.pitch); break;
    case ExtrinsicMode::Roll: d(la.ext_theta()) = wrap_angle(ea.roll - eb.roll); break;
    case ExtrinsicMode::Fixed: break;
  }
  if (la.trans_dim > 0) d.segment<3>(la.ext_p()) = a.extrinsic.p_V_in_E - b.extrinsic.p_V_in_E;
  return d;
}

bool covariance_is_psd(const Eigen::MatrixXd& P, double rel_tol) {
  if (P.size() == 0) return true;
  if (!P.allFinite()) return false;
  const double shift = rel_tol * std::max(P.trace(), 0.0) + 1e-300;
  Eigen::MatrixXd shifted = P;
  shifted.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  return llt.info() == Eigen::Success;
}

void enforce_symmetry_and_check(FilterState& s) {
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  if (!covariance_is_psd(s.cov)) ++s.diag.psd_violations;
}

std::string state_record_header() {
  return "t,qx,qy,qz,qw,px,py,pz,yaw,pitch,roll,pVx,pVy,pVz,n,cov_diag...";
}

std::string to_record(const FilterState& s) {
  std::string out;
  char buf[32];
  auto put = [&](double v) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    if (!out.empty()) out.push_back(',');
    out.append(buf, static_cast<std::size_t>(len));
  };
  put(s.t);
  for (int i = 0; i < 4; ++i) put(s.nav.q_VO.coeffs()(i));
  for (int i = 0; i < 3; ++i) put(s.nav.p_O_in_V(i));
  put(s.extrinsic.theta_EV.yaw);
  put(s.extrinsic.theta_EV.pitch);
  put(s.extrinsic.theta_EV.roll);
  for (int i = 0; i < 3; ++i) put(s.extrinsic.p_V_in_E(i));
  out += ',' + std::to_string(s.cov.rows());
  for (Eigen::Index i = 0; i < s.cov.rows(); ++i) put(s.cov(i, i));
  return out;
}

StateRecord parse_record(std::string_view line) {
  std::vector<double> v;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t end = std::min(line.find(',', pos), line.size());
    const std::string field(line.substr(pos, end - pos));
    try {
      std::size_t used = 0;
      v.push_back(std::stod(field, &used));
      if (used != field.size()) throw InvalidArgument("state record: trailing characters");
    } catch (const std::logic_error&) {
      throw InvalidArgument("state record: bad field '" + field + "'");
    }
    pos = end + 1;
  }
  if (v.size() < 15) throw InvalidArgument("state record: too few fields");
  const auto n = static_cast<std::size_t>(v[14]);
  if (v.size() != 15 + n) throw InvalidArgument("state record: diagonal length mismatch");
  StateRecord r;
  r.t = v[0];
  r.q_VO = Vec4(v[1], v[2], v[3], v[4]);
  r.p_O_in_V = Vec3(v[5], v[6], v[7]);
  r.theta_EV = {v[8], v[9], v[10]};
  r.p_V_in_E = Vec3(v[11], v[12], v[13]);
  r.cov_diagonal = Eigen::Map<const Eigen::VectorXd>(v.data() + 15, static_cast<Eigen::Index>(n));
  return r;
}

}  // namespace gvwo
