#include "gvwo/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gvwo/alignment.hpp"
#include "gvwo/errors.hpp"

namespace gvwo {

Alignment alignment_from_string(std::string_view s) {
  if (s == "none") return Alignment::None;
  if (s == "se3") return Alignment::SE3;
  throw InvalidArgument("unknown alignment: " + std::string(s));
}

std::vector<std::pair<Vec3, Vec3>> associate(const std::vector<TimedPosition>& est,
                                             const std::vector<TimedPosition>& truth,
                                             double max_dt) {
  std::vector<std::pair<Vec3, Vec3>> out;
  if (truth.empty()) return out;
  for (const auto& e : est) {
    auto it = std::lower_bound(truth.begin(), truth.end(), e.t,
                               [](const TimedPosition& a, double t) { return a.t < t; });
    const TimedPosition* best = nullptr;
    if (it != truth.end()) best = &*it;
    if (it != truth.begin()) {
      const TimedPosition* prev = &*std::prev(it);
      if (!best || e.t - prev->t <= best->t - e.t) best = prev;
    }
    if (best && std::abs(best->t - e.t) <= max_dt) out.emplace_back(e.p, best->p);
  }
  return out;
}

double compute_ate(const std::vector<TimedPosition>& est, const std::vector<TimedPosition>& truth,
                   Alignment alignment, double max_dt) {
  const auto pairs = associate(est, truth, max_dt);
  if (pairs.size() < 3) throw InvalidArgument("compute_ate: fewer than 3 associated poses");
  RigidTransform T;
  if (alignment == Alignment::SE3) {
    std::vector<Vec3> src, dst;
    for (const auto& [e, g] : pairs) {
      src.push_back(e);
      dst.push_back(g);
    }
    T = align_rigid(src, dst, true);
  }
  double sum = 0.0;
  for (const auto& [e, g] : pairs) sum += (T.apply(e) - g).squaredNorm();
  return std::sqrt(sum / pairs.size());
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty set");
  const auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

double final_quarter_median(const std::vector<double>& t, const std::vector<double>& v, double t0,
                            double t1) {
  const double from = t0 + 0.75 * (t1 - t0);
  std::vector<double> sel;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= from) sel.push_back(v[i]);
  }
  return median(sel);
}

std::vector<TimedPosition> truth_positions(const Truth& truth, const std::vector<double>& times) {
  std::vector<TimedPosition> out;
  out.reserve(times.size());
  for (double t : times) out.push_back({t, truth.at(t).p_O_in_E});
  return out;
}

RunMetrics evaluate_run(const RunReport& report, const Truth& truth) {
  RunMetrics m;
  const EulerZYX e_true = rotation_to_euler_zyx(truth.R_EV);
  std::vector<TimedPosition> est;
  for (const auto& r : report.rows) {
    const Vec3 p_true = truth.at(r.t).p_O_in_E;
    m.t.push_back(r.t);
    m.distance_error.push_back((r.p_O_in_E - p_true).norm());
    m.euler_error.emplace_back(wrap_angle(r.theta_EV.yaw - e_true.yaw),
                               wrap_angle(r.theta_EV.pitch - e_true.pitch),
                               wrap_angle(r.theta_EV.roll - e_true.roll));
    m.rotation_error.push_back(so3_log(euler_zyx_to_rotation(r.theta_EV) * truth.R_EV.transpose()).norm());
    est.push_back({r.t, r.p_O_in_E});
  }
  if (est.size() >= 3) {
    const auto gt = truth_positions(truth, m.t);
    m.ate_none = compute_ate(est, gt, Alignment::None);
    m.ate_se3 = compute_ate(est, gt, Alignment::SE3);
    m.final_quarter_median_distance =
        final_quarter_median(m.t, m.distance_error, m.t.front(), m.t.back());
  }
  return m;
}

std::vector<double> gps_errors(const std::vector<GpsFix>& fixes, const Truth& truth,
                               const Vec3& p_G_in_O) {
  std::vector<double> out;
  out.reserve(fixes.size());
  for (const auto& f : fixes) {
    const TruthSample s = truth.at(f.t);
    out.push_back((f.p_G_in_E - (s.p_O_in_E + s.q_OE.to_rotation().transpose() * p_G_in_O)).norm());
  }
  return out;
}

}  // namespace gvwo
