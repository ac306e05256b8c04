#include "gvwo/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <optional>
#include <random>
#include <string>

#include "gvwo/errors.hpp"
#include "gvwo/wheel.hpp"

namespace gvwo {

TrajectoryKind trajectory_kind_from_string(std::string_view s) {
  if (s == "straight") return TrajectoryKind::Straight;
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "figure_eight") return TrajectoryKind::FigureEight;
  if (s == "waypoints") return TrajectoryKind::Waypoints;
  if (s == "urban") return TrajectoryKind::Urban;
  throw InvalidArgument("unknown trajectory kind: " + std::string(s));
}

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Straight: return "straight";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::FigureEight: return "figure_eight";
    case TrajectoryKind::Waypoints: return "waypoints";
    case TrajectoryKind::Urban: return "urban";
  }
  return "urban";
}

namespace {

struct Control {
  double v = 0.0;
  double omega_z = 0.0;
};

// Uniform Catmull-Rom spline through the waypoints, tabulated densely by arc
// length with heading and curvature.
class SplinePath {
 public:
  explicit SplinePath(const std::vector<Vec2>& pts) {
    if (pts.size() < 2) throw InvalidArgument("waypoints: need at least two points");
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - pts[i - 1]).norm() < 1e-6) {
        throw InvalidArgument("waypoints: consecutive points coincide");
      }
    }
    constexpr int kPerSegment = 1000;
    const int n = static_cast<int>(pts.size());
    auto P = [&](int i) { return pts[std::clamp(i, 0, n - 1)]; };
    double s = 0.0;
    Vec2 prev = pts.front();
    for (int seg = 0; seg + 1 < n; ++seg) {
      const Vec2 p0 = P(seg - 1), p1 = P(seg), p2 = P(seg + 1), p3 = P(seg + 2);
      const Vec2 a = 2.0 * p1, b = p2 - p0, c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3,
                 d = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
      for (int k = (seg == 0 ? 0 : 1); k <= kPerSegment; ++k) {
        const double u = static_cast<double>(k) / kPerSegment;
        const Vec2 pos = 0.5 * (a + b * u + c * u * u + d * u * u * u);
        const Vec2 d1 = 0.5 * (b + 2.0 * c * u + 3.0 * d * u * u);
        const Vec2 d2 = 0.5 * (2.0 * c + 6.0 * d * u);
        const double speed = d1.norm();
        if (speed < 1e-9) throw InvalidArgument("waypoints: spline has a cusp");
        const double kappa = (d1.x() * d2.y() - d1.y() * d2.x()) / (speed * speed * speed);
        if (std::abs(kappa) > 0.5) {
          throw InvalidArgument("waypoints: turn radius below 2 m is not drivable");
        }
        s += (pos - prev).norm();
        prev = pos;
        s_.push_back(s);
        kappa_.push_back(kappa);
        if (s_.size() == 1) heading0_ = std::atan2(d1.y(), d1.x());
      }
    }
    start_ = pts.front();
  }

  double length() const { return s_.back(); }
  double heading0() const { return heading0_; }
  const Vec2& start() const { return start_; }

  double curvature(double s) const {
    if (s <= 0.0) return kappa_.front();
    if (s >= length()) return kappa_.back();
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - s_.begin());
    const double w = (s - s_[i - 1]) / std::max(s_[i] - s_[i - 1], 1e-12);
    return (1.0 - w) * kappa_[i - 1] + w * kappa_[i];
  }

 private:
  std::vector<double> s_;
  std::vector<double> kappa_;
  double heading0_ = 0.0;
  Vec2 start_ = Vec2::Zero();
};

// Procedural urban drive; advanced once per grid interval.
class UrbanDriver {
 public:
  UrbanDriver(const TrajectorySpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
    if (!(spec.speed_min > 0 && spec.speed_max >= spec.speed_min && spec.accel > 0 &&
          spec.turn_speed > 0 && spec.segment_min > 0 && spec.segment_max >= spec.segment_min &&
          spec.turn_radius_min > 0 && spec.turn_radius_max >= spec.turn_radius_min)) {
      throw InvalidArgument("urban trajectory: inconsistent parameters");
    }
    start_straight();
  }

  Control step(double dt) {
    double target = target_speed_;
    if (turning_) {
      target = std::min(target, spec_.turn_speed);
    } else if (v_ > spec_.turn_speed) {
      const double braking = (v_ * v_ - spec_.turn_speed * spec_.turn_speed) / (2.0 * spec_.accel);
      if (braking >= remaining_) target = spec_.turn_speed;
    }
    v_ += std::clamp(target - v_, -spec_.accel * dt, spec_.accel * dt);
    Control c{v_, 0.0};
    if (turning_) {
      c.omega_z = direction_ * v_ / radius_;
      remaining_ -= std::abs(c.omega_z) * dt;
      if (remaining_ <= 0.0) start_straight();
    } else {
      remaining_ -= v_ * dt;
      if (remaining_ <= 0.0) start_turn();
    }
    return c;
  }

 private:
  void start_straight() {
    turning_ = false;
    remaining_ = std::uniform_real_distribution<double>(spec_.segment_min, spec_.segment_max)(rng_);
    target_speed_ = std::uniform_real_distribution<double>(spec_.speed_min, spec_.speed_max)(rng_);
  }

  void start_turn() {
    turning_ = true;
    remaining_ = deg2rad(std::uniform_real_distribution<double>(45.0, 110.0)(rng_));
    radius_ =
        std::uniform_real_distribution<double>(spec_.turn_radius_min, spec_.turn_radius_max)(rng_);
    direction_ = std::bernoulli_distribution(0.5)(rng_) ? 1.0 : -1.0;
  }

  TrajectorySpec spec_;
  std::mt19937_64 rng_;
  double v_ = 0.0;
  double target_speed_ = 0.0;
  double remaining_ = 0.0;
  double radius_ = 1.0;
  double direction_ = 1.0;
  bool turning_ = false;
};

Control figure_eight(const TrajectorySpec& spec, double t) {
  const double w = 2.0 * kPi / spec.period;
  const double phi = w * t;
  const double a = spec.size;
  const double xd = a * w * std::cos(phi), yd = a * w * std::cos(2.0 * phi);
  const double xdd = -a * w * w * std::sin(phi), ydd = -2.0 * a * w * w * std::sin(2.0 * phi);
  const double v2 = xd * xd + yd * yd;
  return {std::sqrt(v2), (xd * ydd - yd * xdd) / v2};
}

}  // namespace

TruthSample Truth::at(double t) const {
  if (samples.empty()) throw InvalidState("truth: empty trajectory");
  if (t < t_begin() - 1e-9 || t > t_end() + 1e-9) {
    throw InvalidArgument("truth: time " + std::to_string(t) + " outside the trajectory");
  }
  auto it = std::upper_bound(samples.begin(), samples.end(), t,
                             [](double x, const TruthSample& s) { return x < s.t; });
  const TruthSample& base = it == samples.begin() ? samples.front() : *std::prev(it);
  const double h = t - base.t;
  if (h <= 0.0) return base;
  TruthSample out = base;
  propagate_mean(out.q_OE, out.p_O_in_E, base.omega, Vec3(base.v_x, 0.0, 0.0), h);
  out.t = t;
  return out;
}

UnitQuaternion Truth::q_VO(double t) const {
  return UnitQuaternion::from_rotation(at(t).q_OE.to_rotation() * R_EV);
}

Vec3 Truth::p_O_in_V(double t) const { return R_EV.transpose() * (at(t).p_O_in_E - p_V_in_E); }

Truth generate_truth(const TrajectorySpec& spec, double duration, double rate,
                     std::uint64_t seed) {
  if (!(duration > 0.0) || !(rate > 0.0)) {
    throw InvalidArgument("generate_truth: duration and rate must be positive");
  }
  if (!spec.start_position.allFinite() || !std::isfinite(spec.start_yaw_deg)) {
    throw InvalidArgument("generate_truth: non-finite start pose");
  }
  const long n = std::lround(duration * rate);
  const double dt = 1.0 / rate;

  double yaw0 = deg2rad(spec.start_yaw_deg);
  Vec3 p0 = spec.start_position;
  std::optional<SplinePath> path;
  std::optional<UrbanDriver> driver;
  switch (spec.kind) {
    case TrajectoryKind::Straight:
      if (!(spec.speed >= 0.0)) throw InvalidArgument("straight: speed must be non-negative");
      break;
    case TrajectoryKind::Circle:
      if (!(spec.radius > 0.0)) throw InvalidArgument("circle: radius must be positive");
      break;
    case TrajectoryKind::FigureEight:
      if (!(spec.size > 0.0 && spec.period > 0.0)) {
        throw InvalidArgument("figure_eight: size and period must be positive");
      }
      yaw0 += kPi / 4.0;  // initial tangent of the lemniscate
      break;
    case TrajectoryKind::Waypoints:
      if (!(spec.speed > 0.0)) throw InvalidArgument("waypoints: speed must be positive");
      path.emplace(spec.waypoints);
      yaw0 = path->heading0();
      p0 = Vec3(path->start().x(), path->start().y(), spec.start_position.z());
      break;
    case TrajectoryKind::Urban:
      driver.emplace(spec, seed);
      break;
  }

  auto control_at = [&](double t_mid) -> Control {
    switch (spec.kind) {
      case TrajectoryKind::Straight: return {spec.speed, 0.0};
      case TrajectoryKind::Circle: return {spec.radius * spec.omega, spec.omega};
      case TrajectoryKind::FigureEight: return figure_eight(spec, t_mid);
      case TrajectoryKind::Waypoints: {
        const double s = spec.speed * t_mid;
        if (s >= path->length()) return {0.0, 0.0};
        return {spec.speed, path->curvature(s) * spec.speed};
      }
      case TrajectoryKind::Urban: return driver->step(dt);
    }
    return {};
  };

  const double grade = deg2rad(spec.grade_deg);
  Truth truth;
  truth.samples.reserve(static_cast<std::size_t>(n + 1));
  TruthSample cur;
  cur.t = 0.0;
  cur.q_OE = UnitQuaternion::from_rotation(rot_z(yaw0).transpose());
  cur.p_O_in_E = p0;
  for (long k = 0; k <= n; ++k) {
    cur.t = static_cast<double>(k) / rate;
    if (k < n) {
      const double t_mid = cur.t + 0.5 * dt;
      const Control c = control_at(t_mid);
      double omega_y = 0.0;
      if (grade != 0.0) {
        const double w = 2.0 * kPi / spec.grade_period;
        omega_y = grade * w * std::cos(w * t_mid);
      }
      cur.omega = Vec3(0.0, omega_y, c.omega_z);
      cur.v_x = c.v;
    } else {
      cur.omega.setZero();
      cur.v_x = 0.0;
    }
    truth.samples.push_back(cur);
    if (k < n) propagate_mean(cur.q_OE, cur.p_O_in_E, cur.omega, Vec3(cur.v_x, 0.0, 0.0), dt);
  }
  truth.R_EV = truth.samples.front().q_OE.to_rotation().transpose();
  truth.p_V_in_E = truth.samples.front().p_O_in_E;
  return truth;
}

std::vector<double> curvature_profile(const Truth& truth) {
  std::vector<double> k;
  k.reserve(truth.samples.size());
  for (const auto& s : truth.samples) k.push_back(s.v_x > 1e-9 ? s.omega.z() / s.v_x : 0.0);
  return k;
}

}  // namespace gvwo
