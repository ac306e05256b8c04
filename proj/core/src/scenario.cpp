#include "gvwo/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gvwo/errors.hpp"

namespace gvwo {

namespace {

using nlohmann::json;

// Reads members of one JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(where_ + "." + key + ": " + e.what());
    }
  }

  void vec3(const char* key, Vec3& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& a = j_.at(key);
    if (!a.is_array() || a.size() != 3) throw InvalidArgument(where_ + "." + key + ": expected [x, y, z]");
    for (int i = 0; i < 3; ++i) out(i) = number(a[i], key);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw InvalidArgument(where_ + ": unknown key '" + k + "'");
    }
  }

  double number(const json& v, const char* key) const {
    if (!v.is_number()) throw InvalidArgument(where_ + "." + key + ": expected a number");
    return v.get<double>();
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "nullspace") return FeatureMode::Nullspace;
  if (s == "in_state") return FeatureMode::InState;
  throw InvalidArgument("unknown feature mode: " + s);
}

std::string feature_mode_name(FeatureMode m) {
  return m == FeatureMode::InState ? "in_state" : "nullspace";
}

void read_trajectory(const json& j, TrajectorySpec& t) {
  Reader r(j, "trajectory");
  std::string kind(to_string(t.kind));
  r.get("kind", kind);
  t.kind = trajectory_kind_from_string(kind);
  r.get("speed", t.speed);
  r.get("radius", t.radius);
  r.get("omega", t.omega);
  r.get("size", t.size);
  r.get("period", t.period);
  if (const json* w = r.child("waypoints")) {
    if (!w->is_array()) throw InvalidArgument("trajectory.waypoints: expected an array");
    t.waypoints.clear();
    for (const auto& p : *w) {
      if (!p.is_array() || p.size() != 2) throw InvalidArgument("trajectory.waypoints: expected [x, y] pairs");
      t.waypoints.emplace_back(r.number(p[0], "waypoints"), r.number(p[1], "waypoints"));
    }
  }
  r.get("speed_min", t.speed_min);
  r.get("speed_max", t.speed_max);
  r.get("accel", t.accel);
  r.get("turn_speed", t.turn_speed);
  r.get("segment_min", t.segment_min);
  r.get("segment_max", t.segment_max);
  r.get("turn_radius_min", t.turn_radius_min);
  r.get("turn_radius_max", t.turn_radius_max);
  r.get("grade_deg", t.grade_deg);
  r.get("grade_period", t.grade_period);
  r.vec3("start_position", t.start_position);
  r.get("start_yaw_deg", t.start_yaw_deg);
  r.finish();
}

json write_trajectory(const TrajectorySpec& t) {
  json w = json::array();
  for (const auto& p : t.waypoints) w.push_back({p(0), p(1)});
  return {{"kind", std::string(to_string(t.kind))},
          {"speed", t.speed},
          {"radius", t.radius},
          {"omega", t.omega},
          {"size", t.size},
          {"period", t.period},
          {"waypoints", w},
          {"speed_min", t.speed_min},
          {"speed_max", t.speed_max},
          {"accel", t.accel},
          {"turn_speed", t.turn_speed},
          {"segment_min", t.segment_min},
          {"segment_max", t.segment_max},
          {"turn_radius_min", t.turn_radius_min},
          {"turn_radius_max", t.turn_radius_max},
          {"grade_deg", t.grade_deg},
          {"grade_period", t.grade_period},
          {"start_position", vec_json(t.start_position)},
          {"start_yaw_deg", t.start_yaw_deg}};
}

void read_filter(const json& j, FilterConfig& f) {
  Reader r(j, "filter");
  std::string mode(to_string(f.mode));
  r.get("mode", mode);
  f.mode = run_mode_from_string(mode);
  std::string axis(to_string(f.active_axis));
  r.get("active_axis", axis);
  f.active_axis = extrinsic_mode_from_string(axis);
  std::string fm = feature_mode_name(f.feature_mode);
  r.get("feature_mode", fm);
  f.feature_mode = feature_mode_from_string(fm);
  r.get("window", f.window);
  r.get("min_track_length", f.min_track_length);
  r.get("max_tracks_per_update", f.max_tracks_per_update);
  r.get("max_in_state_features", f.max_in_state_features);
  r.get("sigma_px", f.sigma_px);
  r.get("gate_prob", f.gate_prob);
  r.get("gps_iterations", f.gps_iterations);
  r.get("prior_sigma_1dof_deg", f.prior_sigma_1dof_deg);
  r.get("prior_sigma_3dof_deg", f.prior_sigma_3dof_deg);
  r.get("prior_sigma_p_V", f.prior_sigma_p_V);
  r.get("nav_prior_sigma", f.nav_prior_sigma);
  r.get("report_rate", f.report_rate);
  r.finish();
}

json write_filter(const FilterConfig& f) {
  return {{"mode", std::string(to_string(f.mode))},
          {"active_axis", std::string(to_string(f.active_axis))},
          {"feature_mode", feature_mode_name(f.feature_mode)},
          {"window", f.window},
          {"min_track_length", f.min_track_length},
          {"max_tracks_per_update", f.max_tracks_per_update},
          {"max_in_state_features", f.max_in_state_features},
          {"sigma_px", f.sigma_px},
          {"gate_prob", f.gate_prob},
          {"gps_iterations", f.gps_iterations},
          {"prior_sigma_1dof_deg", f.prior_sigma_1dof_deg},
          {"prior_sigma_3dof_deg", f.prior_sigma_3dof_deg},
          {"prior_sigma_p_V", f.prior_sigma_p_V},
          {"nav_prior_sigma", f.nav_prior_sigma},
          {"report_rate", f.report_rate}};
}

}  // namespace

void SimScenario::validate() const {
  if (!(duration > 0.0)) throw InvalidArgument("scenario: duration must be positive");
  if (!(rates.encoder > 0.0) || !(rates.camera > 0.0) || !(rates.gps > 0.0)) {
    throw InvalidArgument("scenario: sensor rates must be positive");
  }
  if (!(noise_scale >= 0.0)) throw InvalidArgument("scenario: noise_scale must be >= 0");
  geometry.validate();
  noise.validate();
  if (!(camera.sigma_px >= 0.0) || !(camera.hfov_deg > 0.0 && camera.hfov_deg < 180.0) ||
      !(camera.vfov_deg > 0.0 && camera.vfov_deg < 180.0) || !(camera.min_depth > 0.0) ||
      !(camera.max_depth > camera.min_depth)) {
    throw InvalidArgument("scenario: invalid camera parameters");
  }
  if (!(gps.var.array() > 0.0).all()) throw InvalidArgument("scenario: GPS variances must be positive");
  for (const auto& [a, b] : gps.outages) {
    if (!(a >= 0.0 && b > a && b <= duration)) {
      throw InvalidArgument("scenario: outage intervals must satisfy 0 <= start < end <= duration");
    }
  }
  if (features.count < 0 || !(features.max_bound.array() >= features.min_bound.array()).all()) {
    throw InvalidArgument("scenario: invalid feature field");
  }
  filter.validate();
}

SimScenario parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
  SimScenario sc;
  Reader r(j, "scenario");
  r.get("name", sc.name);
  r.get("seed", sc.seed);
  r.get("duration", sc.duration);
  r.get("noise_scale", sc.noise_scale);
  if (const json* t = r.child("trajectory")) read_trajectory(*t, sc.trajectory);
  if (const json* c = r.child("rates")) {
    Reader rr(*c, "rates");
    rr.get("encoder", sc.rates.encoder);
    rr.get("camera", sc.rates.camera);
    rr.get("gps", sc.rates.gps);
    rr.finish();
  }
  if (const json* c = r.child("wheel")) {
    Reader rr(*c, "wheel");
    rr.get("ticks_per_rev_l", sc.geometry.ticks_per_rev_l);
    rr.get("ticks_per_rev_r", sc.geometry.ticks_per_rev_r);
    rr.get("diameter_l", sc.geometry.diameter_l);
    rr.get("diameter_r", sc.geometry.diameter_r);
    rr.get("baseline", sc.geometry.baseline);
    rr.finish();
  }
  if (const json* c = r.child("odom_noise")) {
    Reader rr(*c, "odom_noise");
    rr.get("sigma_ticks_l", sc.noise.sigma_ticks_l);
    rr.get("sigma_ticks_r", sc.noise.sigma_ticks_r);
    rr.get("sigma_wx", sc.noise.sigma_wx);
    rr.get("sigma_wy", sc.noise.sigma_wy);
    rr.get("sigma_vy", sc.noise.sigma_vy);
    rr.get("sigma_vz", sc.noise.sigma_vz);
    rr.finish();
  }
  if (const json* c = r.child("camera")) {
    Reader rr(*c, "camera");
    rr.get("sigma_px", sc.camera.sigma_px);
    rr.get("hfov_deg", sc.camera.hfov_deg);
    rr.get("vfov_deg", sc.camera.vfov_deg);
    rr.get("min_depth", sc.camera.min_depth);
    rr.get("max_depth", sc.camera.max_depth);
    rr.vec3("p_O_in_C", sc.camera.p_O_in_C);
    rr.finish();
  }
  if (const json* c = r.child("gps")) {
    Reader rr(*c, "gps");
    rr.vec3("var", sc.gps.var);
    rr.vec3("p_G_in_O", sc.gps.p_G_in_O);
    if (const json* o = rr.child("outages")) {
      if (!o->is_array()) throw InvalidArgument("gps.outages: expected an array");
      sc.gps.outages.clear();
      for (const auto& p : *o) {
        if (!p.is_array() || p.size() != 2) throw InvalidArgument("gps.outages: expected [start, end] pairs");
        sc.gps.outages.emplace_back(rr.number(p[0], "outages"), rr.number(p[1], "outages"));
      }
    }
    rr.finish();
  }
  if (const json* c = r.child("features")) {
    Reader rr(*c, "features");
    rr.get("count", sc.features.count);
    rr.get("along_path", sc.features.along_path);
    rr.vec3("min_bound", sc.features.min_bound);
    rr.vec3("max_bound", sc.features.max_bound);
    rr.finish();
  }
  r.vec3("extrinsic_error_deg", sc.extrinsic_error_deg);
  r.vec3("p_V_error", sc.p_V_error);
  if (const json* f = r.child("filter")) read_filter(*f, sc.filter);
  r.finish();
  sc.filter.geometry = sc.geometry;
  sc.filter.noise = sc.noise;
  const bool filter_sigma_given = j.contains("filter") && j["filter"].contains("sigma_px");
  if (!filter_sigma_given && sc.camera.sigma_px > 0.0) sc.filter.sigma_px = sc.camera.sigma_px;
  sc.validate();
  return sc;
}

SimScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const SimScenario& sc) {
  json outages = json::array();
  for (const auto& [a, b] : sc.gps.outages) outages.push_back({a, b});
  json j = {
      {"name", sc.name},
      {"seed", sc.seed},
      {"duration", sc.duration},
      {"noise_scale", sc.noise_scale},
      {"trajectory", write_trajectory(sc.trajectory)},
      {"rates", {{"encoder", sc.rates.encoder}, {"camera", sc.rates.camera}, {"gps", sc.rates.gps}}},
      {"wheel",
       {{"ticks_per_rev_l", sc.geometry.ticks_per_rev_l},
        {"ticks_per_rev_r", sc.geometry.ticks_per_rev_r},
        {"diameter_l", sc.geometry.diameter_l},
        {"diameter_r", sc.geometry.diameter_r},
        {"baseline", sc.geometry.baseline}}},
      {"odom_noise",
       {{"sigma_ticks_l", sc.noise.sigma_ticks_l},
        {"sigma_ticks_r", sc.noise.sigma_ticks_r},
        {"sigma_wx", sc.noise.sigma_wx},
        {"sigma_wy", sc.noise.sigma_wy},
        {"sigma_vy", sc.noise.sigma_vy},
        {"sigma_vz", sc.noise.sigma_vz}}},
      {"camera",
       {{"sigma_px", sc.camera.sigma_px},
        {"hfov_deg", sc.camera.hfov_deg},
        {"vfov_deg", sc.camera.vfov_deg},
        {"min_depth", sc.camera.min_depth},
        {"max_depth", sc.camera.max_depth},
        {"p_O_in_C", vec_json(sc.camera.p_O_in_C)}}},
      {"gps", {{"var", vec_json(sc.gps.var)}, {"p_G_in_O", vec_json(sc.gps.p_G_in_O)}, {"outages", outages}}},
      {"features",
       {{"count", sc.features.count},
        {"along_path", sc.features.along_path},
        {"min_bound", vec_json(sc.features.min_bound)},
        {"max_bound", vec_json(sc.features.max_bound)}}},
      {"extrinsic_error_deg", vec_json(sc.extrinsic_error_deg)},
      {"p_V_error", vec_json(sc.p_V_error)},
      {"filter", write_filter(sc.filter)}};
  return j.dump(2);
}

SimScenario preset_scenario(std::string_view name) {
  SimScenario sc;
  sc.name = std::string(name);
  if (name == "urban") {
    return sc;
  }
  if (name == "straight") {
    sc.trajectory.kind = TrajectoryKind::Straight;
    sc.trajectory.speed = 5.0;
    sc.duration = 60.0;
    return sc;
  }
  if (name == "circle") {
    sc.trajectory.kind = TrajectoryKind::Circle;
    sc.trajectory.radius = 25.0;
    sc.trajectory.omega = 0.2;
    sc.duration = 120.0;
    return sc;
  }
  if (name == "figure_eight") {
    sc.trajectory.kind = TrajectoryKind::FigureEight;
    sc.duration = 240.0;
    return sc;
  }
  throw InvalidArgument("unknown preset scenario: " + std::string(name));
}

}  // namespace gvwo
