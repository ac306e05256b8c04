#include "gvwo/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "gvwo/errors.hpp"

namespace gvwo {

RunMode run_mode_from_string(std::string_view s) {
  if (s == "vwo") return RunMode::Vwo;
  if (s == "gps-vwo-fixed") return RunMode::GpsVwoFixed;
  if (s == "gps-vwo-1dof") return RunMode::GpsVwo1DoF;
  if (s == "gps-vwo-3dof") return RunMode::GpsVwo3DoF;
  throw InvalidArgument("unknown run mode: " + std::string(s));
}

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Vwo: return "vwo";
    case RunMode::GpsVwoFixed: return "gps-vwo-fixed";
    case RunMode::GpsVwo1DoF: return "gps-vwo-1dof";
    case RunMode::GpsVwo3DoF: return "gps-vwo-3dof";
  }
  return "vwo";
}

void FilterConfig::validate() const {
  if (window < 2) throw InvalidArgument("filter config: window must hold at least 2 clones");
  if (min_track_length < 2 || min_track_length > window) {
    throw InvalidArgument("filter config: min_track_length must be in [2, window]");
  }
  if (gps_iterations < 1) throw InvalidArgument("filter config: gps_iterations must be >= 1");
  if (max_tracks_per_update < 0 || max_in_state_features < 0) {
    throw InvalidArgument("filter config: track limits must be non-negative");
  }
  if (!(sigma_px > 0.0) || !(report_rate > 0.0) || !(nav_prior_sigma >= 0.0)) {
    throw InvalidArgument("filter config: sigma_px, report_rate must be positive");
  }
  if (!(prior_sigma_1dof_deg > 0.0 && prior_sigma_3dof_deg > 0.0 && prior_sigma_p_V > 0.0)) {
    throw InvalidArgument("filter config: prior sigmas must be positive");
  }
  if (mode == RunMode::GpsVwo1DoF && active_axis != ExtrinsicMode::Yaw &&
      active_axis != ExtrinsicMode::Pitch && active_axis != ExtrinsicMode::Roll) {
    throw InvalidArgument("filter config: active axis must be yaw, pitch or roll");
  }
  geometry.validate();
  noise.validate();
  camera.validate();
}

ExtrinsicBlock configured_extrinsic(const FilterConfig& cfg) {
  ExtrinsicBlock ext = cfg.initial_extrinsic;
  ext.estimate_translation = false;
  switch (cfg.mode) {
    case RunMode::Vwo:
    case RunMode::GpsVwoFixed: ext.mode = ExtrinsicMode::Fixed; break;
    case RunMode::GpsVwo1DoF: ext.mode = cfg.active_axis; break;
    case RunMode::GpsVwo3DoF:
      ext.mode = ExtrinsicMode::ThreeDoF;
      ext.estimate_translation = true;
      break;
  }
  return ext;
}

namespace {

class Estimator {
 public:
  Estimator(const SensorLog& log, const FilterConfig& cfg) : log_(log), cfg_(cfg) {
    const ExtrinsicBlock ext = configured_extrinsic(cfg);
    const int D = ext.rotation_dim();
    Eigen::MatrixXd rot_cov(D, D);
    if (D == 1) {
      rot_cov(0, 0) = std::pow(deg2rad(cfg.prior_sigma_1dof_deg), 2);
    } else if (D == 3) {
      rot_cov = std::pow(deg2rad(cfg.prior_sigma_3dof_deg), 2) * Mat3::Identity();
    }
    const Mat3 trans_cov = std::pow(cfg.prior_sigma_p_V, 2) * Mat3::Identity();
    const Eigen::Matrix<double, 6, 6> nav_cov =
        std::pow(cfg.nav_prior_sigma, 2) * Eigen::Matrix<double, 6, 6>::Identity();
    s_ = make_filter_state(log.t0, NavState{}, ext, nav_cov, rot_cov, trans_cov, cfg.window);
    report_.mode = cfg.mode;
    next_report_ = log.t0;
  }

  RunReport run() {
    std::size_t e = 0, c = 0, g = 0;
    const bool use_gps = cfg_.mode != RunMode::Vwo;
    const auto& enc = log_.encoder;
    record();
    for (;;) {
      const double te = e < enc.size() ? enc[e].t : kInf;
      const double tc = c < log_.frames.size() ? log_.frames[c].t : kInf;
      const double tg = use_gps && g < log_.gps.size() ? log_.gps[g].t : kInf;
      if (te == kInf && tc == kInf && tg == kInf) break;
      if (te <= tc && te <= tg) {
        on_encoder(e++);
      } else if (tc <= tg) {
        if (!advance_to(tc, e)) break;
        on_frame(log_.frames[c++]);
      } else {
        if (!advance_to(tg, e)) break;
        on_gps(log_.gps[g++]);
      }
      maybe_record();
    }
    report_.diag = s_.diag;
    return std::move(report_);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  void on_encoder(std::size_t k) {
    const auto& sample = log_.encoder[k];
    const double prev_t = k == 0 ? log_.t0 : log_.encoder[k - 1].t;
    if (sample.t - prev_t > 5.0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "encoder stream gap of %.3f s at t=%.3f", sample.t - prev_t,
                    sample.t);
      throw StreamGap(buf);
    }
    if (sample.t > s_.t) s_ = propagate(std::move(s_), sample, cfg_.geometry, cfg_.noise);
  }

  void on_gps(const GpsFix& fix) { gps_update(s_, fix, cfg_.gate_prob, cfg_.gps_iterations); }

  // Propagates to t with the rates of the encoder interval containing t.
  bool advance_to(double t, std::size_t next_encoder) {
    if (t <= s_.t) return true;
    if (next_encoder >= log_.encoder.size()) return false;
    WheelEncoderSample part = log_.encoder[next_encoder];
    part.t = t;
    s_ = propagate(std::move(s_), part, cfg_.geometry, cfg_.noise);
    return true;
  }

  struct Track {
    std::vector<FeatureObservation> obs;
    bool in_state = false;
  };

  static FeatureTrack as_track(std::int64_t id, const std::vector<FeatureObservation>& obs) {
    return FeatureTrack{id, obs};
  }

  // Longest tracks first, at most `limit`.
  static void limit_tracks(std::vector<FeatureTrack>& tracks, int limit) {
    std::stable_sort(tracks.begin(), tracks.end(), [](const FeatureTrack& a, const FeatureTrack& b) {
      return a.obs.size() > b.obs.size();
    });
    if (static_cast<int>(tracks.size()) > limit) tracks.resize(static_cast<std::size_t>(limit));
  }

  void on_frame(const CameraFrame& frame) {
    const double t = frame.t;
    std::vector<FeatureTrack> msckf;

    if (frame.obs.empty()) {
      ++report_.frames_without_features;
    } else {
      if (t - last_features_t_ > 1.0 && last_features_t_ > -kInf) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "no features for %.2f s before t=%.2f", t - last_features_t_, t);
        report_.warnings.emplace_back(buf);
      }
      last_features_t_ = t;
    }

    // Make room: tracks reaching back to the oldest clone are used now.
    if (static_cast<int>(s_.clones.size()) >= cfg_.window) {
      const double oldest = s_.clones.front().t;
      for (auto& [id, tr] : tracks_) {
        if (tr.obs.empty() || tr.obs.front().t > oldest + 1e-9) continue;
        if (static_cast<int>(tr.obs.size()) >= cfg_.min_track_length) {
          msckf.push_back(as_track(id, tr.obs));
          tr.obs.clear();
        } else {
          tr.obs.erase(tr.obs.begin());
        }
      }
      limit_tracks(msckf, cfg_.max_tracks_per_update);
      if (!msckf.empty()) s_ = visual_update(std::move(s_), msckf, cfg_.camera, cfg_.sigma_px);
      msckf.clear();
      s_ = marginalize_oldest_clone(std::move(s_));
    }
    s_ = augment_clone(std::move(s_), t);

    std::set<std::int64_t> seen;
    for (const auto& o : frame.obs) {
      seen.insert(o.id);
      tracks_[o.id].obs.push_back({t, o.uv});
    }

    std::vector<FeatureTrack> in_state;
    for (auto it = tracks_.begin(); it != tracks_.end();) {
      auto& [id, tr] = *it;
      if (!seen.count(id)) {
        if (tr.in_state) {
          if (s_.feature_index(id) >= 0) s_ = remove_feature(std::move(s_), id);
        } else if (static_cast<int>(tr.obs.size()) >= cfg_.min_track_length) {
          msckf.push_back(as_track(id, tr.obs));
        }
        it = tracks_.erase(it);
        continue;
      }
      ++it;
    }

    if (cfg_.feature_mode == FeatureMode::InState) {
      int budget = cfg_.max_in_state_features - static_cast<int>(s_.nav.features.size());
      for (auto& [id, tr] : tracks_) {
        if (tr.in_state) {
          if (s_.feature_index(id) < 0) continue;  // initialization was rejected
          in_state.push_back(as_track(id, tr.obs));
          tr.obs.clear();
        } else if (budget > 0 && static_cast<int>(tr.obs.size()) >= cfg_.min_track_length) {
          in_state.push_back(as_track(id, tr.obs));
          tr.obs.clear();
          tr.in_state = true;
          --budget;
        }
      }
    }

    limit_tracks(msckf, cfg_.max_tracks_per_update);
    if (!msckf.empty()) s_ = visual_update(std::move(s_), msckf, cfg_.camera, cfg_.sigma_px);
    if (!in_state.empty()) {
      s_ = visual_update(std::move(s_), in_state, cfg_.camera, cfg_.sigma_px, FeatureMode::InState);
    }
  }

  void maybe_record() {
    if (s_.t + 1e-9 >= next_report_) record();
  }

  void record() {
    ReportRow row;
    row.t = s_.t;
    row.q_VO = s_.nav.q_VO.coeffs();
    row.p_O_in_V = s_.nav.p_O_in_V;
    row.theta_EV = s_.extrinsic.theta_EV;
    row.p_V_in_E = s_.extrinsic.p_V_in_E;
    row.p_O_in_E = s_.extrinsic.p_V_in_E + s_.extrinsic.R_EV() * s_.nav.p_O_in_V;
    const ErrorLayout l = s_.layout();
    auto sd = [&](int i) { return std::sqrt(std::max(s_.cov(i, i), 0.0)); };
    for (int i = 0; i < 3; ++i) row.sigma_p_O(i) = sd(ErrorLayout::nav_p() + i);
    switch (s_.extrinsic.mode) {
      case ExtrinsicMode::Yaw: row.sigma_theta(0) = sd(l.ext_theta()); break;
      case ExtrinsicMode::Pitch: row.sigma_theta(1) = sd(l.ext_theta()); break;
      case ExtrinsicMode::Roll: row.sigma_theta(2) = sd(l.ext_theta()); break;
      case ExtrinsicMode::ThreeDoF:
        row.sigma_theta = Vec3(sd(l.ext_theta() + 2), sd(l.ext_theta() + 1), sd(l.ext_theta()));
        break;
      case ExtrinsicMode::Fixed: break;
    }
    report_.rows.push_back(row);
    const double period = 1.0 / cfg_.report_rate;
    while (next_report_ <= s_.t + 1e-9) next_report_ += period;
  }

  const SensorLog& log_;
  const FilterConfig& cfg_;
  FilterState s_;
  RunReport report_;
  std::map<std::int64_t, Track> tracks_;
  double next_report_ = 0.0;
  double last_features_t_ = -kInf;
};

}  // namespace

RunReport run_filter(const SensorLog& log, const FilterConfig& cfg) {
  cfg.validate();
  if (log.encoder.empty()) throw InvalidArgument("run_filter: empty encoder stream");
  for (std::size_t i = 1; i < log.encoder.size(); ++i) {
    if (!(log.encoder[i].t > log.encoder[i - 1].t)) {
      throw InvalidArgument("run_filter: encoder stream is not time ordered");
    }
  }
  for (std::size_t i = 1; i < log.frames.size(); ++i) {
    if (!(log.frames[i].t > log.frames[i - 1].t)) {
      throw InvalidArgument("run_filter: camera stream is not time ordered");
    }
  }
  for (std::size_t i = 1; i < log.gps.size(); ++i) {
    if (log.gps[i].t < log.gps[i - 1].t) {
      throw InvalidArgument("run_filter: GPS stream is not time ordered");
    }
  }
  return Estimator(log, cfg).run();
}

}  // namespace gvwo
