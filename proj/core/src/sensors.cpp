#include "gvwo/sensors.hpp"

#include <cmath>
#include <random>

#include "gvwo/errors.hpp"
#include "gvwo/wheel.hpp"

namespace gvwo {

namespace {

enum Stream : std::uint64_t { kLandmarks = 2, kEncoder = 3, kCamera = 4, kGps = 5 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

bool in_outage(const SimScenario& sc, double t) {
  for (const auto& [a, b] : sc.gps.outages) {
    if (t >= a && t < b) return true;
  }
  return false;
}

}  // namespace

std::vector<SimLandmark> generate_landmarks(const SimScenario& sc, const Truth& truth) {
  auto rng = stream_rng(sc.seed, kLandmarks);
  const Vec3& lo = sc.features.min_bound;
  const Vec3& hi = sc.features.max_bound;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, truth.samples.size() - 1);
  std::vector<SimLandmark> out;
  out.reserve(sc.features.count);
  for (int i = 0; i < sc.features.count; ++i) {
    Vec3 off;
    for (int k = 0; k < 3; ++k) off(k) = lo(k) + (hi(k) - lo(k)) * u01(rng);
    SimLandmark lm;
    lm.id = i;
    if (sc.features.along_path) {
      const TruthSample& s = truth.samples[pick(rng)];
      // Offsets are relative to the heading only, so the field stays level.
      const double yaw = rotation_to_euler_zyx(s.q_OE.to_rotation().transpose()).yaw;
      lm.p_in_E = s.p_O_in_E + rot_z(yaw) * off;
    } else {
      lm.p_in_E = off;
    }
    out.push_back(lm);
  }
  return out;
}

SensorLog synthesize_sensors(const SimScenario& sc, const Truth& truth,
                             const std::vector<SimLandmark>& landmarks,
                             std::vector<std::string>* warnings) {
  sc.validate();
  if (truth.samples.size() < 2) throw InvalidArgument("synthesize_sensors: truth too short");
  if (truth.t_end() + 1e-9 < truth.t_begin() + sc.duration) {
    throw InvalidArgument("synthesize_sensors: truth does not cover the scenario duration");
  }
  const double k = sc.noise_scale;
  SensorLog log;
  log.t0 = truth.t_begin();

  {
    auto rng = stream_rng(sc.seed, kEncoder);
    std::normal_distribution<double> nl(0.0, sc.noise.sigma_ticks_l * k);
    std::normal_distribution<double> nr(0.0, sc.noise.sigma_ticks_r * k);
    log.encoder.reserve(truth.samples.size() - 1);
    for (std::size_t i = 0; i + 1 < truth.samples.size(); ++i) {
      const TruthSample& a = truth.samples[i];
      const double t = truth.samples[i + 1].t;
      WheelEncoderSample e =
          body_rates_to_encoder({a.v_x, a.omega.z()}, t, t - a.t, sc.geometry);
      if (k > 0.0) {
        e.dm_l += nl(rng);
        e.dm_r += nr(rng);
      }
      log.encoder.push_back(e);
    }
  }

  {
    auto rng = stream_rng(sc.seed, kCamera);
    std::normal_distribution<double> npx(0.0, sc.camera.sigma_px * k);
    const CameraExtrinsics cam = CameraExtrinsics::forward_looking(sc.camera.p_O_in_C);
    const double tan_h = std::tan(deg2rad(sc.camera.hfov_deg) / 2.0);
    const double tan_v = std::tan(deg2rad(sc.camera.vfov_deg) / 2.0);
    const long n = std::lround(std::floor(sc.duration * sc.rates.camera + 1e-9));
    double last_seen = truth.t_begin();
    bool warned = false;
    for (long i = 1; i <= n; ++i) {
      const double t = truth.t_begin() + i / sc.rates.camera;
      const TruthSample pose = truth.at(t);
      const Mat3 R_OE = pose.q_OE.to_rotation();
      CameraFrame frame;
      frame.t = t;
      for (const auto& lm : landmarks) {
        const Vec3 pc = cam.R_OC * (R_OE * (lm.p_in_E - pose.p_O_in_E)) + cam.p_O_in_C;
        const double z = pc.z();
        if (z < sc.camera.min_depth || z > sc.camera.max_depth) continue;
        const double u = pc.x() / z, v = pc.y() / z;
        if (std::abs(u) > tan_h || std::abs(v) > tan_v) continue;
        Vec2 uv(u, v);
        if (k > 0.0) uv += Vec2(npx(rng), npx(rng));
        frame.obs.push_back({lm.id, uv});
      }
      if (!frame.obs.empty()) {
        last_seen = t;
        warned = false;
      } else if (!warned && t - last_seen > 1.0) {
        if (warnings) warnings->push_back("no visible features for more than 1 s at t=" + std::to_string(t));
        warned = true;
      }
      log.frames.push_back(std::move(frame));
    }
  }

  {
    auto rng = stream_rng(sc.seed, kGps);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Vec3 sd = sc.gps.var.cwiseSqrt() * k;
    const long n = std::lround(std::floor(sc.duration * sc.rates.gps + 1e-9));
    for (long i = 1; i <= n; ++i) {
      const double t = truth.t_begin() + i / sc.rates.gps;
      // Draw before the outage check so outages do not shift later noise.
      const Vec3 noise(sd(0) * n01(rng), sd(1) * n01(rng), sd(2) * n01(rng));
      if (in_outage(sc, t - truth.t_begin())) continue;
      const TruthSample pose = truth.at(t);
      GpsFix fix;
      fix.t = t;
      fix.p_G_in_E = pose.p_O_in_E + pose.q_OE.to_rotation().transpose() * sc.gps.p_G_in_O + noise;
      fix.var = sc.gps.var;
      log.gps.push_back(fix);
    }
  }
  return log;
}

SimOutput simulate(const SimScenario& sc) {
  sc.validate();
  SimOutput out;
  out.truth = generate_truth(sc.trajectory, sc.duration, sc.rates.encoder, sc.seed);
  out.landmarks = generate_landmarks(sc, out.truth);
  out.log = synthesize_sensors(sc, out.truth, out.landmarks, &out.warnings);
  return out;
}

FilterConfig filter_config_for(const SimScenario& sc, const Truth& truth) {
  FilterConfig cfg = sc.filter;
  cfg.geometry = sc.geometry;
  cfg.noise = sc.noise;
  cfg.camera = CameraExtrinsics::forward_looking(sc.camera.p_O_in_C);
  ExtrinsicBlock ext;
  const EulerZYX e = rotation_to_euler_zyx(truth.R_EV);
  ext.theta_EV = {wrap_angle(e.yaw + deg2rad(sc.extrinsic_error_deg(0))),
                  e.pitch + deg2rad(sc.extrinsic_error_deg(1)),
                  wrap_angle(e.roll + deg2rad(sc.extrinsic_error_deg(2)))};
  ext.p_V_in_E = truth.p_V_in_E + sc.p_V_error;
  ext.p_G_in_O = sc.gps.p_G_in_O;
  cfg.initial_extrinsic = ext;
  cfg.validate();
  return cfg;
}

}  // namespace gvwo
