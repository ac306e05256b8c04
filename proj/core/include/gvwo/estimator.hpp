#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gvwo/filter_state.hpp"
#include "gvwo/gps.hpp"
#include "gvwo/vision.hpp"
#include "gvwo/wheel.hpp"

namespace gvwo {

enum class RunMode { Vwo, GpsVwoFixed, GpsVwo1DoF, GpsVwo3DoF };

RunMode run_mode_from_string(std::string_view s);  // vwo, gps-vwo-fixed, gps-vwo-1dof, gps-vwo-3dof
std::string_view to_string(RunMode m);

struct FrameObservation {
  std::int64_t id = 0;
  Vec2 uv = Vec2::Zero();
};

struct CameraFrame {
  double t = 0.0;
  std::vector<FrameObservation> obs;
};

/// Time-ordered sensor streams.  The filter starts at t0 (the beginning of
/// the first encoder interval).
struct SensorLog {
  double t0 = 0.0;
  std::vector<WheelEncoderSample> encoder;
  std::vector<CameraFrame> frames;
  std::vector<GpsFix> gps;
};

struct FilterConfig {
  RunMode mode = RunMode::GpsVwo1DoF;
  ExtrinsicMode active_axis = ExtrinsicMode::Yaw;  // for GpsVwo1DoF
  int window = 11;
  FeatureMode feature_mode = FeatureMode::Nullspace;
  int min_track_length = 3;
  int max_tracks_per_update = 12;
  int max_in_state_features = 6;
  double sigma_px = 1e-3;
  double gate_prob = 0.95;
  int gps_iterations = 3;  // 1 = plain EKF update
  double prior_sigma_1dof_deg = 180.0;
  double prior_sigma_3dof_deg = 30.0;
  double prior_sigma_p_V = 1.0;  // m, 3DoF mode estimates ^E p_V
  double nav_prior_sigma = 1e-6;
  double report_rate = 10.0;  // Hz
  WheelGeometry geometry;
  OdomNoise noise;
  CameraExtrinsics camera = CameraExtrinsics::forward_looking();
  /// Starting values of the extrinsic; its mode is replaced according to
  /// `mode` and `active_axis`.
  ExtrinsicBlock initial_extrinsic;

  void validate() const;
};

/// Extrinsic block (mode, translation flag) that `cfg` runs with.
ExtrinsicBlock configured_extrinsic(const FilterConfig& cfg);

struct ReportRow {
  double t = 0.0;
  Vec4 q_VO = Vec4(0, 0, 0, 1);
  Vec3 p_O_in_V = Vec3::Zero();
  Vec3 p_O_in_E = Vec3::Zero();  // p_V + R_EV p_O with the current extrinsic
  EulerZYX theta_EV;
  Vec3 p_V_in_E = Vec3::Zero();
  /// 1-sigma of the extrinsic rotation, ordered (yaw, pitch, roll).  Single
  /// angle modes fill their own slot; the 3DoF mode reports the rotation-error
  /// components about the z, y and x axes of {E}.  Zero when not estimated.
  Vec3 sigma_theta = Vec3::Zero();
  Vec3 sigma_p_O = Vec3::Zero();
};

struct RunReport {
  RunMode mode = RunMode::Vwo;
  std::vector<ReportRow> rows;
  Diagnostics diag;
  std::vector<std::string> warnings;
  int frames_without_features = 0;
};

/// Runs the estimator over the merged streams (ties: encoder, camera, GPS).
/// Camera and GPS events propagate to their own timestamp with the rates of
/// the encoder interval that contains it.  Throws StreamGap when consecutive
/// encoder samples are more than 5 s apart.
RunReport run_filter(const SensorLog& log, const FilterConfig& cfg);

}  // namespace gvwo
