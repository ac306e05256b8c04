#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gvwo/estimator.hpp"
#include "gvwo/trajectory.hpp"
#include "gvwo/wheel.hpp"

namespace gvwo {

struct SensorRates {
  double encoder = 100.0;  // Hz
  double camera = 10.0;
  double gps = 5.0;
};

struct CameraSim {
  double sigma_px = 1e-3;  // normalized image units
  double hfov_deg = 90.0;
  double vfov_deg = 70.0;
  double min_depth = 0.5;  // m
  double max_depth = 60.0;
  Vec3 p_O_in_C = Vec3::Zero();
};

struct GpsSim {
  Vec3 var = Vec3(1.0, 1.0, 4.0);  // m^2
  Vec3 p_G_in_O = Vec3::Zero();
  std::vector<std::pair<double, double>> outages;  // [start, end) in s
};

/// Landmarks either uniform in a world box, or scattered along the path:
/// each is placed at a random truth pose plus a body-frame offset drawn from
/// the bounds.
struct FeatureField {
  int count = 2500;
  bool along_path = true;
  Vec3 min_bound = Vec3(5.0, -25.0, -1.0);
  Vec3 max_bound = Vec3(45.0, 25.0, 8.0);
};

struct SimScenario {
  std::string name = "urban";
  std::uint64_t seed = 1;
  double duration = 600.0;  // s
  TrajectorySpec trajectory;
  SensorRates rates;
  WheelGeometry geometry;
  OdomNoise noise;  // simulated and assumed by the filter
  /// Multiplies every simulated noise draw; 0 gives noiseless streams while
  /// the filter keeps its noise model.
  double noise_scale = 1.0;
  CameraSim camera;
  GpsSim gps;
  FeatureField features;
  /// Initial extrinsic estimate = truth + this, degrees (yaw, pitch, roll).
  Vec3 extrinsic_error_deg = Vec3::Zero();
  Vec3 p_V_error = Vec3::Zero();  // m
  FilterConfig filter;            // mode and tuning; extrinsic/camera filled in per run

  void validate() const;
};

/// Parses a JSON scenario; absent keys keep their defaults.  Throws
/// InvalidArgument on malformed input or unknown keys.
SimScenario parse_scenario(std::string_view json_text);
SimScenario load_scenario(const std::string& path);
std::string scenario_to_json(const SimScenario& sc);

/// Built-in scenarios: "urban" (600 s drive), "straight", "circle",
/// "figure_eight".
SimScenario preset_scenario(std::string_view name);

}  // namespace gvwo
