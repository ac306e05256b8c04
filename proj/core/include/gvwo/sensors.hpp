#pragma once

#include <string>
#include <vector>

#include "gvwo/estimator.hpp"
#include "gvwo/scenario.hpp"
#include "gvwo/trajectory.hpp"

namespace gvwo {

struct SimLandmark {
  std::int64_t id = 0;
  Vec3 p_in_E = Vec3::Zero();
};

struct SimOutput {
  Truth truth;
  std::vector<SimLandmark> landmarks;
  SensorLog log;
  std::vector<std::string> warnings;
};

/// Landmark field of the scenario, drawn from its own random stream.
std::vector<SimLandmark> generate_landmarks(const SimScenario& sc, const Truth& truth);

/// Encoder ticks from the truth rates inverted through the encoder model,
/// bearings of the visible landmarks, and GPS fixes of the antenna with
/// N(0, var) noise, skipped inside outages.  Noise draws are scaled by
/// sc.noise_scale; every stream has its own generator seeded from sc.seed.
SensorLog synthesize_sensors(const SimScenario& sc, const Truth& truth,
                             const std::vector<SimLandmark>& landmarks,
                             std::vector<std::string>* warnings = nullptr);

/// Truth, landmarks and sensor streams for a scenario.
SimOutput simulate(const SimScenario& sc);

/// The scenario's filter settings completed for a run against `truth`: wheel
/// and camera models, and an initial extrinsic equal to the true one plus the
/// scenario's perturbation.
FilterConfig filter_config_for(const SimScenario& sc, const Truth& truth);

}  // namespace gvwo
