#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gvwo/geometry.hpp"

namespace gvwo {

enum class TrajectoryKind { Straight, Circle, FigureEight, Waypoints, Urban };

TrajectoryKind trajectory_kind_from_string(std::string_view s);
std::string_view to_string(TrajectoryKind k);

/// Ground-vehicle trajectory description.  Every kind is reduced to
/// piecewise-constant body rates (forward speed, yaw rate, optional pitch
/// rate for grade) at the encoder period and integrated exactly, so the
/// truth is consistent with a zero-order-hold odometer by construction.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Urban;

  double speed = 5.0;  // m/s; straight, waypoints

  double radius = 10.0;  // m; circle
  double omega = 0.2;    // rad/s; circle, speed = radius * omega

  double size = 60.0;     // m; figure-eight half width
  double period = 120.0;  // s; figure-eight lap time

  std::vector<Vec2> waypoints;  // m; Catmull-Rom through these

  // Urban random drive: straights of random length joined by turns, speed
  // re-drawn per straight, acceleration limited, starting from rest.
  double speed_min = 3.0;
  double speed_max = 8.0;
  double accel = 0.5;         // m/s^2
  double turn_speed = 4.0;    // m/s cap while turning
  double segment_min = 80.0;  // m
  double segment_max = 300.0; // m
  double turn_radius_min = 15.0;
  double turn_radius_max = 40.0;

  double grade_deg = 0.0;        // pitch amplitude of a sinusoidal grade
  double grade_period = 120.0;   // s

  Vec3 start_position = Vec3::Zero();  // in {E}
  double start_yaw_deg = 30.0;         // heading in {E}
};

/// Pose of the odometer frame in {E} at a grid time plus the body rates held
/// over the following interval.
struct TruthSample {
  double t = 0.0;
  UnitQuaternion q_OE;  // ^O_E q
  Vec3 p_O_in_E = Vec3::Zero();
  Vec3 omega = Vec3::Zero();  // body angular rate on [t, t_next)
  double v_x = 0.0;           // body forward speed on [t, t_next)
};

struct Truth {
  std::vector<TruthSample> samples;  // uniform grid
  /// {V} is the odometer frame at the first sample.
  Mat3 R_EV = Mat3::Identity();
  Vec3 p_V_in_E = Vec3::Zero();

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }
  /// Exact pose at t (integrates the held rates from the preceding sample).
  TruthSample at(double t) const;
  UnitQuaternion q_VO(double t) const;
  Vec3 p_O_in_V(double t) const;
};

/// Truth on the grid k / rate, k = 0..duration*rate.  `seed` only matters for
/// the urban kind.  Throws InvalidArgument for infeasible specs.
Truth generate_truth(const TrajectorySpec& spec, double duration, double rate,
                     std::uint64_t seed);

/// Signed curvature omega_z / v_x of each grid interval (0 when stopped).
std::vector<double> curvature_profile(const Truth& truth);

}  // namespace gvwo
