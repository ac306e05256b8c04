#pragma once

#include <string_view>
#include <vector>

#include "gvwo/estimator.hpp"
#include "gvwo/gps.hpp"
#include "gvwo/trajectory.hpp"

namespace gvwo {

enum class Alignment { None, SE3 };

Alignment alignment_from_string(std::string_view s);  // none, se3

/// Pairs each estimate with the nearest truth sample within max_dt.
std::vector<std::pair<Vec3, Vec3>> associate(const std::vector<TimedPosition>& est,
                                             const std::vector<TimedPosition>& truth,
                                             double max_dt = 0.05);

/// Position RMSE after the optional rigid alignment of the estimate onto the
/// truth.  Throws InvalidArgument for fewer than 3 associated pairs.
double compute_ate(const std::vector<TimedPosition>& est, const std::vector<TimedPosition>& truth,
                   Alignment alignment, double max_dt = 0.05);

double median(std::vector<double> v);

/// Per-row errors of a run against the simulated truth, all in {E}.
struct RunMetrics {
  std::vector<double> t;
  std::vector<double> distance_error;  // m, |p_O est - p_O true|
  std::vector<Vec3> euler_error;       // rad, wrapped (yaw, pitch, roll) of R_EV
  std::vector<double> rotation_error;  // rad, angle of R_EV est * R_EV true^T
  double ate_none = 0.0;               // m
  double ate_se3 = 0.0;                // m
  double final_quarter_median_distance = 0.0;
};

RunMetrics evaluate_run(const RunReport& report, const Truth& truth);

/// Distance between each fix and the true antenna position.
std::vector<double> gps_errors(const std::vector<GpsFix>& fixes, const Truth& truth,
                               const Vec3& p_G_in_O);

/// Median over the entries whose time lies in the last quarter of [t0, t1].
double final_quarter_median(const std::vector<double>& t, const std::vector<double>& v,
                            double t0, double t1);

/// Truth odometer positions in {E} on the report times.
std::vector<TimedPosition> truth_positions(const Truth& truth, const std::vector<double>& times);

}  // namespace gvwo
