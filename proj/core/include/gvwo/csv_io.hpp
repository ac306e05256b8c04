#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gvwo/estimator.hpp"
#include "gvwo/trajectory.hpp"

namespace gvwo {

// Plain comma-separated files with a header line.  Numbers are written with
// 17 significant digits so a write/read round trip is exact.
//
//   encoder   t,dm_l,dm_r                  ticks accumulated since the previous line
//   features  t,feature_id,u,v             one line per observation, normalized coordinates
//   gps       t,x,y,z,var_x,var_y,var_z    antenna in {E}, m and m^2
//   truth     t,qx,qy,qz,qw,x,y,z          ^O_V q and ^V p_O
//   report    see report_csv_header()

void write_encoder_csv(std::ostream& os, const std::vector<WheelEncoderSample>& enc);
/// dt of each sample is the gap to the previous line; the first sample gets
/// the second one's gap.  `t0` receives the start of the first interval.
std::vector<WheelEncoderSample> read_encoder_csv(std::istream& is, double* t0 = nullptr);

void write_features_csv(std::ostream& os, const std::vector<CameraFrame>& frames);
/// Groups consecutive lines with equal t into frames.
std::vector<CameraFrame> read_features_csv(std::istream& is);

void write_gps_csv(std::ostream& os, const std::vector<GpsFix>& fixes);
std::vector<GpsFix> read_gps_csv(std::istream& is);

/// Truth expressed in {V} on the given times.
void write_truth_csv(std::ostream& os, const Truth& truth, double rate);

struct TimedPose {
  double t = 0.0;
  Vec4 q_VO = Vec4(0, 0, 0, 1);
  Vec3 p = Vec3::Zero();
};
std::vector<TimedPose> read_truth_csv(std::istream& is);

std::string report_csv_header();
void write_report_csv(std::ostream& os, const RunReport& report);

/// Time-stamped positions from any CSV with a `t` column and either x,y,z or
/// pEx,pEy,pEz (the latter preferred).
std::vector<TimedPosition> read_positions_csv(std::istream& is);

/// File-path conveniences; throw InvalidArgument when the file cannot be opened.
SensorLog read_sensor_log(const std::string& encoder_path, const std::string& features_path,
                          const std::string& gps_path);
void write_sensor_log(const SensorLog& log, const std::string& encoder_path,
                      const std::string& features_path, const std::string& gps_path);

}  // namespace gvwo
