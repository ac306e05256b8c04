#include "gvwo/csv_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gvwo/errors.hpp"

namespace gvwo {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, int line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw InvalidArgument("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

// Header-indexed reader; rows come back in the order of `columns`.
class Table {
 public:
  Table(std::istream& is, const std::vector<std::string>& columns) : is_(is) {
    std::string header;
    if (!std::getline(is_, header)) throw InvalidArgument("csv: missing header");
    const auto names = split(header);
    std::map<std::string, int> where;
    for (int i = 0; i < static_cast<int>(names.size()); ++i) where[names[i]] = i;
    width_ = static_cast<int>(names.size());
    for (const auto& c : columns) {
      auto it = where.find(c);
      if (it == where.end()) throw InvalidArgument("csv: header lacks column '" + c + "'");
      index_.push_back(it->second);
    }
  }

  bool next(std::vector<double>& row) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split(line);
      if (static_cast<int>(cells.size()) != width_) {
        throw InvalidArgument("csv line " + std::to_string(line_no_) + ": expected " +
                              std::to_string(width_) + " fields");
      }
      row.resize(index_.size());
      for (std::size_t i = 0; i < index_.size(); ++i) row[i] = to_double(cells[index_[i]], line_no_);
      return true;
    }
    return false;
  }

  int line() const { return line_no_; }

 private:
  std::istream& is_;
  std::vector<int> index_;
  int width_ = 0;
  int line_no_ = 1;
};

std::vector<std::string> header_of(std::istream& is) {
  const auto pos = is.tellg();
  std::string header;
  std::getline(is, header);
  is.clear();
  is.seekg(pos);
  return split(header);
}

template <typename F>
void with_input(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  f(in);
}

template <typename F>
void with_output(const std::string& path, F&& f) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  f(out);
}

}  // namespace

void write_encoder_csv(std::ostream& os, const std::vector<WheelEncoderSample>& enc) {
  os << "t,dm_l,dm_r\n";
  for (const auto& e : enc) os << fmt(e.t) << ',' << fmt(e.dm_l) << ',' << fmt(e.dm_r) << '\n';
}

std::vector<WheelEncoderSample> read_encoder_csv(std::istream& is, double* t0) {
  Table tab(is, {"t", "dm_l", "dm_r"});
  std::vector<WheelEncoderSample> out;
  std::vector<double> r;
  while (tab.next(r)) {
    if (!out.empty() && !(r[0] > out.back().t)) {
      throw InvalidArgument("encoder csv line " + std::to_string(tab.line()) +
                            ": timestamps must increase");
    }
    out.push_back({r[0], 0.0, r[1], r[2]});
  }
  if (out.size() < 2) throw InvalidArgument("encoder csv: need at least two samples");
  for (std::size_t i = 1; i < out.size(); ++i) out[i].dt = out[i].t - out[i - 1].t;
  out[0].dt = out[1].dt;
  if (t0) *t0 = out[0].t - out[0].dt;
  return out;
}

void write_features_csv(std::ostream& os, const std::vector<CameraFrame>& frames) {
  os << "t,feature_id,u,v\n";
  for (const auto& f : frames) {
    for (const auto& o : f.obs) {
      os << fmt(f.t) << ',' << o.id << ',' << fmt(o.uv.x()) << ',' << fmt(o.uv.y()) << '\n';
    }
  }
}

std::vector<CameraFrame> read_features_csv(std::istream& is) {
  Table tab(is, {"t", "feature_id", "u", "v"});
  std::vector<CameraFrame> out;
  std::vector<double> r;
  while (tab.next(r)) {
    if (r[1] != std::floor(r[1])) {
      throw InvalidArgument("features csv line " + std::to_string(tab.line()) + ": feature_id must be an integer");
    }
    if (out.empty() || r[0] != out.back().t) {
      if (!out.empty() && r[0] < out.back().t) {
        throw InvalidArgument("features csv line " + std::to_string(tab.line()) + ": time went backwards");
      }
      out.push_back({r[0], {}});
    }
    out.back().obs.push_back({static_cast<std::int64_t>(r[1]), Vec2(r[2], r[3])});
  }
  return out;
}

void write_gps_csv(std::ostream& os, const std::vector<GpsFix>& fixes) {
  os << "t,x,y,z,var_x,var_y,var_z\n";
  for (const auto& g : fixes) {
    os << fmt(g.t);
    for (int i = 0; i < 3; ++i) os << ',' << fmt(g.p_G_in_E(i));
    for (int i = 0; i < 3; ++i) os << ',' << fmt(g.var(i));
    os << '\n';
  }
}

std::vector<GpsFix> read_gps_csv(std::istream& is) {
  Table tab(is, {"t", "x", "y", "z", "var_x", "var_y", "var_z"});
  std::vector<GpsFix> out;
  std::vector<double> r;
  while (tab.next(r)) {
    GpsFix g;
    g.t = r[0];
    g.p_G_in_E = Vec3(r[1], r[2], r[3]);
    g.var = Vec3(r[4], r[5], r[6]);
    g.validate();
    out.push_back(g);
  }
  return out;
}

void write_truth_csv(std::ostream& os, const Truth& truth, double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("write_truth_csv: rate must be positive");
  os << "t,qx,qy,qz,qw,x,y,z\n";
  const long n = std::lround(std::floor((truth.t_end() - truth.t_begin()) * rate + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double t = truth.t_begin() + i / rate;
    const Vec4 q = truth.q_VO(t).coeffs();
    const Vec3 p = truth.p_O_in_V(t);
    os << fmt(t);
    for (int k = 0; k < 4; ++k) os << ',' << fmt(q(k));
    for (int k = 0; k < 3; ++k) os << ',' << fmt(p(k));
    os << '\n';
  }
}

std::vector<TimedPose> read_truth_csv(std::istream& is) {
  Table tab(is, {"t", "qx", "qy", "qz", "qw", "x", "y", "z"});
  std::vector<TimedPose> out;
  std::vector<double> r;
  while (tab.next(r)) {
    out.push_back({r[0], Vec4(r[1], r[2], r[3], r[4]), Vec3(r[5], r[6], r[7])});
  }
  return out;
}

std::string report_csv_header() {
  return "t,qx,qy,qz,qw,pVx,pVy,pVz,pEx,pEy,pEz,yaw_EV,pitch_EV,roll_EV,"
         "tx_EV,ty_EV,tz_EV,sigma_yaw,sigma_pitch,sigma_roll,sigma_px,sigma_py,sigma_pz";
}

void write_report_csv(std::ostream& os, const RunReport& report) {
  os << report_csv_header() << '\n';
  for (const auto& r : report.rows) {
    os << fmt(r.t);
    for (int k = 0; k < 4; ++k) os << ',' << fmt(r.q_VO(k));
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.p_O_in_V(k));
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.p_O_in_E(k));
    os << ',' << fmt(r.theta_EV.yaw) << ',' << fmt(r.theta_EV.pitch) << ',' << fmt(r.theta_EV.roll);
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.p_V_in_E(k));
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.sigma_theta(k));
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.sigma_p_O(k));
    os << '\n';
  }
}

std::vector<TimedPosition> read_positions_csv(std::istream& is) {
  const auto names = header_of(is);
  auto has = [&](const char* n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  const bool world = has("pEx") && has("pEy") && has("pEz");
  Table tab(is, world ? std::vector<std::string>{"t", "pEx", "pEy", "pEz"}
                      : std::vector<std::string>{"t", "x", "y", "z"});
  std::vector<TimedPosition> out;
  std::vector<double> r;
  while (tab.next(r)) out.push_back({r[0], Vec3(r[1], r[2], r[3])});
  return out;
}

SensorLog read_sensor_log(const std::string& encoder_path, const std::string& features_path,
                          const std::string& gps_path) {
  SensorLog log;
  with_input(encoder_path, [&](std::istream& in) { log.encoder = read_encoder_csv(in, &log.t0); });
  if (!features_path.empty()) {
    with_input(features_path, [&](std::istream& in) { log.frames = read_features_csv(in); });
  }
  if (!gps_path.empty()) {
    with_input(gps_path, [&](std::istream& in) { log.gps = read_gps_csv(in); });
  }
  return log;
}

void write_sensor_log(const SensorLog& log, const std::string& encoder_path,
                      const std::string& features_path, const std::string& gps_path) {
  with_output(encoder_path, [&](std::ostream& out) { write_encoder_csv(out, log.encoder); });
  with_output(features_path, [&](std::ostream& out) { write_features_csv(out, log.frames); });
  with_output(gps_path, [&](std::ostream& out) { write_gps_csv(out, log.gps); });
}

}  // namespace gvwo
