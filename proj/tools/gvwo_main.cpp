// gvwo: simulate sensor logs, run the estimator, inspect observability and
// score trajectories.  Run `gvwo <command> --help` for the flags.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gvwo/csv_io.hpp"
#include "gvwo/errors.hpp"
#include "gvwo/metrics.hpp"
#include "gvwo/observability.hpp"
#include "gvwo/sensors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gvwo;

namespace {

struct ScenarioSource {
  std::string file;
  std::string preset = "urban";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;

  void add_to(CLI::App* app) {
    app->add_option("--scenario", file, "JSON scenario file (overrides --preset)");
    app->add_option("--preset", preset, "built-in scenario: urban, straight, circle, figure_eight")
        ->capture_default_str();
    app->add_option("--seed", seed, "override the scenario seed");
    app->add_option("--duration", duration, "override the scenario duration, s");
  }

  SimScenario load() const {
    SimScenario sc = file.empty() ? preset_scenario(preset) : load_scenario(file);
    if (seed) sc.seed = *seed;
    if (duration) sc.duration = *duration;
    sc.validate();
    return sc;
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create " + dir + ": " + ec.message());
}

template <typename F>
void write_file(const fs::path& path, F&& f) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  f(out);
}

json diag_json(const Diagnostics& d) {
  return {{"psd_violations", d.psd_violations}, {"gps_accepted", d.gps_accepted},
          {"gps_rejected", d.gps_rejected},     {"gps_dropped", d.gps_dropped},
          {"tracks_used", d.tracks_used},       {"tracks_gated", d.tracks_gated},
          {"tracks_degenerate", d.tracks_degenerate},
          {"visual_updates_empty", d.visual_updates_empty}};
}

Vec3 parse_triplet(const std::string& s, const char* what) {
  std::stringstream ss(s);
  std::string cell;
  Vec3 v;
  int i = 0;
  while (std::getline(ss, cell, ',')) {
    if (i == 3) break;
    try {
      v(i++) = std::stod(cell);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": expected three comma-separated numbers");
    }
  }
  if (i != 3) throw InvalidArgument(std::string(what) + ": expected three comma-separated numbers");
  return v;
}

int cmd_simulate(const ScenarioSource& src, const std::string& out_dir, double truth_rate) {
  const SimScenario sc = src.load();
  const SimOutput sim = simulate(sc);
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  write_sensor_log(sim.log, (dir / "encoder.csv").string(), (dir / "features.csv").string(),
                   (dir / "gps.csv").string());
  write_file(dir / "truth.csv", [&](std::ostream& o) { write_truth_csv(o, sim.truth, truth_rate); });
  write_file(dir / "scenario.json", [&](std::ostream& o) { o << scenario_to_json(sc) << '\n'; });
  const EulerZYX e = rotation_to_euler_zyx(sim.truth.R_EV);
  json summary = {{"scenario", sc.name},
                  {"seed", sc.seed},
                  {"encoder_samples", sim.log.encoder.size()},
                  {"camera_frames", sim.log.frames.size()},
                  {"gps_fixes", sim.log.gps.size()},
                  {"landmarks", sim.landmarks.size()},
                  {"theta_EV_deg", {rad2deg(e.yaw), rad2deg(e.pitch), rad2deg(e.roll)}},
                  {"p_V_in_E", {sim.truth.p_V_in_E(0), sim.truth.p_V_in_E(1), sim.truth.p_V_in_E(2)}},
                  {"warnings", sim.warnings}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct RunArgs {
  ScenarioSource src;
  std::string mode = "gps-vwo-1dof";
  std::string axis = "yaw";
  std::optional<std::string> extrinsic_error;
  std::string encoder, features, gps;
  std::string theta_ev = "0,0,0";
  std::string p_v = "0,0,0";
  std::string out = "report.csv";
  std::string summary;
};

int cmd_run(const RunArgs& a) {
  RunReport report;
  json summary;
  if (!a.encoder.empty()) {
    // Playback: filter settings come from the scenario's filter section.
    SimScenario sc = a.src.file.empty() ? preset_scenario(a.src.preset) : load_scenario(a.src.file);
    FilterConfig cfg = sc.filter;
    cfg.geometry = sc.geometry;
    cfg.noise = sc.noise;
    cfg.camera = CameraExtrinsics::forward_looking(sc.camera.p_O_in_C);
    cfg.mode = run_mode_from_string(a.mode);
    cfg.active_axis = extrinsic_mode_from_string(a.axis);
    const Vec3 th = parse_triplet(a.theta_ev, "--theta-ev") * (kPi / 180.0);
    cfg.initial_extrinsic.theta_EV = EulerZYX::from_vector(th);
    cfg.initial_extrinsic.p_V_in_E = parse_triplet(a.p_v, "--p-v");
    cfg.initial_extrinsic.p_G_in_O = sc.gps.p_G_in_O;
    const SensorLog log = read_sensor_log(a.encoder, a.features, a.gps);
    report = run_filter(log, cfg);
  } else {
    SimScenario sc = a.src.load();
    sc.filter.mode = run_mode_from_string(a.mode);
    sc.filter.active_axis = extrinsic_mode_from_string(a.axis);
    if (a.extrinsic_error) sc.extrinsic_error_deg = parse_triplet(*a.extrinsic_error, "--extrinsic-error");
    const SimOutput sim = simulate(sc);
    report = run_filter(sim.log, filter_config_for(sc, sim.truth));
    const RunMetrics m = evaluate_run(report, sim.truth);
    const auto gerr = gps_errors(sim.log.gps, sim.truth, sc.gps.p_G_in_O);
    std::vector<double> gt;
    for (const auto& f : sim.log.gps) gt.push_back(f.t);
    summary["ate_none_m"] = m.ate_none;
    summary["ate_se3_m"] = m.ate_se3;
    summary["final_quarter_median_distance_m"] = m.final_quarter_median_distance;
    if (!gerr.empty()) {
      summary["final_quarter_median_gps_error_m"] =
          final_quarter_median(gt, gerr, sim.truth.t_begin(), sim.truth.t_end());
    }
    if (!m.euler_error.empty()) {
      const Vec3 e = m.euler_error.back() * (180.0 / kPi);
      summary["final_euler_error_deg"] = {e(0), e(1), e(2)};
      summary["final_rotation_error_deg"] = rad2deg(m.rotation_error.back());
    }
  }
  write_file(a.out, [&](std::ostream& o) { write_report_csv(o, report); });
  summary["mode"] = std::string(to_string(report.mode));
  summary["rows"] = report.rows.size();
  summary["diagnostics"] = diag_json(report.diag);
  summary["warnings"] = report.warnings;
  summary["frames_without_features"] = report.frames_without_features;
  if (!report.rows.empty()) {
    const ReportRow& r = report.rows.back();
    summary["final_theta_EV_deg"] = {rad2deg(r.theta_EV.yaw), rad2deg(r.theta_EV.pitch),
                                     rad2deg(r.theta_EV.roll)};
    summary["final_sigma_theta_deg"] = {rad2deg(r.sigma_theta(0)), rad2deg(r.sigma_theta(1)),
                                        rad2deg(r.sigma_theta(2))};
  }
  if (a.summary.empty()) {
    std::cout << summary.dump(2) << '\n';
  } else {
    write_file(a.summary, [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
  }
  return 0;
}

int cmd_obs_rank(const std::string& mode, int samples, std::uint64_t seed) {
  const ExtrinsicMode m = extrinsic_mode_from_string(mode);
  std::mt19937_64 rng(seed);
  std::cout << "sample,mode,rank,nullity,theta_rank_vs_positions,theta_rank_vs_all,p_V_rank_vs_all,"
               "sigma_min,sigma_max\n";
  for (int i = 0; i < samples; ++i) {
    const ObservabilitySystem sys = random_generic_system(rng, m);
    const RankReport r = rank_report(lie_gradients(sys));
    std::printf("%d,%s,%d,%d,%d,%d,%d,%.6g,%.6g\n", i, mode.c_str(), r.rank, r.nullity,
                r.theta_rank_vs_positions, r.theta_rank_vs_all, r.p_V_rank_vs_all,
                r.singular_values(r.singular_values.size() - 1), r.singular_values(0));
  }
  return 0;
}

int cmd_obs_riccati(double vx, double vy, double t_end, double dt, int every) {
  const RiccatiTrace tr = riccati_simulate(vx, vy, Mat3::Identity(), t_end, dt, every);
  std::cout << "t,P11,P22,P33,trace\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    std::printf("%.6f,%.10g,%.10g,%.10g,%.10g\n", tr.t[i], tr.diagonal[i](0), tr.diagonal[i](1),
                tr.diagonal[i](2), tr.trace[i]);
  }
  return 0;
}

int cmd_ate(const std::string& est, const std::string& truth, const std::string& align,
            double max_dt) {
  auto load = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return read_positions_csv(in);
  };
  std::printf("%.9f\n", compute_ate(load(est), load(truth), alignment_from_string(align), max_dt));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPS-aided visual-wheel odometry with online extrinsic calibration"};
  app.require_subcommand(1);

  ScenarioSource sim_src;
  std::string sim_out = "sim_out";
  double truth_rate = 10.0;
  auto* sim = app.add_subcommand("simulate", "scenario -> encoder/features/gps/truth CSVs");
  sim_src.add_to(sim);
  sim->add_option("--out", sim_out, "output directory")->capture_default_str();
  sim->add_option("--truth-rate", truth_rate, "truth CSV rate, Hz")->capture_default_str();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run the estimator on a scenario or on CSV logs");
  run_args.src.add_to(run);
  run->add_option("--mode", run_args.mode, "vwo, gps-vwo-fixed, gps-vwo-1dof, gps-vwo-3dof")
      ->capture_default_str();
  run->add_option("--axis", run_args.axis, "active angle in gps-vwo-1dof: yaw, pitch, roll")
      ->capture_default_str();
  run->add_option("--extrinsic-error", run_args.extrinsic_error,
                  "initial extrinsic error yaw,pitch,roll in degrees (scenario runs)");
  run->add_option("--encoder", run_args.encoder, "encoder CSV (switches to playback)");
  run->add_option("--features", run_args.features, "feature CSV (playback)");
  run->add_option("--gps", run_args.gps, "GPS CSV (playback)");
  run->add_option("--theta-ev", run_args.theta_ev, "initial yaw,pitch,roll of R_EV in degrees (playback)")
      ->capture_default_str();
  run->add_option("--p-v", run_args.p_v, "initial p_V in {E}, m (playback)")->capture_default_str();
  run->add_option("--out", run_args.out, "report CSV")->capture_default_str();
  run->add_option("--summary", run_args.summary, "summary JSON path (default stdout)");

  auto* obs = app.add_subcommand("obs", "observability lab");
  obs->require_subcommand(1);
  std::string rank_mode = "3dof";
  int rank_samples = 100;
  std::uint64_t rank_seed = 1;
  auto* rank = obs->add_subcommand("rank", "rank reports on random generic states (CSV)");
  rank->add_option("--mode", rank_mode, "3dof, yaw, pitch, roll")->capture_default_str();
  rank->add_option("--samples", rank_samples, "number of states")->capture_default_str();
  rank->add_option("--seed", rank_seed, "random seed")->capture_default_str();
  double vx = 3.0, vy = 4.0, t_end = 60.0, dt = 1e-3;
  int every = 100;
  auto* ric = obs->add_subcommand("riccati", "variance trace of the extrinsic under constant velocity (CSV)");
  ric->add_option("--vx", vx, "m/s")->capture_default_str();
  ric->add_option("--vy", vy, "m/s")->capture_default_str();
  ric->add_option("--t-end", t_end, "s")->capture_default_str();
  ric->add_option("--dt", dt, "RK4 step, s")->capture_default_str();
  ric->add_option("--every", every, "print every n-th step")->capture_default_str();

  std::string ate_est, ate_truth, ate_align = "none";
  double ate_max_dt = 0.05;
  auto* ate = app.add_subcommand("ate", "absolute trajectory error between two CSVs");
  ate->add_option("--est", ate_est, "estimate CSV (t plus pEx,pEy,pEz or x,y,z)")->required();
  ate->add_option("--truth", ate_truth, "reference CSV")->required();
  ate->add_option("--align", ate_align, "none or se3")->capture_default_str();
  ate->add_option("--max-dt", ate_max_dt, "association tolerance, s")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(sim_src, sim_out, truth_rate);
    if (*run) return cmd_run(run_args);
    if (*rank) return cmd_obs_rank(rank_mode, rank_samples, rank_seed);
    if (*ric) return cmd_obs_riccati(vx, vy, t_end, dt, every);
    if (*ate) return cmd_ate(ate_est, ate_truth, ate_align, ate_max_dt);
  } catch (const std::exception& e) {
    std::cerr << "gvwo: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
