#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gvwo/gps.hpp"
#include "gvwo/observability.hpp"
#include "gvwo/vision.hpp"
#include "gvwo/wheel.hpp"

using namespace gvwo;

namespace {

const CameraExtrinsics kCam = CameraExtrinsics::forward_looking();

// Full window driven along an arc at 100 Hz, one clone every 0.1 s.
FilterState full_window(int clones, ExtrinsicMode mode = ExtrinsicMode::Yaw) {
  ExtrinsicBlock ext;
  ext.mode = mode;
  const int D = ext.rotation_dim();
  FilterState s = make_filter_state(0.0, NavState{}, ext, Eigen::Matrix<double, 6, 6>::Identity() * 1e-6,
                                    Eigen::MatrixXd::Identity(D, D) * 0.1, Mat3::Zero(), clones);
  const WheelGeometry g;
  const OdomNoise n;
  s = augment_clone(std::move(s), 0.0);
  int k = 0;
  for (int c = 1; c < clones; ++c) {
    for (int i = 0; i < 10; ++i) {
      ++k;
      s = propagate(std::move(s), body_rates_to_encoder({5.0, 0.1}, k * 0.01, 0.01, g), g, n);
    }
    s = augment_clone(std::move(s), s.t);
  }
  return s;
}

std::vector<FeatureTrack> tracks_for(const FilterState& s, int count) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x(15, 40), y(-10, 10), z(-2, 5);
  std::vector<FeatureTrack> out;
  for (int i = 0; i < count; ++i) {
    const Vec3 f(x(rng), y(rng), z(rng));
    FeatureTrack t;
    t.id = i;
    for (const auto& c : s.clones) t.obs.push_back({c.t, project(c.q_VO, c.p_O_in_V, f, kCam)});
    out.push_back(std::move(t));
  }
  return out;
}

void BM_Propagate(benchmark::State& state) {
  const FilterState s0 = full_window(static_cast<int>(state.range(0)));
  const WheelGeometry g;
  const OdomNoise n;
  const auto sample = body_rates_to_encoder({5.0, 0.1}, s0.t + 0.01, 0.01, g);
  for (auto _ : state) {
    FilterState s = propagate(s0, sample, g, n);
    benchmark::DoNotOptimize(s.cov.data());
  }
}
BENCHMARK(BM_Propagate)->Arg(1)->Arg(11)->Arg(21);

void BM_VisualUpdate(benchmark::State& state) {
  const FilterState s0 = full_window(11);
  const auto tracks = tracks_for(s0, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    FilterState s = visual_update(s0, tracks, kCam, 1e-3);
    benchmark::DoNotOptimize(s.cov.data());
  }
}
BENCHMARK(BM_VisualUpdate)->Arg(1)->Arg(12)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_Triangulate(benchmark::State& state) {
  const FilterState s = full_window(11);
  const auto tracks = tracks_for(s, 1);
  for (auto _ : state) benchmark::DoNotOptimize(triangulate(tracks[0], s.clones, kCam));
}
BENCHMARK(BM_Triangulate);

void BM_GpsUpdate(benchmark::State& state) {
  const FilterState s0 = full_window(11);
  GpsFix fix;
  fix.t = 0.5 * (s0.clones[4].t + s0.clones[5].t);
  fix.p_G_in_E = predict_gps(s0) + Vec3(0.5, -0.3, 0.2);
  fix.var = Vec3(1, 1, 4);
  const int iterations = static_cast<int>(state.range(0));
  for (auto _ : state) {
    FilterState s = s0;
    benchmark::DoNotOptimize(gps_update(s, fix, 0.95, iterations));
  }
}
BENCHMARK(BM_GpsUpdate)->Arg(1)->Arg(3);

void BM_LieGradients(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto mode = state.range(0) == 3 ? ExtrinsicMode::ThreeDoF : ExtrinsicMode::Yaw;
  const ObservabilitySystem sys = random_generic_system(rng, mode);
  for (auto _ : state) benchmark::DoNotOptimize(lie_gradients(sys).O.data());
}
BENCHMARK(BM_LieGradients)->Arg(1)->Arg(3);

void BM_RankReport(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const ObservabilityMatrix O = lie_gradients(random_generic_system(rng, ExtrinsicMode::ThreeDoF));
  for (auto _ : state) benchmark::DoNotOptimize(rank_report(O).rank);
}
BENCHMARK(BM_RankReport);

}  // namespace

BENCHMARK_MAIN();
