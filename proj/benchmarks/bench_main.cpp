#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "stereoref/metrics.hpp"
#include "stereoref/reference.hpp"
#include "stereoref/render.hpp"
#include "stereoref/se3.hpp"

namespace {

using namespace stereoref;

RectifiedRig bench_rig() {
  RigParams p;
  p.f = 500;
  p.cx1 = p.cx2 = 320;
  p.cy1 = p.cy2 = 256;
  p.tx = 5;
  p.width = 640;
  p.height = 512;
  return RectifiedRig(p);
}

// n x n height field around Z = 100.
TriangleMesh wavy(int n) {
  TriangleMesh m;
  const double half = 150;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double x = -half + 2 * half * i / n, y = -half + 2 * half * j / n;
      m.vertices.emplace_back(x, y, 100 + 10 * std::sin(x / 8) * std::cos(y / 8));
    }
  auto at = [n](int i, int j) { return static_cast<std::uint32_t>(j * (n + 1) + i); };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      m.triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      m.triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  return m;
}

void BM_RasterizeDepth(benchmark::State& state) {
  const RectifiedRig rig = bench_rig();
  const TriangleMesh mesh = wavy(static_cast<int>(state.range(0)));
  RenderConfig cfg;
  cfg.threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_depth(mesh, rig, Eye::left, {}, cfg));
  state.counters["triangles"] = static_cast<double>(mesh.triangles.size());
}
BENCHMARK(BM_RasterizeDepth)->Args({100, 1})->Args({400, 1})->Args({400, 0})->Unit(benchmark::kMillisecond);

void BM_GenerateReference(benchmark::State& state) {
  const RectifiedRig rig = bench_rig();
  const TriangleMesh mesh = wavy(200);
  ReferenceConfig cfg;
  cfg.render.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_reference(mesh, rig, {}, cfg));
}
BENCHMARK(BM_GenerateReference)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_AverageRotations(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.2);
  std::vector<Mat3> rs;
  for (int i = 0; i < state.range(0); ++i) rs.push_back(rotation_from_euler_xyz(g(rng), g(rng), g(rng)));
  for (auto _ : state) benchmark::DoNotOptimize(average_rotations(rs));
}
BENCHMARK(BM_AverageRotations)->Arg(6)->Arg(1000);

void BM_ScoreImage(benchmark::State& state) {
  const RectifiedRig rig = bench_rig();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(10, 40), noise(-4, 4);
  DisparityMap ref(rig.width(), rig.height()), est(rig.width(), rig.height());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref.pixels()[i] = d(rng);
    est.pixels()[i] = ref.pixels()[i] + noise(rng);
  }
  const MaskMap mask(rig.width(), rig.height(), MaskLabel::valid);
  for (auto _ : state) benchmark::DoNotOptimize(score_image("001", rig, est, ref, mask));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(ref.size()));
}
BENCHMARK(BM_ScoreImage)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
