// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "seeground/camgeom.hpp"
#include "seeground/fam.hpp"
#include "seeground/renderer.hpp"

namespace sg = seeground;
using sg::Vec3;

namespace {

struct Scene {
  sg::PointCloud cloud;
  sg::CameraPose pose;
  sg::Intrinsics intr;
  sg::RenderConfig cfg;
  sg::ObjectRecord object;
};

const Scene& scene(std::size_t n) {
  static std::map<std::size_t, Scene> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  std::uniform_int_distribution<int> b(0, 255);
  std::vector<Vec3> pts(n);
  std::vector<sg::Rgb> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = Vec3(c(rng), c(rng), c(rng));
    cols[i] = {static_cast<std::uint8_t>(b(rng)), static_cast<std::uint8_t>(b(rng)), static_cast<std::uint8_t>(b(rng))};
  }
  Scene s;
  s.cloud = sg::PointCloud(pts, cols);
  s.pose = sg::look_at_view_transform(Vec3(5, 4, 3), Vec3::Zero());
  s.intr = sg::intrinsics_from_fov(60, s.cfg.width, s.cfg.height);
  s.object = {1, "blob", sg::Aabb(Vec3(-1, -1, -1), Vec3(1, 1, 1)), {}};
  return cache.emplace(n, std::move(s)).first->second;
}

void BM_Render(benchmark::State& state) {
  const auto& s = scene(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sg::render(s.cloud, s.pose, s.intr, s.cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RenderSerial(benchmark::State& state) {
  const auto& s = scene(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sg::render_serial(s.cloud, s.pose, s.intr, s.cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Visibility(benchmark::State& state) {
  const auto& s = scene(static_cast<std::size_t>(state.range(0)));
  const auto out = sg::render(s.cloud, s.pose, s.intr, s.cfg);
  for (auto _ : state) benchmark::DoNotOptimize(sg::compute_visibility(out, s.object, s.cloud));
}

void BM_VisibilitySerial(benchmark::State& state) {
  const auto& s = scene(static_cast<std::size_t>(state.range(0)));
  const auto out = sg::render(s.cloud, s.pose, s.intr, s.cfg);
  for (auto _ : state) benchmark::DoNotOptimize(sg::compute_visibility_serial(out, s.object, s.cloud));
}

}  // namespace

BENCHMARK(BM_Render)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderSerial)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Visibility)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VisibilitySerial)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
