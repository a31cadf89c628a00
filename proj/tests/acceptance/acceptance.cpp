// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "seeground/camgeom.hpp"
#include "seeground/evalkit.hpp"
#include "seeground/fam.hpp"
#include "seeground/pipeline.hpp"
#include "seeground/renderer.hpp"
#include "seeground/synth.hpp"

namespace sg = seeground;
using sg::Vec3;

namespace {

// Pinned tolerances and budgets.
constexpr int kRasterScenes = 50;
constexpr std::size_t kRasterMaxPoints = 2000;
constexpr double kRasterBudgetS = 10.0;
constexpr int kGeometryPairs = 10000;
constexpr double kOrthoTol = 1e-9;
constexpr double kPrincipalTol = 1e-6;
constexpr double kHomogeneityTol = 1e-9;
constexpr double kPlaneTol = 0.10;
constexpr int kVisibilityScenes = 20;
constexpr double kMinPointAgreement = 0.99;
constexpr double kBoundaryBand = 1e-9;
constexpr int kCompositeSets = 100;
constexpr int kIouPairs = 1000;
constexpr double kInvarianceTol = 1e-12;
constexpr double kGridTol = 0.02;
constexpr double kCeilingBudgetS = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome rasterizer_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> count(1, kRasterMaxPoints);
  std::uniform_int_distribution<int> dim(32, 200);
  int identical = 0;
  for (int s = 0; s < kRasterScenes; ++s) {
    const auto cloud = sgtest::random_cloud(rng, count(rng), Vec3::Zero(), 1.0);
    const auto pose = sgtest::random_pose(rng);
    sg::RenderConfig cfg;
    cfg.width = dim(rng);
    cfg.height = dim(rng);
    cfg.splat_radius = 0;
    const auto intr = sg::intrinsics_from_fov(55, cfg.width, cfg.height);
    const auto out = sg::render(cloud, pose, intr, cfg);
    const auto ref = sgtest::reference_render(cloud, pose, intr, cfg.near, cfg.background);
    identical += out.color == ref.color &&
                 std::memcmp(out.depth.data(), ref.depth.data(), out.depth.size() * sizeof(float)) == 0;
  }
  const double secs = seconds_since(t0);
  return {identical == kRasterScenes && secs < kRasterBudgetS,
          fmt("%.0f/%.0f scenes bit-identical, %.2f s", identical, kRasterScenes, secs)};
}

Outcome geometry_suite() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> coord(-10, 10), scale(0.01, 100);
  const auto intr = sg::intrinsics_from_fov(60, 1000, 800);
  double worst_ortho = 0, worst_pp = 0, worst_homog = 0;
  int tested = 0;
  for (int i = 0; i < kGeometryPairs; ++i) {
    const Vec3 eye(coord(rng), coord(rng), coord(rng)), target(coord(rng), coord(rng), coord(rng));
    if ((target - eye).norm() < 1e-3) continue;
    const auto pose = sg::look_at_with_fallback(eye, target);
    ++tested;
    worst_ortho = std::max(worst_ortho, sg::orthonormality_residual(pose.rotation));
    if (const auto p = sg::project(pose, intr, target)) {
      worst_pp = std::max(worst_pp, std::hypot(p->u - intr.cx, p->v - intr.cy));
    } else {
      worst_pp = INFINITY;
    }
    const Vec3 cam(coord(rng), coord(rng), std::abs(coord(rng)) + 0.5);
    const double k = scale(rng);
    const auto a = sg::project_camera(intr, cam, 0.0), b = sg::project_camera(intr, k * cam, 0.0);
    if (!a || !b) {
      worst_homog = INFINITY;
      continue;
    }
    worst_homog = std::max({worst_homog, std::abs(a->u - b->u) / std::max(1.0, std::abs(a->u)),
                            std::abs(a->v - b->v) / std::max(1.0, std::abs(a->v)),
                            std::abs(k * a->depth - b->depth) / b->depth});
  }
  return {tested == kGeometryPairs && worst_ortho < kOrthoTol && worst_pp < kPrincipalTol &&
              worst_homog < kHomogeneityTol,
          fmt("residual %.2e, principal point %.2e px, homogeneity %.2e", worst_ortho, worst_pp, worst_homog)};
}

Outcome visibility_soundness() {
  const auto planes = sgtest::make_two_planes();
  sg::RenderConfig pcfg;
  pcfg.width = planes.intr.width;
  pcfg.height = planes.intr.height;
  pcfg.splat_radius = 2;
  const auto pout = sg::render(planes.cloud, planes.pose, planes.intr, pcfg);
  const auto far = sg::compute_visibility(pout, planes.far_plane, planes.cloud, {.tol = kPlaneTol});
  const auto near = sg::compute_visibility(pout, planes.near_plane, planes.cloud, {.tol = kPlaneTol});
  const bool planes_ok = far.total_projected > 0 && far.visible_count == 0 && near.total_projected > 0 &&
                         near.visible_count == near.total_projected;

  std::mt19937_64 rng(1003);
  std::size_t agree = 0, total = 0, off_boundary = 0;
  const double tol = 0.05;
  for (int s = 0; s < kVisibilityScenes; ++s) {
    const auto cloud = sgtest::random_cloud(rng, 2000, Vec3::Zero(), 1.0);
    const auto pose = sgtest::random_pose(rng);
    sg::RenderConfig cfg;
    cfg.width = cfg.height = 96;
    cfg.splat_radius = 0;
    const auto intr = sg::intrinsics_from_fov(60, cfg.width, cfg.height);
    const auto out = sg::render(cloud, pose, intr, cfg);
    std::vector<std::uint32_t> sample;
    for (std::uint32_t i = s % 4; i < cloud.size(); i += 4) sample.push_back(i);
    const auto ref = sgtest::reference_visibility(cloud, sample, pose, intr, cfg.near, tol);
    for (std::size_t k = 0; k < sample.size(); ++k) {
      const sg::ObjectRecord one{static_cast<std::int64_t>(sample[k]), "point",
                                 sg::Aabb(cloud.points()[sample[k]], cloud.points()[sample[k]]),
                                 std::vector<std::uint32_t>{sample[k]}};
      const auto v = sg::compute_visibility(out, one, cloud, {.tol = tol});
      const std::optional<bool> got =
          v.total_projected == 0 ? std::nullopt : std::optional<bool>(v.visible_count > 0);
      ++total;
      if (got == ref[k]) {
        ++agree;
        continue;
      }
      // A disagreement is tolerated only right at the tolerance boundary.
      const auto p = sg::project(pose, intr, cloud.points()[sample[k]], cfg.near);
      const int u = static_cast<int>(std::floor(p ? p->u + 0.5 : -1)), vv = static_cast<int>(std::floor(p ? p->v + 0.5 : -1));
      const bool inside = p && u >= 0 && vv >= 0 && u < cfg.width && vv < cfg.height;
      if (!inside || std::abs(p->depth - (out.depth[static_cast<std::size_t>(vv) * cfg.width + u] + tol)) > kBoundaryBand)
        ++off_boundary;
    }
  }
  const double agreement = total ? static_cast<double>(agree) / total : 0.0;
  return {planes_ok && agreement >= kMinPointAgreement && off_boundary == 0,
          fmt("far %.0f/%.0f visible, ", far.visible_count, far.total_projected) +
              fmt("near %.0f/%.0f visible, ", near.visible_count, near.total_projected) +
              fmt("point agreement %.4f over %.0f points, %.0f off-boundary", agreement, total, off_boundary)};
}

Outcome compositing_exactness() {
  std::mt19937_64 rng(1004);
  std::uniform_int_distribution<int> byte(0, 255), pos(-10, 170), id(0, 999), rad(3, 24), nmark(1, 8);
  sg::MarkerStyle style;
  int sets_ok = 0;
  std::size_t outside_bad = 0, inside_bad = 0;
  bool identity = true;
  for (int t = 0; t < kCompositeSets; ++t) {
    sg::RgbImage img(160, 120);
    for (auto& p : img.pixels())
      p = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
           static_cast<std::uint8_t>(byte(rng))};
    identity = identity && sg::composite_prompts(img, {}).color == img;
    std::vector<sg::MarkerSpec> ms;
    const int n = nmark(rng);
    for (int k = 0; k < n; ++k) {
      sg::MarkerSpec m;
      m.object_id = id(rng);
      m.center = {pos(rng), pos(rng)};
      m.radius = rad(rng);
      m.fill = style.fill;
      m.border = style.border;
      m.text = style.text;
      m.label_text = std::to_string(m.object_id);
      ms.push_back(m);
    }
    const auto out = sg::composite_prompts(img, ms).color;
    const auto ref = sgtest::reference_composite(img, ms);
    bool ok = true;
    for (int v = 0; v < img.height(); ++v)
      for (int u = 0; u < img.width(); ++u) {
        bool covered = false;
        for (const auto& m : ms) {
          const double du = u - m.center.u, dv = v - m.center.v;
          covered = covered || du * du + dv * dv <= (m.radius + 2.0) * (m.radius + 2.0);
        }
        if (!covered && !(out.at(u, v) == img.at(u, v))) {
          ++outside_bad;
          ok = false;
        }
        if (covered && !(out.at(u, v) == ref.at(u, v))) {
          ++inside_bad;
          ok = false;
        }
      }
    sets_ok += ok;
  }
  return {identity && sets_ok == kCompositeSets,
          fmt("%.0f/%.0f random sets exact, %.0f outside mismatches, ", sets_ok, kCompositeSets, outside_bad) +
              fmt("%.0f stamp mismatches, zero-marker identity ", inside_bad) + (identity ? "holds" : "broken")};
}

Outcome iou_metric() {
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> shift(-50, 50), scale(0.05, 20);
  double worst_inv = 0, worst_grid = 0;
  for (int i = 0; i < kIouPairs; ++i) {
    const auto a = sgtest::random_box(rng, 2.0, 3.0), b = sgtest::random_box(rng, 2.0, 3.0);
    const double iou = sg::iou_aabb(a, b);
    const Vec3 d(shift(rng), shift(rng), shift(rng));
    const double k = scale(rng);
    const sg::Aabb ta(a.min + d, a.max + d), tb(b.min + d, b.max + d);
    const sg::Aabb sa(k * a.min, k * a.max), sb(k * b.min, k * b.max);
    worst_inv = std::max({worst_inv, std::abs(iou - sg::iou_aabb(b, a)), std::abs(iou - sg::iou_aabb(ta, tb)),
                          std::abs(iou - sg::iou_aabb(sa, sb))});
    worst_grid = std::max(worst_grid, std::abs(iou - sgtest::grid_iou(a, b)));
  }
  const sg::Aabb unit(Vec3::Zero(), Vec3::Ones()), half(Vec3(0.5, 0, 0), Vec3(1.5, 1, 1));
  const double third = sg::iou_aabb(unit, half);
  return {worst_inv <= kInvarianceTol && worst_grid <= kGridTol && std::abs(third - 1.0 / 3.0) <= kInvarianceTol,
          fmt("invariance %.2e, grid oracle %.4f, half-offset cube %.15f", worst_inv, worst_grid, third)};
}

Outcome end_to_end_ceiling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = sg::make_grounding_suite();
  const auto dir = sgtest::scratch_dir("acceptance_ceiling");
  sg::write_suite(suite, dir);
  sg::SceneCache cache(dir);
  sg::OracleBackend oracle(sg::oracle_truth(suite.queries, cache));
  const sg::PipelineConfig cfg;
  sg::BenchmarkOptions opts;
  const auto scan = sg::run_benchmark(suite.queries, dir, oracle, cfg, opts);
  opts.mode = sg::EvalMode::nr3d;
  const auto nr3d = sg::run_benchmark(suite.queries, dir, oracle, cfg, opts);
  const double secs = seconds_since(t0);
  const auto* s = scan.report.row("overall");
  const auto* n = nr3d.report.row("overall");
  const bool ok = suite.scenes.size() == 3 && suite.queries.size() == 20 && s && n && s->n == 20 &&
                  s->correct_50 == s->n && n->correct == n->n && secs < kCeilingBudgetS;
  return {ok, fmt("Acc@0.5 %.1f%%, Nr3D accuracy %.1f%%, %.1f s", s ? 100 * s->acc_at_50() : 0,
                  n ? 100 * n->accuracy() : 0, secs)};
}

Outcome determinism() {
  const auto suite = sg::make_grounding_suite();
  const auto dir = sgtest::scratch_dir("acceptance_determinism");
  sg::write_suite(suite, dir);
  sg::PipelineConfig cfg;
  sg::HeuristicBackend heuristic;
  sg::BenchmarkOptions rec;
  rec.transcript_path = dir / "recording.jsonl";
  sg::run_benchmark(suite.queries, dir, heuristic, cfg, rec);
  sg::RecordedBackend replay(sg::load_transcript(dir / "recording.jsonl"));
  std::vector<std::string> hashes;
  for (int conc : {1, 1, 4, 4}) {
    cfg.concurrency = conc;
    hashes.push_back(sg::run_benchmark(suite.queries, dir, replay, cfg).manifest_hash);
  }
  bool same = true;
  for (const auto& h : hashes) same = same && h == hashes.front();
  return {same, "manifest " + hashes.front().substr(0, 16) + (same ? " for all four runs" : " differs across runs")};
}

Outcome strategy_direction() {
  const auto suite = sg::make_view_dependent_suite();
  const auto dir = sgtest::scratch_dir("acceptance_views");
  sg::write_suite(suite, dir);
  sg::HeuristicBackend heuristic;
  sg::BenchmarkOptions opts;
  opts.mode = sg::EvalMode::nr3d;
  sg::PipelineConfig qa;
  sg::PipelineConfig bev;
  bev.strategy = sg::ViewpointStrategy::BirdsEyeView;
  const double acc_qa = sg::run_benchmark(suite.queries, dir, heuristic, qa, opts).report.row("overall")->accuracy();
  const double acc_bev = sg::run_benchmark(suite.queries, dir, heuristic, bev, opts).report.row("overall")->accuracy();
  return {!suite.queries.empty() && acc_qa >= acc_bev,
          fmt("query-aligned %.1f%% vs bird's-eye %.1f%% over %.0f queries", 100 * acc_qa, 100 * acc_bev,
              static_cast<double>(suite.queries.size()))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rasterizer oracle equivalence", rasterizer_equivalence},
      {"geometry suite", geometry_suite},
      {"visibility soundness", visibility_soundness},
      {"compositing exactness", compositing_exactness},
      {"IoU metric", iou_metric},
      {"end-to-end ceiling", end_to_end_ceiling},
      {"determinism", determinism},
      {"strategy ablation direction", strategy_direction},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
