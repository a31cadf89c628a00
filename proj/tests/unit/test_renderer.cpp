#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "seeground/error.hpp"
#include "seeground/renderer.hpp"
#include "seeground/util.hpp"

namespace sg = seeground;
using sg::Vec3;

namespace {

struct Camera {
  sg::CameraPose pose;
  sg::Intrinsics intr;
  sg::RenderConfig cfg;
};

// Camera at the origin looking along +z, 101x101 so the principal point is a pixel center.
Camera axis_camera(int radius) {
  Camera c;
  c.pose = sg::look_at_view_transform(Vec3::Zero(), Vec3(0, 0, 1), sg::kFallbackUp);
  c.cfg.width = c.cfg.height = 101;
  c.cfg.splat_radius = radius;
  c.intr = sg::intrinsics_from_fov(60, 101, 101);
  c.intr.cx = c.intr.cy = 50;
  return c;
}

std::size_t non_background(const sg::RenderOutput& out, sg::Rgb bg) {
  std::size_t n = 0;
  for (const auto& p : out.color.pixels()) n += !(p == bg);
  return n;
}

}  // namespace

TEST_CASE("single point on the optical axis") {
  const auto cam = axis_camera(0);
  const sg::PointCloud cloud({Vec3(0, 0, 2)}, {{255, 0, 0}});
  const auto out = sg::render(cloud, cam.pose, cam.intr, cam.cfg);
  CHECK(non_background(out, cam.cfg.background) == 1);
  CHECK(out.color.at(50, 50) == sg::Rgb{255, 0, 0});
  CHECK(sg::depth_at(out, 50, 50) == 2.0);
  CHECK_FALSE(sg::depth_at(out, 0, 0));
  CHECK_THROWS_AS(sg::depth_at(out, -1, 0), sg::Error);
  CHECK_THROWS_AS(sg::depth_at(out, 0, 101), sg::Error);

  const auto wide = sg::render(cloud, cam.pose, cam.intr, axis_camera(2).cfg);
  CHECK(non_background(wide, cam.cfg.background) == 13);  // integer offsets with norm <= 2
}

TEST_CASE("z-buffer keeps the nearest point and breaks ties by index") {
  const auto cam = axis_camera(0);
  const sg::PointCloud cloud({Vec3(0, 0, 2), Vec3(0, 0, 1)}, {{0, 0, 255}, {0, 255, 0}});
  const auto out = sg::render(cloud, cam.pose, cam.intr, cam.cfg);
  CHECK(out.color.at(50, 50) == sg::Rgb{0, 255, 0});
  CHECK(sg::depth_at(out, 50, 50) == 1.0);

  const sg::PointCloud tie({Vec3(0, 0, 1.5), Vec3(0, 0, 1.5)}, {{9, 9, 9}, {7, 7, 7}});
  CHECK(sg::render(tie, cam.pose, cam.intr, cam.cfg).color.at(50, 50) == sg::Rgb{9, 9, 9});
}

TEST_CASE("half-up rounding of pixel centers") {
  CHECK(sg::round_half_up(0.5) == 1);
  CHECK(sg::round_half_up(1.49) == 1);
  CHECK(sg::round_half_up(-0.5) == 0);
  CHECK(sg::round_half_up(-0.51) == -1);
  CHECK(sg::round_half_up(2.5) == 3);
}

TEST_CASE("radius 0 render matches the per-pixel argmin reference") {
  std::mt19937_64 rng(2024);
  for (int s = 0; s < 10; ++s) {
    const auto cloud = sgtest::random_cloud(rng, 1000, Vec3::Zero(), 1.0);
    const auto pose = sgtest::random_pose(rng);
    sg::RenderConfig cfg;
    cfg.width = 160;
    cfg.height = 120;
    cfg.splat_radius = 0;
    const auto intr = sg::intrinsics_from_fov(50, cfg.width, cfg.height);
    const auto out = sg::render(cloud, pose, intr, cfg);
    const auto ref = sgtest::reference_render(cloud, pose, intr, cfg.near, cfg.background);
    CHECK(out.color == ref.color);
    CHECK(std::memcmp(out.depth.data(), ref.depth.data(), out.depth.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("parallel and serial renders are bit-identical") {
  std::mt19937_64 rng(99);
  for (int radius : {0, 1, 3}) {
    const auto cloud = sgtest::random_cloud(rng, 20000, Vec3::Zero(), 1.0);
    const auto pose = sgtest::random_pose(rng);
    sg::RenderConfig cfg;
    cfg.width = cfg.height = 200;
    cfg.splat_radius = radius;
    const auto intr = sg::intrinsics_from_fov(60, 200, 200);
    const auto a = sg::render(cloud, pose, intr, cfg);
    const auto b = sg::render_serial(cloud, pose, intr, cfg);
    const auto c = sg::render(cloud, pose, intr, cfg);
    CHECK(a.color == b.color);
    CHECK(a.depth == b.depth);
    CHECK(a.color == c.color);
  }
}

TEST_CASE("every covered pixel holds the minimum depth of the splats over it") {
  std::mt19937_64 rng(17);
  const auto cloud = sgtest::random_cloud(rng, 400, Vec3::Zero(), 1.0);
  const auto pose = sgtest::random_pose(rng);
  sg::RenderConfig cfg;
  cfg.width = cfg.height = 80;
  cfg.splat_radius = 2;
  const auto intr = sg::intrinsics_from_fov(60, 80, 80);
  const auto out = sg::render(cloud, pose, intr, cfg);
  std::vector<float> best(80 * 80, std::numeric_limits<float>::infinity());
  for (const auto& p : cloud.points()) {
    const auto proj = sg::project(pose, intr, p);
    if (!proj) continue;
    const int cu = static_cast<int>(std::floor(proj->u + 0.5)), cv = static_cast<int>(std::floor(proj->v + 0.5));
    for (int dv = -2; dv <= 2; ++dv)
      for (int du = -2; du <= 2; ++du) {
        const int u = cu + du, v = cv + dv;
        if (du * du + dv * dv > 4 || u < 0 || v < 0 || u >= 80 || v >= 80) continue;
        best[v * 80 + u] = std::min(best[v * 80 + u], static_cast<float>(proj->depth));
      }
  }
  CHECK(out.depth == best);
  for (std::size_t i = 0; i < best.size(); ++i) {
    if (std::isinf(out.depth[i])) CHECK(out.color.pixels()[i] == cfg.background);
    else CHECK(out.depth[i] >= cfg.near);
  }
}

TEST_CASE("empty view is background everywhere") {
  const auto cam = axis_camera(2);
  auto cfg = cam.cfg;
  cfg.background = {10, 20, 30};
  const sg::PointCloud behind({Vec3(0, 0, -1)}, {{255, 0, 0}});
  const auto out = sg::render(behind, cam.pose, cam.intr, cfg);
  CHECK(non_background(out, cfg.background) == 0);
  for (float d : out.depth) CHECK(std::isinf(d));

  const auto dir = sgtest::scratch_dir("bg");
  sg::save_image(out, dir / "bg.png");
  const auto img = sg::load_png(dir / "bg.png");
  CHECK(img == out.color);
}

TEST_CASE("png round-trip and io errors") {
  std::mt19937_64 rng(1);
  const auto cloud = sgtest::random_cloud(rng, 5000, Vec3::Zero(), 1.0);
  const auto pose = sgtest::random_pose(rng);
  sg::RenderConfig cfg;
  cfg.width = 64;
  cfg.height = 48;
  const auto intr = sg::intrinsics_from_fov(60, 64, 48);
  const auto out = sg::render(cloud, pose, intr, cfg);
  const auto dir = sgtest::scratch_dir("png");
  sg::save_image(out, dir / "r.png");
  CHECK(sg::load_png(dir / "r.png") == out.color);
  CHECK(sg::decode_png(sg::encode_png(out.color)) == out.color);

  sg::save_depth(out, dir / "d.bin");
  const auto raw = sg::read_file(dir / "d.bin");
  REQUIRE(raw.size() == out.depth.size() * 4);
  CHECK(std::memcmp(raw.data(), out.depth.data(), raw.size()) == 0);

  CHECK_THROWS_AS(sg::save_image(out, "/proc/seeground/denied.png"), sg::Error);
  CHECK_THROWS_AS(sg::decode_png("not a png"), sg::Error);
}

TEST_CASE("rendering a cropped cloud equals deleting the points above the threshold") {
  std::mt19937_64 rng(8);
  const auto cloud = sgtest::random_cloud(rng, 3000, Vec3(0, 0, 1.5), 1.5);
  const double threshold = cloud.max_z() - 0.3;
  std::vector<Vec3> pts;
  std::vector<sg::Rgb> cols;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.points()[i].z() < threshold) {
      pts.push_back(cloud.points()[i]);
      cols.push_back(cloud.colors()[i]);
    }
  const sg::PointCloud manual(pts, cols);
  const auto pose = sg::look_at_view_transform(Vec3(4, 3, 2), Vec3(0, 0, 1.2));
  sg::RenderConfig cfg;
  cfg.width = cfg.height = 120;
  const auto intr = sg::intrinsics_from_fov(60, 120, 120);
  const auto a = sg::render(sg::crop_ceiling(cloud, 0.3), pose, intr, cfg);
  const auto b = sg::render(manual, pose, intr, cfg);
  CHECK(a.color == b.color);
  CHECK(a.depth == b.depth);
}

TEST_CASE("render config validation") {
  const auto cam = axis_camera(0);
  const sg::PointCloud cloud({Vec3(0, 0, 2)}, {{}});
  auto cfg = cam.cfg;
  cfg.splat_radius = -1;
  CHECK_THROWS_AS(sg::render(cloud, cam.pose, cam.intr, cfg), sg::Error);
  cfg = cam.cfg;
  cfg.width = 100;
  CHECK_THROWS_AS(sg::render(cloud, cam.pose, cam.intr, cfg), sg::Error);
  cfg = cam.cfg;
  cfg.near = 0;
  CHECK_THROWS_AS(sg::render(cloud, cam.pose, cam.intr, cfg), sg::Error);
}
