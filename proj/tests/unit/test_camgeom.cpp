#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "oracles.hpp"
#include "seeground/camgeom.hpp"
#include "seeground/error.hpp"

namespace sg = seeground;
using sg::Vec3;

namespace {

double residual(const sg::Mat3& r) {
  double worst = std::abs(r.determinant() - 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(r.col(i).dot(r.col(j)) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace

TEST_CASE("look_at along +x with z up") {
  const auto pose = sg::look_at_view_transform(Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 0, 1));
  // forward (1,0,0); right = forward x up = (0,-1,0); down = forward x right = (0,0,-1)
  CHECK((pose.rotation.row(2).transpose() - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((pose.rotation.row(0).transpose() - Vec3(0, -1, 0)).norm() < 1e-15);
  CHECK((pose.rotation.row(1).transpose() - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK((pose.to_camera(Vec3(0, 0, 1))).norm() < 1e-15);
  CHECK((pose.eye() - Vec3(0, 0, 1)).norm() < 1e-15);
  // A point above the target lands above the image center.
  const auto k = sg::intrinsics_from_fov(60, 100, 100);
  const auto p = sg::project(pose, k, Vec3(2, 0, 2));
  REQUIRE(p);
  CHECK(p->v < k.cy);
  // A point on the camera's left (+y world) lands left of center.
  CHECK(sg::project(pose, k, Vec3(2, 0.5, 1))->u < k.cx);
}

TEST_CASE("look_at rejects degenerate inputs") {
  try {
    sg::look_at_view_transform(Vec3(0, 0, 0), Vec3(0, 0, 5), Vec3(0, 0, 1));
    FAIL("expected degenerate up");
  } catch (const sg::Error& e) {
    CHECK(std::string(e.what()) == "degenerate up");
  }
  CHECK_THROWS_AS(sg::look_at_view_transform(Vec3(1, 1, 1), Vec3(1, 1, 1)), sg::Error);
  CHECK_THROWS_AS(sg::look_at_view_transform(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3::Zero()), sg::Error);

  const auto pose = sg::look_at_with_fallback(Vec3(0, 0, 5), Vec3(0, 0, 0));
  CHECK(residual(pose.rotation) < 1e-12);
  CHECK((pose.forward() - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("look_at properties over random pairs") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-10, 10);
  const auto k = sg::intrinsics_from_fov(60, 640, 480);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 eye(u(rng), u(rng), u(rng)), target(u(rng), u(rng), u(rng));
    if ((target - eye).norm() < 1e-3) continue;
    const auto pose = sg::look_at_with_fallback(eye, target);
    CHECK(residual(pose.rotation) < 1e-9);
    CHECK(sg::orthonormality_residual(pose.rotation) < 1e-9);
    const auto p = sg::project(pose, k, target, 1e-9);
    REQUIRE(p);
    CHECK(std::abs(p->u - k.cx) < 1e-6);
    CHECK(std::abs(p->v - k.cy) < 1e-6);
    CHECK(std::abs(p->depth - (target - eye).norm()) < 1e-9);
    const auto doubled = sg::look_at_with_fallback(eye, eye + 2.0 * (target - eye));
    CHECK((doubled.rotation - pose.rotation).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("intrinsics from field of view") {
  const auto k90 = sg::intrinsics_from_fov(90, 1000, 1000);
  CHECK(k90.fx == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(k90.fy == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(k90.cx == 500.0);
  CHECK(k90.cy == 500.0);
  const auto k60 = sg::intrinsics_from_fov(60, 1000, 1000);
  CHECK(std::abs(k60.fy - 500.0 / std::tan(M_PI / 6)) < 1e-9);
  CHECK(std::abs(k60.fy - 866.0254) < 1e-4);
  CHECK(k60.fx == k60.fy);
  CHECK_THROWS_AS(sg::intrinsics_from_fov(0, 1000, 1000), sg::Error);
  CHECK_THROWS_AS(sg::intrinsics_from_fov(180, 1000, 1000), sg::Error);
  CHECK_THROWS_AS(sg::intrinsics_from_fov(60, 0, 1000), sg::Error);
}

TEST_CASE("pinhole projection") {
  sg::Intrinsics k;
  k.fx = k.fy = 500;
  k.cx = k.cy = 500;
  k.width = k.height = 1000;
  const auto p = sg::project_camera(k, Vec3(1, 0, 2));
  REQUIRE(p);
  CHECK(p->u == 750.0);
  CHECK(p->v == 500.0);
  CHECK(p->depth == 2.0);

  const auto axis = sg::project_camera(k, Vec3(0, 0, 2));
  CHECK(axis->u == k.cx);
  CHECK(axis->v == k.cy);
  CHECK(axis->depth == 2.0);

  CHECK_FALSE(sg::project_camera(k, Vec3(0, 0, -1)));
  CHECK_FALSE(sg::project_camera(k, Vec3(0, 0, 0.05)));
  CHECK(sg::project_camera(k, Vec3(0, 0, 0.0500001)));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3), z(0.1, 10);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 c(u(rng), u(rng), z(rng));
    const auto a = sg::project_camera(k, c), b = sg::project_camera(k, 2.0 * c);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(std::abs(a->u - b->u) < 1e-9);
    CHECK(std::abs(a->v - b->v) < 1e-9);
  }
}
