#include "seeground/camgeom.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "seeground/error.hpp"

namespace seeground {

CameraPose look_at_view_transform(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 delta = target - eye;
  if (delta.norm() <= 1e-6) throw Error(Errc::invalid_argument, "look_at: eye and target coincide");
  if (up.norm() == 0.0) throw Error(Errc::invalid_argument, "look_at: zero up vector");
  const Vec3 forward = delta.normalized();
  const Vec3 side = forward.cross(up.normalized());
  if (side.norm() < 1e-6) throw Error(Errc::invalid_argument, "degenerate up");
  const Vec3 right = side.normalized();
  const Vec3 down = forward.cross(right);

  CameraPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  return pose;
}

CameraPose look_at_with_fallback(const Vec3& eye, const Vec3& target, const Vec3& up) {
  try {
    return look_at_view_transform(eye, target, up);
  } catch (const Error& e) {
    if (std::string_view(e.what()) != "degenerate up") throw;
    return look_at_view_transform(eye, target, kFallbackUp);
  }
}

Intrinsics intrinsics_from_fov(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0))
    throw Error(Errc::invalid_argument, "field of view must be in (0, 180) degrees");
  if (width < 1 || height < 1) throw Error(Errc::invalid_argument, "image size must be positive");
  const double half = fov_deg * std::numbers::pi / 360.0;
  Intrinsics k;
  k.fy = (height / 2.0) / std::tan(half);
  k.fx = k.fy;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

std::optional<Projection> project_camera(const Intrinsics& intr, const Vec3& cam, double near) {
  if (!(cam.z() > near)) return std::nullopt;
  return Projection{intr.fx * cam.x() / cam.z() + intr.cx, intr.fy * cam.y() / cam.z() + intr.cy, cam.z()};
}

std::optional<Projection> project(const CameraPose& pose, const Intrinsics& intr, const Vec3& world, double near) {
  return project_camera(intr, pose.to_camera(world), near);
}

double orthonormality_residual(const Mat3& rotation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

}  // namespace seeground
