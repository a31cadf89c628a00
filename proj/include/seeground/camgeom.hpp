#pragma once

#include <optional>

#include <Eigen/Core>

#include "seeground/scene_model.hpp"

namespace seeground {

using Mat3 = Eigen::Matrix3d;

/// Extrinsics: p_cam = rotation * p_world + translation.
/// Camera frame is z-forward, x-right, y-down.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 eye() const { return -rotation.transpose() * translation; }
  Vec3 forward() const { return rotation.row(2).transpose(); }
};

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
};

struct Projection {
  double u = 0, v = 0;
  double depth = 0;
};

inline constexpr double kDefaultNear = 0.05;
inline const Vec3 kWorldUp{0.0, 0.0, 1.0};
inline const Vec3 kFallbackUp{0.0, 1.0, 0.0};

/// Throws Errc::invalid_argument("degenerate up") when forward is parallel to `up`,
/// and for coincident eye/target.
CameraPose look_at_view_transform(const Vec3& eye, const Vec3& target, const Vec3& up = kWorldUp);

/// Tries `up`, then kFallbackUp if the first is degenerate.
CameraPose look_at_with_fallback(const Vec3& eye, const Vec3& target, const Vec3& up = kWorldUp);

Intrinsics intrinsics_from_fov(double fov_deg, int width, int height);

/// Empty when the point is not in front of the near plane. That is an expected
/// filter outcome, not a fault.
std::optional<Projection> project(const CameraPose& pose, const Intrinsics& intr, const Vec3& world,
                                  double near = kDefaultNear);

/// Projection of a point already in camera coordinates.
std::optional<Projection> project_camera(const Intrinsics& intr, const Vec3& cam, double near = kDefaultNear);

/// max |R^T R - I| and |det R - 1|.
double orthonormality_residual(const Mat3& rotation);

}  // namespace seeground
