#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "seeground/camgeom.hpp"
#include "seeground/image.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {

struct RenderConfig {
  int width = 1000;
  int height = 1000;
  int splat_radius = 2;
  double near = kDefaultNear;
  Rgb background{255, 255, 255};
  double ceiling_margin = 0.3;

  void validate() const;
};

/// Rendered view. Depth is float32 meters, +inf where nothing was splatted.
struct RenderOutput {
  RgbImage color;
  std::vector<float> depth;
  CameraPose pose;
  Intrinsics intr;
  double near = kDefaultNear;

  int width() const noexcept { return color.width(); }
  int height() const noexcept { return color.height(); }
  float depth_raw(int u, int v) const { return depth[static_cast<std::size_t>(v) * color.width() + u]; }
};

inline constexpr float kEmptyDepth = std::numeric_limits<float>::infinity();

/// Continuous pixel coordinate to integer pixel, rounding half up.
int round_half_up(double x);

/// Point-splat z-buffer render, OpenMP-parallel over points. Output is
/// independent of the thread schedule: per pixel the winner is the smallest
/// (float depth, point index) pair.
RenderOutput render(const PointCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                    const RenderConfig& cfg);

/// Single-threaded reference with the same contract as `render`.
RenderOutput render_serial(const PointCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                           const RenderConfig& cfg);

/// Empty for background pixels; throws Errc::invalid_argument out of bounds.
std::optional<double> depth_at(const RenderOutput& out, int u, int v);

void save_image(const RenderOutput& out, const std::filesystem::path& path);

/// Raw float32, row-major, little-endian.
void save_depth(const RenderOutput& out, const std::filesystem::path& path);

}  // namespace seeground
