#include "seeground/renderer.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "seeground/error.hpp"

namespace seeground {

void RenderConfig::validate() const {
  if (width < 1 || height < 1) throw Error(Errc::invalid_argument, "render size must be at least 1x1");
  if (splat_radius < 0) throw Error(Errc::invalid_argument, "splat_radius must be >= 0");
  if (!(near > 0.0)) throw Error(Errc::invalid_argument, "near plane must be > 0");
  if (!(ceiling_margin >= 0.0)) throw Error(Errc::invalid_argument, "ceiling_margin must be >= 0");
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

namespace {

struct Offset {
  int du, dv;
};

std::vector<Offset> disc_offsets(int radius) {
  std::vector<Offset> out;
  for (int dv = -radius; dv <= radius; ++dv)
    for (int du = -radius; du <= radius; ++du)
      if (du * du + dv * dv <= radius * radius) out.push_back({du, dv});
  return out;
}

// Packs (depth, index) so that unsigned comparison orders by depth, then index.
// Positive IEEE floats compare like their bit patterns.
std::uint64_t pack(float depth, std::uint32_t index) {
  return (static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(depth)) << 32) | index;
}

constexpr std::uint64_t kEmptyKey = ~std::uint64_t{0};

struct SplatCenter {
  int u, v;
  float depth;
};

// Shared by both render paths so they agree on the pixel each point lands on.
std::optional<SplatCenter> splat_center(const CameraPose& pose, const Intrinsics& intr, const Vec3& p, double near,
                                        int radius) {
  const auto proj = project(pose, intr, p, near);
  if (!proj) return std::nullopt;
  const double margin = radius + 1.0;
  if (!(proj->u > -margin && proj->u < intr.width + margin && proj->v > -margin && proj->v < intr.height + margin))
    return std::nullopt;
  return SplatCenter{round_half_up(proj->u), round_half_up(proj->v), static_cast<float>(proj->depth)};
}

void check_inputs(const PointCloud& cloud, const Intrinsics& intr, const RenderConfig& cfg) {
  cfg.validate();
  if (intr.width != cfg.width || intr.height != cfg.height)
    throw Error(Errc::invalid_argument, "intrinsics size does not match render config");
  if (cloud.size() >= kEmptyKey >> 32)
    throw Error(Errc::invalid_argument, "point cloud too large for 32-bit point indices");
}

RenderOutput resolve(const std::vector<std::uint64_t>& keys, const PointCloud& cloud, const CameraPose& pose,
                     const Intrinsics& intr, const RenderConfig& cfg) {
  RenderOutput out;
  out.color = RgbImage(cfg.width, cfg.height, cfg.background);
  out.depth.assign(keys.size(), kEmptyDepth);
  out.pose = pose;
  out.intr = intr;
  out.near = cfg.near;
  auto& pixels = out.color.pixels();
  const auto n = static_cast<std::int64_t>(keys.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint64_t key = keys[i];
    if (key == kEmptyKey) continue;
    out.depth[i] = std::bit_cast<float>(static_cast<std::uint32_t>(key >> 32));
    pixels[i] = cloud.colors()[static_cast<std::uint32_t>(key)];
  }
  return out;
}

}  // namespace

RenderOutput render(const PointCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                    const RenderConfig& cfg) {
  check_inputs(cloud, intr, cfg);
  const auto offsets = disc_offsets(cfg.splat_radius);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(cfg.width) * cfg.height, kEmptyKey);
  const auto& pts = cloud.points();
  const auto n = static_cast<std::int64_t>(cloud.size());

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto c = splat_center(pose, intr, pts[i], cfg.near, cfg.splat_radius);
    if (!c) continue;
    const std::uint64_t key = pack(c->depth, static_cast<std::uint32_t>(i));
    for (const auto& o : offsets) {
      const int u = c->u + o.du;
      const int v = c->v + o.dv;
      if (u < 0 || v < 0 || u >= cfg.width || v >= cfg.height) continue;
      std::atomic_ref<std::uint64_t> slot(keys[static_cast<std::size_t>(v) * cfg.width + u]);
      std::uint64_t cur = slot.load(std::memory_order_relaxed);
      while (key < cur && !slot.compare_exchange_weak(cur, key, std::memory_order_relaxed)) {
      }
    }
  }
  return resolve(keys, cloud, pose, intr, cfg);
}

RenderOutput render_serial(const PointCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                           const RenderConfig& cfg) {
  check_inputs(cloud, intr, cfg);
  const auto offsets = disc_offsets(cfg.splat_radius);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(cfg.width) * cfg.height, kEmptyKey);
  const auto& pts = cloud.points();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = splat_center(pose, intr, pts[i], cfg.near, cfg.splat_radius);
    if (!c) continue;
    const std::uint64_t key = pack(c->depth, static_cast<std::uint32_t>(i));
    for (const auto& o : offsets) {
      const int u = c->u + o.du;
      const int v = c->v + o.dv;
      if (u < 0 || v < 0 || u >= cfg.width || v >= cfg.height) continue;
      auto& slot = keys[static_cast<std::size_t>(v) * cfg.width + u];
      slot = std::min(slot, key);
    }
  }
  return resolve(keys, cloud, pose, intr, cfg);
}

std::optional<double> depth_at(const RenderOutput& out, int u, int v) {
  if (!out.color.in_bounds(u, v))
    throw Error(Errc::invalid_argument,
                "pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") outside the rendered image");
  const float d = out.depth_raw(u, v);
  if (std::isinf(d)) return std::nullopt;
  return static_cast<double>(d);
}

void save_image(const RenderOutput& out, const std::filesystem::path& path) { save_png(out.color, path); }

void save_depth(const RenderOutput& out, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "depth dump assumes a little-endian host");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot write depth dump '" + path.string() + "'");
  f.write(reinterpret_cast<const char*>(out.depth.data()), static_cast<std::streamsize>(out.depth.size() * sizeof(float)));
  if (!f) throw Error(Errc::io, "short write to '" + path.string() + "'");
}

}  // namespace seeground
