#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include <unistd.h>

namespace sgtest {

namespace sg = seeground;

namespace {

struct Binned {
  int u, v;
  float depth;
};

std::optional<Binned> bin(const sg::CameraPose& pose, const sg::Intrinsics& intr, const Vec3& p, double near) {
  const auto proj = sg::project(pose, intr, p, near);
  if (!proj) return std::nullopt;
  const double fu = std::floor(proj->u + 0.5), fv = std::floor(proj->v + 0.5);
  if (fu < 0 || fv < 0 || fu >= intr.width || fv >= intr.height) return std::nullopt;
  return Binned{static_cast<int>(fu), static_cast<int>(fv), static_cast<float>(proj->depth)};
}

}  // namespace

RefFrame reference_render(const sg::PointCloud& cloud, const sg::CameraPose& pose, const sg::Intrinsics& intr,
                          double near, sg::Rgb background) {
  const std::size_t npix = static_cast<std::size_t>(intr.width) * intr.height;
  std::vector<std::vector<std::size_t>> buckets(npix);
  std::vector<float> depth_of(cloud.size(), 0.0f);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto b = bin(pose, intr, cloud.points()[i], near);
    if (!b) continue;
    depth_of[i] = b->depth;
    buckets[static_cast<std::size_t>(b->v) * intr.width + b->u].push_back(i);
  }
  RefFrame f{sg::RgbImage(intr.width, intr.height, background),
             std::vector<float>(npix, std::numeric_limits<float>::infinity())};
  for (std::size_t p = 0; p < npix; ++p) {
    if (buckets[p].empty()) continue;
    std::size_t best = buckets[p].front();
    for (std::size_t i : buckets[p])
      if (depth_of[i] < depth_of[best] || (depth_of[i] == depth_of[best] && i < best)) best = i;
    f.depth[p] = depth_of[best];
    f.color.pixels()[p] = cloud.colors()[best];
  }
  return f;
}

std::vector<std::optional<bool>> reference_visibility(const sg::PointCloud& cloud,
                                                      const std::vector<std::uint32_t>& object_points,
                                                      const sg::CameraPose& pose, const sg::Intrinsics& intr,
                                                      double near, double tol) {
  const auto frame = reference_render(cloud, pose, intr, near, {});
  std::vector<std::optional<bool>> out;
  out.reserve(object_points.size());
  for (auto i : object_points) {
    const auto proj = sg::project(pose, intr, cloud.points()[i], near);
    const auto b = bin(pose, intr, cloud.points()[i], near);
    if (!proj || !b) {
      out.emplace_back();
      continue;
    }
    const double rendered = frame.depth[static_cast<std::size_t>(b->v) * intr.width + b->u];
    out.emplace_back(proj->depth <= rendered + tol);
  }
  return out;
}

sg::RgbImage reference_composite(const sg::RgbImage& image, std::vector<sg::MarkerSpec> markers) {
  std::stable_sort(markers.begin(), markers.end(),
                   [](const sg::MarkerSpec& a, const sg::MarkerSpec& b) { return a.object_id < b.object_id; });
  sg::RgbImage out = image;
  for (int v = 0; v < image.height(); ++v) {
    for (int u = 0; u < image.width(); ++u) {
      // The last marker whose stamp covers the pixel decides it.
      for (auto it = markers.rbegin(); it != markers.rend(); ++it) {
        const auto& m = *it;
        const double d = std::hypot(u - m.center.u, v - m.center.v);
        if (d > m.radius + 2) continue;
        if (d > m.radius) {
          out.at(u, v) = m.border;
          break;
        }
        const int n = static_cast<int>(m.label_text.size());
        int scale = 1;
        for (int s : {3, 2}) {
          const double w = (6.0 * n - 1.0) * s, h = 7.0 * s;
          if (std::sqrt(w * w + h * h) / 2.0 <= m.radius) {
            scale = s;
            break;
          }
        }
        const int bw = (6 * n - 1) * scale, bh = 7 * scale;
        const int x = u - (m.center.u - bw / 2), y = v - (m.center.v - bh / 2);
        bool ink = false;
        if (n > 0 && x >= 0 && y >= 0 && x < bw && y < bh) {
          const int col = x / scale, row = y / scale;
          if (col % 6 != 5) {
            const auto& rows = sg::glyph_rows(m.label_text[col / 6]);
            ink = rows[row] & (0x10 >> (col % 6));
          }
        }
        out.at(u, v) = ink ? m.text : m.fill;
        break;
      }
    }
  }
  return out;
}

namespace {

// Midpoints of `cells` equal slices of [lo, hi] that fall inside [a, b].
long count_inside(double lo, double hi, int cells, double a, double b) {
  long n = 0;
  const double step = (hi - lo) / cells;
  for (int i = 0; i < cells; ++i) {
    const double x = lo + (i + 0.5) * step;
    if (x >= a && x <= b) ++n;
  }
  return n;
}

}  // namespace

double grid_iou(const sg::Aabb& a, const sg::Aabb& b, int cells) {
  long in_a = 1, in_b = 1, in_both = 1;
  for (int k = 0; k < 3; ++k) {
    const double lo = std::min(a.min[k], b.min[k]), hi = std::max(a.max[k], b.max[k]);
    in_a *= count_inside(lo, hi, cells, a.min[k], a.max[k]);
    in_b *= count_inside(lo, hi, cells, b.min[k], b.max[k]);
    in_both *= count_inside(lo, hi, cells, std::max(a.min[k], b.min[k]), std::min(a.max[k], b.max[k]));
  }
  const long uni = in_a + in_b - in_both;
  return uni > 0 ? static_cast<double>(in_both) / uni : 0.0;
}

double grid_iou_3d(const sg::Aabb& a, const sg::Aabb& b, int cells) {
  const Vec3 lo = a.min.cwiseMin(b.min), hi = a.max.cwiseMax(b.max);
  const Vec3 step = (hi - lo) / cells;
  long in_both = 0, in_any = 0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      for (int k = 0; k < cells; ++k) {
        const Vec3 p = lo + Vec3((i + 0.5) * step.x(), (j + 0.5) * step.y(), (k + 0.5) * step.z());
        const bool ia = a.contains(p), ib = b.contains(p);
        in_both += ia && ib;
        in_any += ia || ib;
      }
  return in_any ? static_cast<double>(in_both) / in_any : 0.0;
}

sg::PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, const Vec3& center, double extent) {
  std::uniform_int_distribution<int> q(-static_cast<int>(extent * 64), static_cast<int>(extent * 64));
  std::uniform_int_distribution<int> c(0, 255);
  std::vector<Vec3> pts;
  std::vector<sg::Rgb> cols;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(center + Vec3(q(rng), q(rng), q(rng)) / 64.0);
    cols.push_back({static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)),
                    static_cast<std::uint8_t>(c(rng))});
  }
  return sg::PointCloud(std::move(pts), std::move(cols));
}

sg::CameraPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> r(3.0, 8.0);
  Vec3 dir(g(rng), g(rng), g(rng));
  dir.normalize();
  const Vec3 target(0.2 * g(rng), 0.2 * g(rng), 0.2 * g(rng));
  return sg::look_at_with_fallback(target + r(rng) * dir, target);
}

sg::Aabb random_box(std::mt19937_64& rng, double extent, double max_size) {
  std::uniform_real_distribution<double> pos(-extent, extent), size(0.01, max_size);
  const Vec3 lo(pos(rng), pos(rng), pos(rng));
  return sg::Aabb(lo, lo + Vec3(size(rng), size(rng), size(rng)));
}

TwoPlanes make_two_planes(double near_z, double gap, int side, double spacing, int image) {
  std::vector<Vec3> pts;
  std::vector<sg::Rgb> cols;
  std::vector<std::uint32_t> near_idx, far_idx;
  const double half = 0.5 * (side - 1) * spacing;
  for (int plane = 0; plane < 2; ++plane) {
    const double z = plane == 0 ? near_z : near_z + gap;
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        (plane == 0 ? near_idx : far_idx).push_back(static_cast<std::uint32_t>(pts.size()));
        pts.emplace_back(i * spacing - half, j * spacing - half, z);
        cols.push_back(plane == 0 ? sg::Rgb{200, 30, 30} : sg::Rgb{30, 30, 200});
      }
  }
  TwoPlanes t;
  t.cloud = sg::PointCloud(pts, cols);
  t.near_plane = {0, "wall", sg::Aabb::around({pts[near_idx.front()], pts[near_idx.back()]}), near_idx};
  t.far_plane = {1, "chair", sg::Aabb::around({pts[far_idx.front()], pts[far_idx.back()]}), far_idx};
  t.pose = sg::look_at_view_transform(Vec3::Zero(), Vec3(0, 0, 1), sg::kFallbackUp);
  t.intr = sg::intrinsics_from_fov(60.0, image, image);
  return t;
}

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("seeground_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sgtest
