#include "seeground/fam.hpp"

#include <algorithm>
#include <cmath>

#include "seeground/error.hpp"

namespace seeground {

// Visibility ----------------------------------------------------------------

std::vector<std::uint32_t> object_point_indices(const ObjectRecord& record, const PointCloud& cloud) {
  std::vector<std::uint32_t> idx;
  if (record.point_indices) {
    idx = *record.point_indices;
    for (auto i : idx)
      if (i >= cloud.size())
        throw Error(Errc::invalid_argument,
                    "object " + std::to_string(record.id) + ": index " + std::to_string(i) + " out of range");
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if (record.box.contains(cloud.points()[i])) idx.push_back(static_cast<std::uint32_t>(i));
  }
  if (idx.empty()) throw Error(Errc::invalid_argument, "empty object " + std::to_string(record.id));
  return idx;
}

namespace {

enum : std::uint8_t { kSkipped = 0, kOccluded = 1, kVisible = 2 };

struct PointVerdict {
  std::uint8_t state = kSkipped;
  Pixel pixel;
};

PointVerdict judge(const RenderOutput& out, const Vec3& p, const VisibilityParams& params) {
  if (!(p.z() < params.z_limit)) return {};
  const auto proj = project(out.pose, out.intr, p, out.near);
  if (!proj) return {};
  const double w = out.width(), h = out.height();
  if (!(proj->u > -1.0 && proj->u < w + 1.0 && proj->v > -1.0 && proj->v < h + 1.0)) return {};
  const Pixel px{round_half_up(proj->u), round_half_up(proj->v)};
  if (!out.color.in_bounds(px.u, px.v)) return {};
  const double rendered = out.depth_raw(px.u, px.v);
  return {proj->depth <= rendered + params.tol ? kVisible : kOccluded, px};
}

VisibilityResult collect(const std::vector<PointVerdict>& verdicts, const RenderOutput& out, std::int64_t id) {
  VisibilityResult res;
  res.object_id = id;
  res.image_width = out.width();
  res.image_height = out.height();
  for (const auto& v : verdicts) {
    if (v.state == kSkipped) continue;
    ++res.total_projected;
    if (v.state == kVisible) res.visible_pixels.push_back(v.pixel);
  }
  std::sort(res.visible_pixels.begin(), res.visible_pixels.end());
  res.visible_pixels.erase(std::unique(res.visible_pixels.begin(), res.visible_pixels.end()), res.visible_pixels.end());
  res.visible_count = res.visible_pixels.size();
  return res;
}

}  // namespace

VisibilityResult compute_visibility(const RenderOutput& out, const ObjectRecord& record, const PointCloud& cloud,
                                    const VisibilityParams& params) {
  const auto idx = object_point_indices(record, cloud);
  std::vector<PointVerdict> verdicts(idx.size());
  const auto n = static_cast<std::int64_t>(idx.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) verdicts[k] = judge(out, cloud.points()[idx[k]], params);
  return collect(verdicts, out, record.id);
}

VisibilityResult compute_visibility_serial(const RenderOutput& out, const ObjectRecord& record,
                                           const PointCloud& cloud, const VisibilityParams& params) {
  const auto idx = object_point_indices(record, cloud);
  std::vector<PointVerdict> verdicts;
  verdicts.reserve(idx.size());
  for (auto i : idx) verdicts.push_back(judge(out, cloud.points()[i], params));
  return collect(verdicts, out, record.id);
}

// Markers -------------------------------------------------------------------

std::optional<MarkerSpec> place_marker(const VisibilityResult& vis, const MarkerStyle& style) {
  if (vis.visible_count == 0 || vis.visible_count < style.min_visible) return std::nullopt;
  double su = 0, sv = 0;
  for (const auto& p : vis.visible_pixels) {
    su += p.u;
    sv += p.v;
  }
  const double n = static_cast<double>(vis.visible_pixels.size());
  auto clamp_axis = [&](double mean, int extent) {
    const int c = static_cast<int>(std::floor(mean + 0.5));
    const int lo = style.radius, hi = extent - 1 - style.radius;
    if (hi < lo) return extent / 2;
    return std::clamp(c, lo, hi);
  };
  MarkerSpec m;
  m.object_id = vis.object_id;
  m.center = Pixel{clamp_axis(su / n, vis.image_width), clamp_axis(sv / n, vis.image_height)};
  m.radius = style.radius;
  m.fill = style.fill;
  m.border = style.border;
  m.text = style.text;
  m.label_text = std::to_string(vis.object_id);
  return m;
}

// Font ----------------------------------------------------------------------

const std::array<std::uint8_t, kGlyphHeight>& glyph_rows(char digit) {
  static constexpr std::array<std::array<std::uint8_t, kGlyphHeight>, 10> kDigits{{
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
      {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
      {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
      {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
      {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
      {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
  }};
  if (digit < '0' || digit > '9') throw Error(Errc::invalid_argument, std::string("no glyph for '") + digit + "'");
  return kDigits[digit - '0'];
}

namespace {

struct TextBlock {
  int scale;
  int width;
  int height;
};

TextBlock text_block(std::string_view text, int scale) {
  const int n = static_cast<int>(text.size());
  return {scale, n == 0 ? 0 : (n * kGlyphWidth + (n - 1)) * scale, kGlyphHeight * scale};
}

bool glyph_on(const MarkerSpec& m, int u, int v) {
  if (m.label_text.empty()) return false;
  const TextBlock tb = text_block(m.label_text, label_scale(m.label_text, m.radius));
  const int left = m.center.u - tb.width / 2;
  const int top = m.center.v - tb.height / 2;
  const int x = u - left, y = v - top;
  if (x < 0 || y < 0 || x >= tb.width || y >= tb.height) return false;
  const int cell = (kGlyphWidth + 1) * tb.scale;
  const int glyph = x / cell;
  const int gx = (x % cell) / tb.scale;
  if (gx >= kGlyphWidth) return false;  // inter-glyph gap
  const int gy = y / tb.scale;
  return (glyph_rows(m.label_text[glyph])[gy] >> (kGlyphWidth - 1 - gx)) & 1;
}

}  // namespace

int label_scale(std::string_view text, int radius) {
  for (int s = 3; s > 1; --s) {
    const TextBlock tb = text_block(text, s);
    if (std::hypot(tb.width / 2.0, tb.height / 2.0) <= radius) return s;
  }
  return 1;
}

std::optional<Rgb> stamp_pixel(const MarkerSpec& m, int u, int v) {
  const long du = u - m.center.u, dv = v - m.center.v;
  const long d2 = du * du + dv * dv;
  const long r = m.radius;
  if (d2 <= r * r) return glyph_on(m, u, v) ? m.text : m.fill;
  if (d2 <= (r + kMarkerBorder) * (r + kMarkerBorder)) return m.border;
  return std::nullopt;
}

PromptedImage composite_prompts(const RgbImage& image, std::vector<MarkerSpec> markers) {
  std::stable_sort(markers.begin(), markers.end(),
                   [](const MarkerSpec& a, const MarkerSpec& b) { return a.object_id < b.object_id; });
  PromptedImage out{image, std::move(markers)};
  for (const auto& m : out.markers) {
    const int reach = m.radius + kMarkerBorder;
    for (int v = m.center.v - reach; v <= m.center.v + reach; ++v)
      for (int u = m.center.u - reach; u <= m.center.u + reach; ++u) {
        if (!out.color.in_bounds(u, v)) continue;
        if (auto px = stamp_pixel(m, u, v)) out.color.at(u, v) = *px;
      }
  }
  return out;
}

}  // namespace seeground
