#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seeground/image.hpp"
#include "seeground/renderer.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {

struct Pixel {
  int u = 0, v = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (a.v != b.v) return a.v <=> b.v;
    return a.u <=> b.u;
  }
};

struct VisibilityParams {
  double tol = 0.10;
  /// Points at or above this height are ignored (matches a ceiling-cropped render).
  double z_limit = std::numeric_limits<double>::infinity();
};

struct VisibilityResult {
  std::int64_t object_id = 0;
  /// Distinct pixels, sorted row-major.
  std::vector<Pixel> visible_pixels;
  std::size_t visible_count = 0;
  std::size_t total_projected = 0;
  int image_width = 0;
  int image_height = 0;
};

/// Object points: detector indices when present, else every cloud point inside the box.
/// A point is visible iff its depth <= rendered depth at its pixel + tol.
VisibilityResult compute_visibility(const RenderOutput& out, const ObjectRecord& record, const PointCloud& cloud,
                                    const VisibilityParams& params = {});
VisibilityResult compute_visibility_serial(const RenderOutput& out, const ObjectRecord& record,
                                           const PointCloud& cloud, const VisibilityParams& params = {});

/// Indices of the cloud points that represent `record`. Throws "empty object" if none.
std::vector<std::uint32_t> object_point_indices(const ObjectRecord& record, const PointCloud& cloud);

struct MarkerStyle {
  int radius = 14;
  Rgb fill{40, 40, 40};
  Rgb border{255, 255, 255};
  Rgb text{255, 255, 255};
  std::size_t min_visible = 20;
};

struct MarkerSpec {
  std::int64_t object_id = 0;
  Pixel center;
  int radius = 14;
  Rgb fill;
  Rgb border;
  Rgb text;
  std::string label_text;
};

inline constexpr int kMarkerBorder = 2;

std::optional<MarkerSpec> place_marker(const VisibilityResult& vis, const MarkerStyle& style);

struct PromptedImage {
  RgbImage color;
  std::vector<MarkerSpec> markers;
};

/// What a single marker paints at (u, v), or empty if (u, v) is outside its stamp.
std::optional<Rgb> stamp_pixel(const MarkerSpec& marker, int u, int v);

/// Stamps markers in ascending object_id order; later stamps overwrite earlier ones.
PromptedImage composite_prompts(const RgbImage& image, std::vector<MarkerSpec> markers);

// 5x7 digit font ------------------------------------------------------------

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

/// Row bitmaps, bit 4 is the leftmost column. Digits only.
const std::array<std::uint8_t, kGlyphHeight>& glyph_rows(char digit);

/// Integer scale used for a label inside a marker of the given radius.
int label_scale(std::string_view text, int radius);

}  // namespace seeground
