#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace seeground {

using Vec3 = Eigen::Vector3d;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Colored point cloud, world frame, meters, z-up.
class PointCloud {
 public:
  PointCloud() = default;
  /// Throws Errc::invalid_argument on length mismatch, empty input or
  /// non-finite coordinates.
  PointCloud(std::vector<Vec3> points, std::vector<Rgb> colors);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<Rgb>& colors() const noexcept { return colors_; }

  double max_z() const;

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.points_ == b.points_ && a.colors_ == b.colors_;
  }

 private:
  std::vector<Vec3> points_;
  std::vector<Rgb> colors_;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Aabb() = default;
  /// Throws Errc::invalid_argument unless lo <= hi componentwise.
  Aabb(const Vec3& lo, const Vec3& hi);

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 size() const { return max - min; }
  double volume() const;
  bool contains(const Vec3& p, double margin = 0.0) const;
  Aabb inflated(double margin) const;

  static Aabb around(const std::vector<Vec3>& points);

  friend bool operator==(const Aabb& a, const Aabb& b) { return a.min == b.min && a.max == b.max; }
};

struct ObjectRecord {
  std::int64_t id = 0;
  std::string label;
  Aabb box;
  std::optional<std::vector<std::uint32_t>> point_indices;

  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

/// Per-scene object table, records stored ascending by id.
class ObjectLookupTable {
 public:
  ObjectLookupTable() = default;
  /// Sorts by id; throws Errc::invalid_argument on duplicate ids or empty labels.
  ObjectLookupTable(std::string scene_id, std::vector<ObjectRecord> records);

  const std::string& scene_id() const noexcept { return scene_id_; }
  const std::vector<ObjectRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Nullptr when absent.
  const ObjectRecord* find(std::int64_t id) const noexcept;

  friend bool operator==(const ObjectLookupTable&, const ObjectLookupTable&) = default;

 private:
  std::string scene_id_;
  std::vector<ObjectRecord> records_;
};

struct SpatialText {
  std::string text;
};

/// One parsed line of a SpatialText.
struct SpatialLine {
  std::int64_t id = 0;
  std::string label;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Zero();
};

struct SceneBundle {
  std::string scene_id;
  PointCloud cloud;
  ObjectLookupTable olt;
};

// Ingestion -----------------------------------------------------------------

PointCloud load_point_cloud(const std::filesystem::path& path);

enum class PlyEncoding { ascii, binary_little_endian };
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      PlyEncoding encoding = PlyEncoding::binary_little_endian);

/// Parses a PLY document held in memory; `load_point_cloud` is a thin wrapper.
PointCloud parse_ply(std::string_view bytes);
std::string encode_ply(const PointCloud& cloud, PlyEncoding encoding);

ObjectLookupTable ingest_detections(const std::filesystem::path& path, const PointCloud& cloud);
ObjectLookupTable ingest_detections_json(std::string_view json_text, const PointCloud& cloud);

void save_olt(const ObjectLookupTable& olt, const std::filesystem::path& path);
std::string olt_to_json(const ObjectLookupTable& olt);
/// Loads a persisted OLT. Indices are kept but not validated against a cloud.
ObjectLookupTable load_olt(const std::filesystem::path& path);

/// Loads `{dir}/{scene_id}.ply` and `{dir}/{scene_id}.json`.
SceneBundle load_scene(const std::filesystem::path& dir, const std::string& scene_id);

// Queries -------------------------------------------------------------------

/// Throws Errc::not_found for unknown ids.
const ObjectRecord& olt_lookup(const ObjectLookupTable& olt, std::int64_t id);

std::string normalize_label(std::string_view label);

struct DescribeOptions {
  bool include_geometry = true;
};

SpatialText describe_scene(const ObjectLookupTable& olt, const DescribeOptions& opts = {});
std::string describe_record(const ObjectRecord& record, const DescribeOptions& opts = {});
std::vector<SpatialLine> parse_spatial_text(const SpatialText& text);

/// Fixed-point formatting with half-away-from-zero rounding; never emits "-0.00".
std::string format_fixed(double value, int decimals);

/// Keeps points with z < max_z - margin, using the cloud's own max z.
PointCloud crop_ceiling(const PointCloud& cloud, double margin);
/// Variant with an explicit reference height, shared across renders of one scene.
PointCloud crop_ceiling(const PointCloud& cloud, double margin, double reference_max_z);

}  // namespace seeground
