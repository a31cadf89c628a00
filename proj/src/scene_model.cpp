#include "seeground/scene_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "seeground/error.hpp"

namespace seeground {

using nlohmann::json;

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::parse: return "parse";
    case Errc::io: return "io";
    case Errc::not_found: return "not_found";
    case Errc::contract: return "contract";
    case Errc::transport: return "transport";
    case Errc::timeout: return "timeout";
    case Errc::unparseable_reply: return "unparseable_reply";
    case Errc::rejected_answer: return "rejected_answer";
  }
  return "unknown";
}

// PointCloud ----------------------------------------------------------------

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Rgb> colors)
    : points_(std::move(points)), colors_(std::move(colors)) {
  if (points_.size() != colors_.size())
    throw Error(Errc::invalid_argument, "point cloud has " + std::to_string(points_.size()) + " points but " +
                                            std::to_string(colors_.size()) + " colors");
  if (points_.empty()) throw Error(Errc::invalid_argument, "point cloud is empty");
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (!points_[i].allFinite())
      throw Error(Errc::invalid_argument, "point " + std::to_string(i) + " has non-finite coordinates");
}

double PointCloud::max_z() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : points_) m = std::max(m, p.z());
  return m;
}

// Aabb ----------------------------------------------------------------------

Aabb::Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {
  if (!lo.allFinite() || !hi.allFinite()) throw Error(Errc::invalid_argument, "box has non-finite corner");
  if ((lo.array() > hi.array()).any()) throw Error(Errc::invalid_argument, "box min exceeds max");
}

double Aabb::volume() const {
  const Vec3 s = size();
  return s.x() * s.y() * s.z();
}

bool Aabb::contains(const Vec3& p, double margin) const {
  return (p.array() >= (min.array() - margin)).all() && (p.array() <= (max.array() + margin)).all();
}

Aabb Aabb::inflated(double margin) const {
  return Aabb(min - Vec3::Constant(margin), max + Vec3::Constant(margin));
}

Aabb Aabb::around(const std::vector<Vec3>& points) {
  if (points.empty()) throw Error(Errc::invalid_argument, "cannot bound an empty point set");
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return Aabb(lo, hi);
}

// ObjectLookupTable ---------------------------------------------------------

ObjectLookupTable::ObjectLookupTable(std::string scene_id, std::vector<ObjectRecord> records)
    : scene_id_(std::move(scene_id)), records_(std::move(records)) {
  std::stable_sort(records_.begin(), records_.end(),
                   [](const ObjectRecord& a, const ObjectRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id < 0) throw Error(Errc::invalid_argument, "negative object id " + std::to_string(records_[i].id));
    if (records_[i].label.empty())
      throw Error(Errc::invalid_argument, "object " + std::to_string(records_[i].id) + " has an empty label");
    if (i > 0 && records_[i].id == records_[i - 1].id)
      throw Error(Errc::invalid_argument, "duplicate id " + std::to_string(records_[i].id));
  }
}

const ObjectRecord* ObjectLookupTable::find(std::int64_t id) const noexcept {
  auto it = std::lower_bound(records_.begin(), records_.end(), id,
                             [](const ObjectRecord& r, std::int64_t v) { return r.id < v; });
  if (it == records_.end() || it->id != id) return nullptr;
  return &*it;
}

const ObjectRecord& olt_lookup(const ObjectLookupTable& olt, std::int64_t id) {
  const ObjectRecord* r = olt.find(id);
  if (!r) throw Error(Errc::not_found, "object id " + std::to_string(id) + " not found in scene '" + olt.scene_id() + "'");
  return *r;
}

std::string normalize_label(std::string_view label) {
  std::size_t b = 0, e = label.size();
  while (b < e && std::isspace(static_cast<unsigned char>(label[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(label[e - 1]))) --e;
  std::string out(label.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Detection / OLT files -----------------------------------------------------

namespace {

Vec3 vec3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::parse, what + " must be a 3-element array");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw Error(Errc::parse, what + " must contain numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

enum class BoxPolicy { optional, required };

ObjectLookupTable olt_from_json(std::string_view text, const PointCloud* cloud, BoxPolicy policy) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, std::string("detection file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("scene_id") || !doc["scene_id"].is_string())
    throw Error(Errc::parse, "detection file: missing string field 'scene_id'");
  if (!doc.contains("objects") || !doc["objects"].is_array())
    throw Error(Errc::parse, "detection file: missing array field 'objects'");
  const auto& objects = doc["objects"];
  if (objects.empty()) throw Error(Errc::invalid_argument, "detection file: empty detection list");

  std::vector<ObjectRecord> records;
  records.reserve(objects.size());
  std::map<std::int64_t, bool> seen;
  for (const auto& o : objects) {
    if (!o.contains("id") || !o["id"].is_number_integer()) throw Error(Errc::parse, "detection without integer 'id'");
    ObjectRecord r;
    r.id = o["id"].get<std::int64_t>();
    if (seen.count(r.id)) throw Error(Errc::invalid_argument, "duplicate id " + std::to_string(r.id));
    seen[r.id] = true;
    const std::string tag = "object " + std::to_string(r.id);
    if (!o.contains("label") || !o["label"].is_string()) throw Error(Errc::parse, tag + ": missing 'label'");
    r.label = normalize_label(o["label"].get<std::string>());
    if (r.label.empty()) throw Error(Errc::invalid_argument, tag + ": empty label");

    const bool has_box = o.contains("box") && !o["box"].is_null();
    const bool has_indices = o.contains("indices") && !o["indices"].is_null();
    if (!has_box && !has_indices) throw Error(Errc::parse, tag + ": needs 'box' or 'indices'");
    if (policy == BoxPolicy::required && !has_box) throw Error(Errc::parse, tag + ": OLT file requires 'box'");

    if (has_indices) {
      if (!o["indices"].is_array()) throw Error(Errc::parse, tag + ": 'indices' must be an array");
      std::vector<std::uint32_t> idx;
      idx.reserve(o["indices"].size());
      for (const auto& v : o["indices"]) {
        if (!v.is_number_integer()) throw Error(Errc::parse, tag + ": non-integer index");
        const auto i = v.get<std::int64_t>();
        if (i < 0 || (cloud && static_cast<std::size_t>(i) >= cloud->size()))
          throw Error(Errc::invalid_argument, tag + ": index " + std::to_string(i) + " out of range");
        idx.push_back(static_cast<std::uint32_t>(i));
      }
      if (idx.empty() && !has_box) throw Error(Errc::invalid_argument, tag + ": empty index list and no box");
      r.point_indices = std::move(idx);
    }

    if (has_box) {
      const auto& b = o["box"];
      if (!b.is_object() || !b.contains("min") || !b.contains("max"))
        throw Error(Errc::parse, tag + ": box needs 'min' and 'max'");
      r.box = Aabb(vec3_from_json(b["min"], tag + " box.min"), vec3_from_json(b["max"], tag + " box.max"));
      if (cloud && r.point_indices) {
        for (auto i : *r.point_indices)
          if (!r.box.contains(cloud->points()[i], 0.05))
            throw Error(Errc::invalid_argument, tag + ": point " + std::to_string(i) + " lies outside its box");
      }
    } else {
      if (!cloud) throw Error(Errc::invalid_argument, tag + ": box required without a point cloud");
      std::vector<Vec3> pts;
      pts.reserve(r.point_indices->size());
      for (auto i : *r.point_indices) pts.push_back(cloud->points()[i]);
      r.box = Aabb::around(pts);
    }
    records.push_back(std::move(r));
  }
  return ObjectLookupTable(doc["scene_id"].get<std::string>(), std::move(records));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace

ObjectLookupTable ingest_detections_json(std::string_view json_text, const PointCloud& cloud) {
  return olt_from_json(json_text, &cloud, BoxPolicy::optional);
}

ObjectLookupTable ingest_detections(const std::filesystem::path& path, const PointCloud& cloud) {
  return ingest_detections_json(read_text(path), cloud);
}

std::string olt_to_json(const ObjectLookupTable& olt) {
  // Hand-written so numbers come out in fixed 6-decimal notation.
  std::ostringstream out;
  out << "{\n  \"scene_id\": " << json(olt.scene_id()).dump() << ",\n  \"objects\": [";
  for (std::size_t i = 0; i < olt.size(); ++i) {
    const auto& r = olt.records()[i];
    out << (i ? ",\n" : "\n") << "    {\"id\": " << r.id << ", \"label\": " << json(r.label).dump()
        << ", \"box\": {\"min\": [" << fixed6(r.box.min.x()) << ", " << fixed6(r.box.min.y()) << ", "
        << fixed6(r.box.min.z()) << "], \"max\": [" << fixed6(r.box.max.x()) << ", " << fixed6(r.box.max.y())
        << ", " << fixed6(r.box.max.z()) << "]}";
    if (r.point_indices) {
      out << ", \"indices\": [";
      for (std::size_t k = 0; k < r.point_indices->size(); ++k) out << (k ? "," : "") << (*r.point_indices)[k];
      out << "]";
    }
    out << "}";
  }
  out << (olt.empty() ? "]\n}\n" : "\n  ]\n}\n");
  return out.str();
}

void save_olt(const ObjectLookupTable& olt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write OLT '" + path.string() + "'");
  out << olt_to_json(olt);
  if (!out) throw Error(Errc::io, "short write to '" + path.string() + "'");
}

ObjectLookupTable load_olt(const std::filesystem::path& path) {
  return olt_from_json(read_text(path), nullptr, BoxPolicy::required);
}

SceneBundle load_scene(const std::filesystem::path& dir, const std::string& scene_id) {
  SceneBundle bundle;
  bundle.scene_id = scene_id;
  bundle.cloud = load_point_cloud(dir / (scene_id + ".ply"));
  bundle.olt = ingest_detections(dir / (scene_id + ".json"), bundle.cloud);
  if (bundle.olt.scene_id() != scene_id)
    throw Error(Errc::invalid_argument,
                "detection file scene_id '" + bundle.olt.scene_id() + "' does not match '" + scene_id + "'");
  return bundle;
}

// Spatial text --------------------------------------------------------------

std::string format_fixed(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a relative epsilon so decimal ties stored slightly below .5 still round up.
  const double scaled = value * scale;
  double rounded = std::round(scaled + std::copysign(std::abs(scaled) * 1e-12, scaled));
  if (rounded == 0.0) rounded = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded / scale);
  return buf;
}

std::string describe_record(const ObjectRecord& r, const DescribeOptions& opts) {
  std::string line = std::to_string(r.id) + ". " + r.label;
  if (!opts.include_geometry) return line;
  const Vec3 c = r.box.center();
  const Vec3 s = r.box.size();
  line += ": center=(" + format_fixed(c.x(), 2) + ", " + format_fixed(c.y(), 2) + ", " + format_fixed(c.z(), 2) +
          "), size=(" + format_fixed(s.x(), 2) + ", " + format_fixed(s.y(), 2) + ", " + format_fixed(s.z(), 2) + ")";
  return line;
}

SpatialText describe_scene(const ObjectLookupTable& olt, const DescribeOptions& opts) {
  SpatialText out;
  for (std::size_t i = 0; i < olt.size(); ++i) {
    if (i) out.text += '\n';
    out.text += describe_record(olt.records()[i], opts);
  }
  return out;
}

std::vector<SpatialLine> parse_spatial_text(const SpatialText& text) {
  std::vector<SpatialLine> out;
  std::istringstream in(text.text);
  std::string line;
  while (std::getline(in, line)) {
    SpatialLine sl;
    const auto dot = line.find(". ");
    if (dot == std::string::npos) throw Error(Errc::parse, "spatial line without id: '" + line + "'");
    sl.id = std::stoll(line.substr(0, dot));
    const auto geo = line.rfind(": center=(");
    if (geo == std::string::npos || geo < dot) {
      sl.label = line.substr(dot + 2);
    } else {
      sl.label = line.substr(dot + 2, geo - dot - 2);
      double c[3], s[3];
      if (std::sscanf(line.c_str() + geo, ": center=(%lf, %lf, %lf), size=(%lf, %lf, %lf)", &c[0], &c[1], &c[2],
                      &s[0], &s[1], &s[2]) != 6)
        throw Error(Errc::parse, "malformed spatial line: '" + line + "'");
      sl.center = Vec3(c[0], c[1], c[2]);
      sl.size = Vec3(s[0], s[1], s[2]);
    }
    out.push_back(std::move(sl));
  }
  return out;
}

// Ceiling crop --------------------------------------------------------------

PointCloud crop_ceiling(const PointCloud& cloud, double margin, double reference_max_z) {
  if (!(margin >= 0.0)) throw Error(Errc::invalid_argument, "crop margin must be >= 0");
  const double threshold = reference_max_z - margin;
  std::vector<Vec3> pts;
  std::vector<Rgb> cols;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points()[i].z() < threshold) {
      pts.push_back(cloud.points()[i]);
      cols.push_back(cloud.colors()[i]);
    }
  }
  if (pts.empty()) throw Error(Errc::invalid_argument, "crop removed all points");
  return PointCloud(std::move(pts), std::move(cols));
}

PointCloud crop_ceiling(const PointCloud& cloud, double margin) {
  return crop_ceiling(cloud, margin, cloud.max_z());
}

}  // namespace seeground
