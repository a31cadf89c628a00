#include "seeground/synth.hpp"

#include <cmath>
#include <map>

#include "seeground/error.hpp"
#include "seeground/util.hpp"

namespace seeground {

namespace {

// Object surfaces are sampled densely enough that 2 px splats leave no gaps at
// room scale, so occluders really occlude.
constexpr double kStructureStep = 0.03;
constexpr double kObjectStep = 0.01;

Rgb shade(Rgb c, double f) {
  auto ch = [f](std::uint8_t v) { return static_cast<std::uint8_t>(std::lround(std::min(255.0, v * f))); };
  return {ch(c.r), ch(c.g), ch(c.b)};
}

class RoomBuilder {
 public:
  RoomBuilder(std::string scene_id, double sx, double sy, double height)
      : scene_id_(std::move(scene_id)), sx_(sx), sy_(sy), height_(height) {
    plane(2, {0, 0, 0}, {sx, sy, 0}, {150, 120, 90});
    plane(2, {0, 0, height}, {sx, sy, height}, {235, 235, 235});
    plane(0, {0, 0, 0}, {0, sy, height}, {215, 215, 205});
    plane(0, {sx, 0, 0}, {sx, sy, height}, {205, 215, 215});
    plane(1, {0, 0, 0}, {sx, 0, height}, {210, 205, 215});
    plane(1, {0, sy, 0}, {sx, sy, height}, {215, 210, 200});
  }

  /// Adds an object made of box parts; returns its id.
  std::int64_t object(const std::string& label, const std::vector<Aabb>& parts, Rgb color) {
    std::vector<std::uint32_t> idx;
    std::vector<Vec3> own;
    for (const auto& b : parts) {
      const auto first = points_.size();
      box_surface(b, color);
      for (auto i = first; i < points_.size(); ++i) {
        idx.push_back(static_cast<std::uint32_t>(i));
        own.push_back(points_[i]);
      }
    }
    const auto id = static_cast<std::int64_t>(records_.size());
    records_.push_back(ObjectRecord{id, label, Aabb::around(own), std::move(idx)});
    return id;
  }

  SceneBundle finish() && {
    SceneBundle b;
    b.scene_id = scene_id_;
    b.cloud = PointCloud(std::move(points_), std::move(colors_));
    b.olt = ObjectLookupTable(scene_id_, std::move(records_));
    return b;
  }

  double sx() const { return sx_; }
  double sy() const { return sy_; }

 private:
  /// Axis-aligned rectangle spanning lo..hi; `normal_axis` is the flat one.
  void plane(int normal_axis, const Vec3& lo, const Vec3& hi, Rgb color) { grid(normal_axis, lo, hi, kStructureStep, color); }

  void grid(int axis, const Vec3& lo, const Vec3& hi, double step, Rgb color) {
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    const int na = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / step)));
    const int nb = std::max(1, static_cast<int>(std::ceil((hi[b] - lo[b]) / step)));
    for (int i = 0; i <= na; ++i)
      for (int j = 0; j <= nb; ++j) {
        Vec3 p = lo;
        p[a] = lo[a] + (hi[a] - lo[a]) * i / na;
        p[b] = lo[b] + (hi[b] - lo[b]) * j / nb;
        points_.push_back(p);
        colors_.push_back(color);
      }
  }

  void box_surface(const Aabb& box, Rgb color) {
    static constexpr double kFaceShade[3] = {0.85, 0.7, 1.0};
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 lo = box.min, hi = box.max;
      hi[axis] = box.min[axis];
      grid(axis, lo, hi, kObjectStep, shade(color, kFaceShade[axis] * 0.9));
      lo[axis] = hi[axis] = box.max[axis];
      grid(axis, lo, hi, kObjectStep, shade(color, kFaceShade[axis]));
    }
  }

  std::string scene_id_;
  double sx_, sy_, height_;
  std::vector<Vec3> points_;
  std::vector<Rgb> colors_;
  std::vector<ObjectRecord> records_;
};

Aabb slab(double x0, double y0, double z0, double x1, double y1, double z1) { return Aabb({x0, y0, z0}, {x1, y1, z1}); }

/// Table centered at (x, y) with half extents (hx, hy) and top height h.
std::vector<Aabb> table_parts(double x, double y, double hx, double hy, double h) {
  const double t = 0.04;
  std::vector<Aabb> parts{slab(x - hx, y - hy, h - 0.05, x + hx, y + hy, h)};
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) {
      const double lx = x + sx * (hx - t), ly = y + sy * (hy - t);
      parts.push_back(slab(lx - t / 2, ly - t / 2, 0.0, lx + t / 2, ly + t / 2, h - 0.05));
    }
  return parts;
}

/// Chair with its backrest on the side given by (bx, by), a unit axis direction.
std::vector<Aabb> chair_parts(double x, double y, int bx, int by) {
  const double s = 0.23;
  std::vector<Aabb> parts = table_parts(x, y, s, s, 0.47);
  const double cx = x + bx * (s - 0.03), cy = y + by * (s - 0.03);
  const double wx = bx ? 0.03 : s, wy = by ? 0.03 : s;
  parts.push_back(slab(cx - wx, cy - wy, 0.47, cx + wx, cy + wy, 0.95));
  return parts;
}

std::vector<Aabb> lamp_parts(double x, double y, double base_z) {
  return {slab(x - 0.02, y - 0.02, base_z, x + 0.02, y + 0.02, base_z + 1.2),
          slab(x - 0.18, y - 0.18, base_z + 1.2, x + 0.18, y + 0.18, base_z + 1.5)};
}

std::vector<Aabb> plant_parts(double x, double y) {
  return {slab(x - 0.15, y - 0.15, 0.0, x + 0.15, y + 0.15, 0.35), slab(x - 0.3, y - 0.3, 0.35, x + 0.3, y + 0.3, 1.0)};
}

struct QuerySpec {
  const char* text;
  std::int64_t gt;
};

void add_queries(SynthSuite& suite, const SceneBundle& scene, const std::vector<QuerySpec>& specs) {
  std::map<std::string, int> counts;
  for (const auto& r : scene.olt.records()) ++counts[r.label];
  for (const auto& s : specs) {
    const ObjectRecord& gt = olt_lookup(scene.olt, s.gt);
    QueryRecord q;
    char id[16];
    std::snprintf(id, sizeof id, "q%02zu", suite.queries.size() + 1);
    q.query_id = id;
    q.scene_id = scene.scene_id;
    q.query = s.text;
    q.gt_box = gt.box;
    q.gt_object_id = gt.id;
    q.gt_label = gt.label;
    const int same = counts[gt.label];
    q.split_tags = {same == 1 ? "unique" : "multiple", same <= 2 ? "easy" : "hard",
                    is_view_dependent(q.query) ? "view_dep" : "view_indep"};
    suite.queries.push_back(std::move(q));
  }
}

SceneBundle living_room() {
  RoomBuilder b("synth_living", 6.0, 5.0, 3.0);
  b.object("sofa", {slab(2.0, 0.3, 0.0, 4.0, 1.2, 0.45), slab(2.0, 0.2, 0.0, 4.0, 0.4, 0.9)}, {90, 110, 160});
  b.object("table", table_parts(3.0, 2.3, 0.6, 0.4, 0.5), {140, 90, 50});
  b.object("chair", chair_parts(1.6, 2.3, -1, 0), {170, 60, 50});
  b.object("chair", chair_parts(4.4, 2.3, 1, 0), {170, 60, 50});
  b.object("lamp", lamp_parts(5.4, 0.6, 0.0), {230, 200, 80});
  b.object("tv", {slab(2.4, 4.8, 1.0, 3.6, 4.9, 1.7)}, {30, 30, 30});
  b.object("plant", plant_parts(0.5, 4.4), {60, 150, 60});
  return std::move(b).finish();
}

SceneBundle bedroom() {
  RoomBuilder b("synth_bedroom", 5.0, 5.0, 2.8);
  b.object("bed", {slab(1.7, 3.0, 0.0, 3.3, 5.0, 0.5), slab(1.7, 4.85, 0.5, 3.3, 5.0, 1.1)}, {200, 200, 230});
  b.object("nightstand", {slab(1.0, 4.5, 0.0, 1.45, 4.95, 0.5)}, {120, 80, 40});
  b.object("nightstand", {slab(3.55, 4.5, 0.0, 4.0, 4.95, 0.5)}, {120, 80, 40});
  b.object("lamp", lamp_parts(1.225, 4.725, 0.5), {230, 200, 80});
  b.object("desk", table_parts(4.2, 0.6, 0.6, 0.35, 0.75), {150, 110, 70});
  b.object("chair", chair_parts(4.2, 1.3, 0, 1), {60, 60, 160});
  b.object("cabinet", {slab(0.1, 0.5, 0.0, 0.6, 1.3, 1.8)}, {180, 170, 150});
  return std::move(b).finish();
}

SceneBundle office() {
  RoomBuilder b("synth_office", 6.0, 6.0, 3.0);
  b.object("desk", table_parts(1.5, 5.2, 0.7, 0.35, 0.75), {150, 110, 70});
  b.object("desk", table_parts(4.5, 5.2, 0.7, 0.35, 0.75), {150, 110, 70});
  b.object("chair", chair_parts(1.5, 4.4, 0, -1), {50, 50, 50});
  b.object("chair", chair_parts(4.5, 4.4, 0, -1), {50, 50, 50});
  b.object("chair", chair_parts(3.0, 2.0, 0, -1), {50, 50, 50});
  b.object("bookshelf", {slab(0.05, 1.0, 0.0, 0.4, 2.0, 1.8)}, {110, 70, 40});
  b.object("trash can", {slab(5.5, 0.2, 0.0, 5.8, 0.5, 0.4)}, {100, 100, 100});
  b.object("plant", plant_parts(5.5, 3.0), {60, 150, 60});
  return std::move(b).finish();
}

}  // namespace

SynthSuite make_grounding_suite() {
  SynthSuite suite;
  suite.scenes = {living_room(), bedroom(), office()};
  add_queries(suite, suite.scenes[0],
              {{"the sofa facing the tv", 0},
               {"the table in front of the sofa", 1},
               {"the chair on the left side of the table", 2},
               {"the chair on the right side of the table", 3},
               {"the lamp in the corner next to the sofa", 4},
               {"the tv mounted on the wall", 5},
               {"the plant near the far wall", 6}});
  add_queries(suite, suite.scenes[1],
              {{"the bed between the two nightstands", 0},
               {"the nightstand with a lamp on it", 1},
               {"the nightstand that is farther from the cabinet", 2},
               {"the lamp on the nightstand", 3},
               {"the desk by the window", 4},
               {"the chair pushed under the desk", 5},
               {"the tall cabinet near the door", 6}});
  add_queries(suite, suite.scenes[2],
              {{"the desk next to the bookshelf", 0},
               {"the chair at the desk near the plant", 3},
               {"the chair standing alone in the middle of the room", 4},
               {"the bookshelf against the wall", 5},
               {"the trash can in the corner", 6},
               {"the desk closest to the plant", 1}});
  return suite;
}

SynthSuite make_view_dependent_suite() {
  // Layout for a table on the +y side of a 6 x 6 room; other scenes rotate it
  // about the room center in quarter turns.
  struct Layout {
    double table_y;
    double hidden_dx;
    Vec3 distractor_a, distractor_b;
    const char* query;
  };
  const std::vector<Layout> layouts{
      {4.8, 0.0, {1.5, 2.6, 0}, {4.5, 2.0, 0}, "the box under the table"},
      {4.8, 0.3, {1.3, 2.0, 0}, {4.7, 2.7, 0}, "the box hidden beneath the table"},
      {4.6, -0.3, {1.6, 2.2, 0}, {4.4, 2.6, 0}, "the box below the table top"},
  };
  const Vec3 c(3.0, 3.0, 0.0);
  auto rotate = [&](const Vec3& p, int k) -> Vec3 {
    Vec3 d = p - c;
    for (int i = 0; i < k; ++i) d = Vec3(-d.y(), d.x(), d.z());
    return c + d;
  };

  SynthSuite suite;
  int n = 0;
  for (int k = 0; k < 4; ++k)
    for (std::size_t l = 0; l < layouts.size(); ++l) {
      const Layout& lay = layouts[l];
      RoomBuilder b("synth_vd_" + std::to_string(++n), 6.0, 6.0, 3.0);
      const bool swap = k % 2 == 1;
      auto hx = [&](double a, double bb) { return swap ? bb : a; };
      // The table is 1.6 m wide and 1.2 m deep, leaving 0.4 m of top overhang
      // between its edge and the hidden box on the side that faces the room center.
      const Vec3 t = rotate({3.0, lay.table_y, 0}, k);
      b.object("table", table_parts(t.x(), t.y(), hx(0.8, 0.6), hx(0.6, 0.8), 0.75), {140, 90, 50});
      const Vec3 h = rotate({3.0 + lay.hidden_dx, lay.table_y, 0}, k);
      const double bx = hx(0.25, 0.2), by = hx(0.2, 0.25);
      const auto hidden = b.object("box", {slab(h.x() - bx, h.y() - by, 0.0, h.x() + bx, h.y() + by, 0.3)}, {200, 60, 60});
      for (const Vec3& d : {lay.distractor_a, lay.distractor_b}) {
        const Vec3 p = rotate(d, k);
        b.object("box", {slab(p.x() - bx, p.y() - by, 0.0, p.x() + bx, p.y() + by, 0.3)}, {200, 60, 60});
      }
      SceneBundle scene = std::move(b).finish();
      add_queries(suite, scene, {{lay.query, hidden}});
      auto& q = suite.queries.back();
      q.query_id = "vd" + q.query_id.substr(1);
      q.split_tags.erase("view_indep");
      q.split_tags.insert("view_dep");
      suite.scenes.push_back(std::move(scene));
    }
  return suite;
}

void write_suite(const SynthSuite& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : suite.scenes) {
    save_point_cloud(s.cloud, dir / (s.scene_id + ".ply"));
    save_olt(s.olt, dir / (s.scene_id + ".json"));
  }
  save_benchmark(suite.queries, dir / "benchmark.jsonl");
}

}  // namespace seeground
