#include "seeground/pam.hpp"

#include <limits>

#include "seeground/error.hpp"

namespace seeground {

std::string_view strategy_name(ViewpointStrategy s) {
  switch (s) {
    case ViewpointStrategy::QueryAligned: return "query_aligned";
    case ViewpointStrategy::BirdsEyeView: return "bev";
    case ViewpointStrategy::Center2Corner: return "center2corner";
    case ViewpointStrategy::Edge2Center: return "edge2center";
    case ViewpointStrategy::Corner2Center: return "corner2center";
  }
  return "unknown";
}

ViewpointStrategy parse_strategy(std::string_view name) {
  for (auto s : {ViewpointStrategy::QueryAligned, ViewpointStrategy::BirdsEyeView, ViewpointStrategy::Center2Corner,
                 ViewpointStrategy::Edge2Center, ViewpointStrategy::Corner2Center})
    if (strategy_name(s) == name) return s;
  throw Error(Errc::invalid_argument, "unknown viewpoint strategy '" + std::string(name) + "'");
}

std::vector<const ObjectRecord*> match_class(const ObjectLookupTable& olt, std::string_view cls) {
  const std::string want = normalize_label(cls);
  std::vector<const ObjectRecord*> out;
  if (want.empty()) return out;
  for (const auto& r : olt.records())
    if (r.label == want) out.push_back(&r);
  if (!out.empty()) return out;
  for (const auto& r : olt.records())
    if (r.label.find(want) != std::string::npos || want.find(r.label) != std::string::npos) out.push_back(&r);
  return out;
}

std::pair<AnchorSpec, CandidateSet> resolve_candidates(const ParsedQuery& parsed, const ObjectLookupTable& olt) {
  if (olt.empty()) throw Error(Errc::contract, "resolve_candidates on an empty object table");
  const auto matches = match_class(olt, parsed.target_class);
  if (matches.empty()) throw Error(Errc::not_found, "target class not in scene");

  CandidateSet candidates;
  Vec3 centroid = Vec3::Zero();
  for (const auto* r : matches) {
    candidates.records.push_back(*r);
    centroid += r->box.center();
  }
  centroid /= static_cast<double>(matches.size());

  AnchorSpec anchor;
  anchor.kind = AnchorSpec::Kind::pseudo;
  anchor.point = centroid;

  const bool usable_anchor = parsed.anchor_class && !normalize_label(*parsed.anchor_class).empty() &&
                             normalize_label(*parsed.anchor_class) != normalize_label(parsed.target_class);
  if (usable_anchor) {
    const ObjectRecord* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    // Records come in ascending id order, so strict '<' keeps the smaller id on ties.
    for (const auto* r : match_class(olt, *parsed.anchor_class)) {
      const double d = (r->box.center() - centroid).norm();
      if (d < best_dist) {
        best_dist = d;
        best = r;
      }
    }
    if (best) {
      anchor.kind = AnchorSpec::Kind::object;
      anchor.object = *best;
      anchor.point = best->box.center();
    }
  }
  return {std::move(anchor), std::move(candidates)};
}

Viewpoint select_viewpoint(const Aabb& scene_box, const AnchorSpec& anchor, const ViewConfig& cfg) {
  if (!scene_box.contains(anchor.point, 1.0))
    throw Error(Errc::contract, "anchor lies more than 1 m outside the scene bounds");
  Vec3 start = scene_box.center();
  start.z() = scene_box.min.z() + cfg.eye_height;
  const Vec3 delta = anchor.point - start;
  const Vec3 dir = delta.norm() < 1e-6 ? Vec3(1.0, 0.0, 0.0) : delta.normalized();
  Viewpoint vp;
  vp.eye = start - cfg.back_offset * dir + Vec3(0.0, 0.0, cfg.up_offset);
  vp.target = anchor.point;
  return vp;
}

Viewpoint static_viewpoint(ViewpointStrategy strategy, const Aabb& scene_box, const ViewConfig& cfg) {
  const Vec3 c = scene_box.center();
  const double eye_z = scene_box.min.z() + cfg.eye_height;
  switch (strategy) {
    case ViewpointStrategy::BirdsEyeView:
      return {Vec3(c.x(), c.y(), scene_box.max.z() + cfg.bev_height), Vec3(c.x(), c.y(), scene_box.min.z())};
    case ViewpointStrategy::Center2Corner:
      return {Vec3(c.x(), c.y(), eye_z), scene_box.max};
    case ViewpointStrategy::Corner2Center:
      return {Vec3(scene_box.max.x(), scene_box.max.y(), eye_z), c};
    case ViewpointStrategy::Edge2Center:
      return {Vec3(scene_box.max.x(), c.y(), eye_z), c};
    case ViewpointStrategy::QueryAligned:
      break;
  }
  throw Error(Errc::contract, "static_viewpoint does not handle the query-aligned strategy");
}

}  // namespace seeground
