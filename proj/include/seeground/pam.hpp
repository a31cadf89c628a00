#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seeground/scene_model.hpp"

namespace seeground {

struct ParsedQuery {
  std::string target_class;
  std::optional<std::string> anchor_class;
  std::string raw_query;
};

struct AnchorSpec {
  enum class Kind { object, pseudo };
  Kind kind = Kind::pseudo;
  std::optional<ObjectRecord> object;
  Vec3 point = Vec3::Zero();
};

struct CandidateSet {
  std::vector<ObjectRecord> records;
};

enum class ViewpointStrategy { QueryAligned, BirdsEyeView, Center2Corner, Edge2Center, Corner2Center };

std::string_view strategy_name(ViewpointStrategy s);
/// Accepts the names used on the command line: query_aligned, bev, center2corner, edge2center, corner2center.
ViewpointStrategy parse_strategy(std::string_view name);

struct ViewConfig {
  double back_offset = 1.5;
  double up_offset = 1.0;
  double eye_height = 1.5;
  double bev_height = 1.0;
  double fov_deg = 60.0;
};

struct Viewpoint {
  Vec3 eye = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

/// Lexical class matching: exact match after lowercasing wins; only when no
/// record matches exactly does substring containment (either direction) apply.
std::vector<const ObjectRecord*> match_class(const ObjectLookupTable& olt, std::string_view cls);

/// Throws Errc::not_found("target class not in scene") when nothing matches.
std::pair<AnchorSpec, CandidateSet> resolve_candidates(const ParsedQuery& parsed, const ObjectLookupTable& olt);

/// Camera at the scene center (raised to eye_height), facing the anchor, then
/// pulled back along the viewing direction and lifted.
Viewpoint select_viewpoint(const Aabb& scene_box, const AnchorSpec& anchor, const ViewConfig& cfg);

/// Fixed baseline placements. QueryAligned is a contract violation here.
Viewpoint static_viewpoint(ViewpointStrategy strategy, const Aabb& scene_box, const ViewConfig& cfg);

}  // namespace seeground
