#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seeground/evalkit.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {

/// Synthetic rooms with exact (ground-truth) detections and queries over them.
struct SynthSuite {
  std::vector<SceneBundle> scenes;
  std::vector<QueryRecord> queries;
};

/// Three furnished rooms and twenty referring queries.
SynthSuite make_grounding_suite();

/// Rooms where the referred object sits under a table: hidden from straight
/// above, visible from an oblique query-aligned camera. Same-class distractors
/// stand in the open.
SynthSuite make_view_dependent_suite();

/// Writes `{dir}/{scene_id}.ply`, `{dir}/{scene_id}.json` and `{dir}/benchmark.jsonl`.
void write_suite(const SynthSuite& suite, const std::filesystem::path& dir);

}  // namespace seeground
