#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "seeground/scene_model.hpp"

namespace seeground {

struct QueryRecord {
  std::string query_id;
  std::string scene_id;
  std::string query;
  std::optional<Aabb> gt_box;
  std::optional<std::int64_t> gt_object_id;
  std::string gt_label;
  /// Subset of {unique, multiple, easy, hard, view_dep, view_indep}.
  std::set<std::string> split_tags;
};

struct GroundingResult {
  std::string query_id;
  std::optional<std::int64_t> predicted_object_id;
  std::optional<Aabb> predicted_box;
  /// Set when the query terminated with an error; the stage that failed.
  std::optional<std::string> failed_stage;
  std::string error;
  std::string transcript_ref;

  bool ok() const noexcept { return !failed_stage && predicted_object_id.has_value(); }
};

std::vector<QueryRecord> load_benchmark(const std::filesystem::path& path);
void save_benchmark(const std::vector<QueryRecord>& queries, const std::filesystem::path& path);
std::string query_to_jsonl(const QueryRecord& q);
QueryRecord query_from_jsonl(std::string_view line);

double iou_aabb(const Aabb& a, const Aabb& b);

enum class UniqueTag { unique, multiple };

struct Classification {
  UniqueTag tag = UniqueTag::multiple;
  std::optional<std::string> warning;
};

Classification classify_unique_multiple(const QueryRecord& q, const ObjectLookupTable& olt);

struct SplitMetrics {
  std::size_t n = 0;
  std::size_t correct_25 = 0;
  std::size_t correct_50 = 0;
  std::size_t correct = 0;  // selection accuracy (Nr3D mode)
  std::size_t failures = 0;

  double acc_at_25() const { return n ? static_cast<double>(correct_25) / n : 0.0; }
  double acc_at_50() const { return n ? static_cast<double>(correct_50) / n : 0.0; }
  double accuracy() const { return n ? static_cast<double>(correct) / n : 0.0; }

  friend bool operator==(const SplitMetrics&, const SplitMetrics&) = default;
};

enum class EvalMode { scanrefer, nr3d };

struct MetricsReport {
  EvalMode mode = EvalMode::scanrefer;
  /// Fixed order: the per-split rows, then "overall".
  std::vector<std::pair<std::string, SplitMetrics>> rows;
  std::string split_rule;
  std::vector<std::string> warnings;

  const SplitMetrics* row(const std::string& name) const;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Missing or failed results count as incorrect. Throws on a duplicate result.
MetricsReport evaluate_scanrefer(const std::vector<GroundingResult>& results, const std::vector<QueryRecord>& queries,
                                 const std::map<std::string, ObjectLookupTable>& olts);

/// Easy/hard and view tags come from the query metadata; when easy/hard is
/// absent and the scene's table is given, easy iff at most two objects share the
/// target's class.
MetricsReport evaluate_nr3d(const std::vector<GroundingResult>& results, const std::vector<QueryRecord>& queries,
                            const std::map<std::string, ObjectLookupTable>& olts = {});

/// Percent with one decimal, half up: 0.4412 -> "44.1".
std::string format_percent(double fraction);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(std::string_view text);
std::string report_to_table(const MetricsReport& report);

/// Writes `path` (JSON) and `path` with extension ".txt" (aligned table).
void write_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path);

// Upstream dataset converters ----------------------------------------------

/// ScanRefer annotation JSON (list of {scene_id, object_id, object_name, ann_id, description}).
/// When `gt_olt_dir` is given, `{dir}/{scene_id}.json` supplies gt boxes.
std::vector<QueryRecord> convert_scanrefer(std::string_view json_text,
                                           const std::optional<std::filesystem::path>& gt_olt_dir = std::nullopt);

/// Nr3D CSV. Tags: easy iff the stimulus lists at most two same-class instances;
/// view_dep iff the utterance uses one of the standard view-dependent words.
std::vector<QueryRecord> convert_nr3d(std::string_view csv_text);

/// True when the utterance contains one of the standard view-dependent words
/// (front, behind, back, right, left, facing, leftmost, rightmost, looking, across).
bool is_view_dependent(std::string_view utterance);

std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace seeground
