#pragma once

#include <atomic>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "seeground/agent.hpp"
#include "seeground/config.hpp"
#include "seeground/evalkit.hpp"
#include "seeground/fam.hpp"
#include "seeground/pam.hpp"
#include "seeground/renderer.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {

/// The image/text pair handed to the agent, plus the intermediate state that produced it.
struct HybridView {
  PromptedImage prompted;
  RenderOutput render;
  SpatialText spatial_text;
  CandidateSet candidates;
  AnchorSpec anchor;
  Viewpoint viewpoint;
  ViewpointStrategy strategy = ViewpointStrategy::QueryAligned;
  std::vector<VisibilityResult> visibility;
};

HybridView build_hybrid(const SceneBundle& scene, const ParsedQuery& parsed, const PipelineConfig& cfg);

struct QueryOptions {
  /// Builtin templates when null.
  const PromptTemplates* prompts = nullptr;
  /// Receives the query's exchanges, in request order.
  std::vector<Exchange>* transcript = nullptr;
};

/// Never throws for stage errors; those come back as a failed result whose
/// failed_stage is one of scene, parse, hybrid, ground, ground/validate, dump.
GroundingResult run_query(const SceneBundle& scene, const std::string& query_id, const std::string& query,
                          AgentBackend& backend, const PipelineConfig& cfg, const QueryOptions& opts = {});

/// Loads each scene of a directory at most once. Safe for concurrent use.
class SceneCache {
 public:
  explicit SceneCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  /// Rethrows the load error on every call for a scene that failed to load.
  std::shared_ptr<const SceneBundle> get(const std::string& scene_id);
  /// SHA-256 of the scene's point-cloud and detection files.
  std::string digest(const std::string& scene_id);
  std::size_t loads() const noexcept { return loads_; }

 private:
  struct Entry {
    std::shared_ptr<const SceneBundle> bundle;
    std::string digest;
  };
  std::shared_future<std::shared_ptr<const Entry>> entry(const std::string& scene_id);

  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<const Entry>>> entries_;
  std::atomic<std::size_t> loads_{0};
};

struct BenchmarkOptions {
  EvalMode mode = EvalMode::scanrefer;
  std::optional<std::filesystem::path> transcript_path;
  std::optional<std::filesystem::path> manifest_path;
  std::optional<std::filesystem::path> report_path;
  /// Execution order as a permutation of query positions; identity when empty.
  std::vector<std::size_t> order;
};

struct BenchmarkRun {
  std::vector<GroundingResult> results;  // benchmark order
  std::vector<std::vector<Exchange>> transcripts;
  MetricsReport report;
  std::string manifest_json;
  std::string manifest_hash;
};

/// Runs every query with at most cfg.concurrency in flight. The manifest hash
/// covers the config, the inputs, the transcripts without latencies, and the results.
BenchmarkRun run_benchmark(const std::vector<QueryRecord>& queries, const std::filesystem::path& scene_dir,
                           AgentBackend& backend, const PipelineConfig& cfg, const BenchmarkOptions& opts = {});

/// Ground truth for the oracle backend. Queries without a gt id take the object
/// whose box overlaps gt_box most.
std::map<std::string, OracleTruth> oracle_truth(const std::vector<QueryRecord>& queries, SceneCache& scenes);

/// Backend for cfg.agent.backend. The oracle needs `truth`.
std::unique_ptr<AgentBackend> make_backend(const AgentConfig& cfg, std::map<std::string, OracleTruth> truth = {});

PromptTemplates load_prompts(const PipelineConfig& cfg);

}  // namespace seeground
