#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "seeground/agent.hpp"
#include "seeground/fam.hpp"
#include "seeground/pam.hpp"
#include "seeground/renderer.hpp"

namespace seeground {

enum class MarkerPolicy { candidates_and_anchor, all_visible };
enum class TextScope { all_objects, candidates_only };
enum class BackendKind { oracle, heuristic, recorded, remote };

struct FusionConfig {
  double tol = 0.10;
  MarkerStyle style;
  MarkerPolicy marker_policy = MarkerPolicy::candidates_and_anchor;
};

struct AgentConfig {
  BackendKind backend = BackendKind::heuristic;
  /// Remote endpoint settings; the API key is only ever taken from the environment.
  RemoteConfig remote;
  std::optional<std::filesystem::path> prompts;
  /// Source transcript for the recorded backend.
  std::optional<std::filesystem::path> recording;
};

/// One switch per ablation row.
struct AblationConfig {
  bool disable_fam = false;      // send the render without markers
  bool disable_pam = false;      // bird's-eye view instead of the query-aligned one
  bool disable_texture = false;  // no image at all
  bool disable_pos = false;      // spatial text without center/size
};

struct PipelineConfig {
  RenderConfig render;
  ViewConfig view;
  FusionConfig fusion;
  AgentConfig agent;
  ViewpointStrategy strategy = ViewpointStrategy::QueryAligned;
  TextScope text_scope = TextScope::all_objects;
  AblationConfig ablation;
  std::optional<std::filesystem::path> dump_dir;
  int concurrency = 4;

  /// Throws Errc::invalid_argument naming the offending field.
  void validate() const;
};

inline constexpr int kConfigVersion = 1;

std::string_view marker_policy_name(MarkerPolicy p);
std::string_view text_scope_name(TextScope s);
std::string_view backend_kind_name(BackendKind k);
BackendKind parse_backend_kind(std::string_view name);

/// Sets one field addressed as "section.key" (or "key" for top-level fields).
void set_config_value(PipelineConfig& cfg, std::string_view dotted_key, std::string_view value);

/// Parses the key-value format documented in configs/README.md, starting from defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text with every field. Round-trips through parse_config.
std::string config_to_text(const PipelineConfig& cfg);

/// SHA-256 over the canonical text of the fields that can change results.
/// Runtime-only fields (concurrency, dump_dir, in-flight cap, timeouts) are excluded.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace seeground
