#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seeground/fam.hpp"
#include "seeground/pam.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {

// Prompts -------------------------------------------------------------------

struct FewShotExample {
  std::string query;
  std::string target_class;
  std::optional<std::string> anchor_class;
};

struct FewShotSet {
  std::vector<FewShotExample> examples;
};

struct PromptTemplates {
  std::string parse_system;
  std::string parse_user;
  std::string parse_reprompt;
  std::string ground_system;
  std::string ground_user;
  std::string ground_reprompt;
  FewShotSet fewshot;

  /// Parses the sectioned template format (see prompts/prompts_v1.txt).
  static PromptTemplates parse(std::string_view text);
  static PromptTemplates load(const std::filesystem::path& path);
  /// Copy of prompts/prompts_v1.txt compiled into the binary.
  static const PromptTemplates& builtin();
};

/// Replaces each "{key}" with its value; unknown placeholders are left untouched.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string format_fewshot(const FewShotSet& fewshot);

// Transport -----------------------------------------------------------------

struct AgentRequest {
  std::string query_id;
  std::string stage;  // parse, parse_retry, ground, ground_retry
  std::string system_text;
  std::string user_text;
  /// PNG bytes; sent base64-encoded inline.
  std::optional<std::string> image_png;
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
  /// Must be safe to call concurrently.
  virtual std::string complete(const AgentRequest& request) = 0;
};

struct Exchange {
  std::string query_id;
  std::string stage;
  std::string request_text;
  std::optional<std::string> image_sha256;
  std::string reply;
  double latency_ms = 0.0;
};

std::string exchange_to_jsonl(const Exchange& e);
Exchange exchange_from_jsonl(std::string_view line);
std::vector<Exchange> load_transcript(const std::filesystem::path& path);

/// Serialized JSON-lines appender shared by concurrent queries.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path);
  void append(const Exchange& e);

 private:
  std::mutex mu_;
  std::filesystem::path path_;
};

/// Runs one request through a backend and records the exchange.
class AgentSession {
 public:
  AgentSession(AgentBackend& backend, std::string query_id, TranscriptWriter* writer = nullptr)
      : backend_(backend), query_id_(std::move(query_id)), writer_(writer) {}

  std::string exchange(const std::string& stage, const std::string& system_text, const std::string& user_text,
                       const std::optional<std::string>& image_png = std::nullopt);

  const std::vector<Exchange>& transcript() const noexcept { return transcript_; }
  const std::string& query_id() const noexcept { return query_id_; }
  AgentBackend& backend() noexcept { return backend_; }

 private:
  AgentBackend& backend_;
  std::string query_id_;
  TranscriptWriter* writer_;
  std::vector<Exchange> transcript_;
};

// Operations ----------------------------------------------------------------

/// Reads "target:"/"anchor:" lines; empty when either is missing.
std::optional<ParsedQuery> parse_parse_reply(std::string_view reply, std::string_view raw_query);

/// Classes are listed in the prompt so the agent answers in the scene's vocabulary.
ParsedQuery parse_query(AgentSession& session, const std::string& query, const FewShotSet& fewshot,
                        const std::vector<std::string>& scene_classes,
                        const PromptTemplates& prompts = PromptTemplates::builtin());

struct GroundingAnswer {
  std::int64_t object_id = 0;
  std::string raw_reply;
  std::string backend_name;
};

/// Text block listing marker ids and centers, as placed into the ground prompt.
std::string describe_markers(const std::vector<MarkerSpec>& markers, bool image_attached);

struct GroundInputs {
  std::string query;
  std::optional<std::string> image_png;  // empty: text-only
  std::vector<MarkerSpec> markers;
  SpatialText spatial_text;
};

/// One reprompt on an unparseable reply, and one on an id rejected by `accept`.
/// Throws Errc::unparseable_reply or Errc::rejected_answer after that.
GroundingAnswer ground(AgentSession& session, const GroundInputs& inputs,
                       const std::function<bool(std::int64_t)>& accept = {},
                       const PromptTemplates& prompts = PromptTemplates::builtin());

/// First integer after the last "Answer:" (case-insensitive); otherwise the last
/// standalone integer. Throws Errc::unparseable_reply when there is none.
std::int64_t parse_answer(std::string_view raw);

// Backends ------------------------------------------------------------------

/// Replies from a callback; deterministic as long as the callback is.
class ScriptedBackend : public AgentBackend {
 public:
  using Script = std::function<std::string(const AgentRequest&)>;
  explicit ScriptedBackend(Script script, std::string name = "scripted");
  /// Cycles through fixed replies, shared across requests.
  static std::unique_ptr<ScriptedBackend> cycling(std::vector<std::string> replies);

  std::string name() const override { return name_; }
  bool deterministic() const override { return true; }
  std::string complete(const AgentRequest& request) override;

 private:
  Script script_;
  std::string name_;
};

struct OracleTruth {
  std::int64_t object_id = 0;
  std::string label;
};

/// Answers every grounding request with the ground-truth id of its query, and
/// parse requests with the ground-truth class and no anchor.
class OracleBackend : public AgentBackend {
 public:
  explicit OracleBackend(std::map<std::string, OracleTruth> truth) : truth_(std::move(truth)) {}
  std::string name() const override { return "oracle"; }
  bool deterministic() const override { return true; }
  std::string complete(const AgentRequest& request) override;

 private:
  std::map<std::string, OracleTruth> truth_;
};

std::unique_ptr<OracleBackend> oracle_backend(std::map<std::string, OracleTruth> truth);

/// Replays a transcript keyed by (query_id, stage).
class RecordedBackend : public AgentBackend {
 public:
  explicit RecordedBackend(const std::vector<Exchange>& transcript);
  std::string name() const override { return "recorded"; }
  bool deterministic() const override { return true; }
  std::string complete(const AgentRequest& request) override;

 private:
  std::map<std::pair<std::string, std::string>, std::string> replies_;
};

/// Rule-based stand-in for a VLM that only reads the prompt text. Parse: first
/// scene class mentioned in the query is the target, the next distinct one the
/// anchor. Ground: among target-class objects that carry a marker (all
/// target-class objects when no image is attached) pick the leftmost/rightmost
/// marker if the query says left/right, else the one nearest the anchor, else
/// the lowest id. Answers "cannot determine" when no candidate is marked.
class HeuristicBackend : public AgentBackend {
 public:
  std::string name() const override { return "heuristic"; }
  bool deterministic() const override { return true; }
  std::string complete(const AgentRequest& request) override;
};

struct RemoteConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::string model = "Qwen2-VL-72B-Instruct";
  int max_retries = 2;
  int max_in_flight = 4;
  std::chrono::milliseconds timeout{120000};
  std::chrono::milliseconds backoff{500};

  /// Fills base_url / api_key from SEEGROUND_VLM_URL / SEEGROUND_VLM_KEY when set.
  void apply_environment();
};

/// OpenAI-compatible chat-completions client.
class RemoteBackend : public AgentBackend {
 public:
  explicit RemoteBackend(RemoteConfig cfg);
  std::string name() const override { return "remote:" + cfg_.model; }
  bool deterministic() const override { return false; }
  std::string complete(const AgentRequest& request) override;

  /// Request body sent for `request` (exposed for wire-format tests).
  std::string request_body(const AgentRequest& request) const;
  /// Extracts the reply text from a chat-completions response body.
  static std::string reply_text(std::string_view response_body);

 private:
  RemoteConfig cfg_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::counting_semaphore<1024> in_flight_;
};

}  // namespace seeground
