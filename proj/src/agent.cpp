#include "seeground/agent.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "seeground/error.hpp"
#include "seeground/image.hpp"
#include "seeground/util.hpp"

namespace seeground {

using nlohmann::json;

extern const char* const kBuiltinPromptsV1;

// Templates -----------------------------------------------------------------

namespace {

FewShotSet parse_fewshot(std::string_view text) {
  FewShotSet set;
  FewShotExample cur;
  bool open = false;
  auto flush = [&] {
    if (open) {
      if (cur.query.empty() || cur.target_class.empty())
        throw Error(Errc::parse, "few-shot example needs 'Query:' and 'target:' lines");
      set.examples.push_back(cur);
    }
    cur = {};
    open = false;
  };
  for (const auto& raw : split_lines(text)) {
    const std::string_view line = trim(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    const std::string lower = to_lower(line);
    if (lower.rfind("query:", 0) == 0) {
      flush();
      cur.query = std::string(trim(line.substr(6)));
      open = true;
    } else if (lower.rfind("target:", 0) == 0) {
      cur.target_class = normalize_label(line.substr(7));
    } else if (lower.rfind("anchor:", 0) == 0) {
      const std::string a = normalize_label(line.substr(7));
      if (!a.empty() && a != "none") cur.anchor_class = a;
    } else {
      throw Error(Errc::parse, "unexpected few-shot line '" + std::string(line) + "'");
    }
  }
  flush();
  return set;
}

}  // namespace

PromptTemplates PromptTemplates::parse(std::string_view text) {
  std::map<std::string, std::string> sections;
  std::string current;
  bool in_section = false;
  for (const auto& line : split_lines(text)) {
    const std::string_view t = trim(line);
    if (t.size() > 8 && t.substr(0, 4) == "=== " && t.substr(t.size() - 4) == " ===") {
      current = std::string(trim(t.substr(4, t.size() - 8)));
      sections[current];
      in_section = true;
      continue;
    }
    if (!in_section) continue;  // preamble comments
    auto& body = sections[current];
    if (!body.empty()) body += '\n';
    body += line;
  }
  auto take = [&](const char* key) {
    auto it = sections.find(key);
    if (it == sections.end()) throw Error(Errc::parse, std::string("prompt file lacks section '") + key + "'");
    return std::string(trim(it->second));
  };
  PromptTemplates p;
  p.parse_system = take("parse_system");
  p.parse_user = take("parse_user");
  p.parse_reprompt = take("parse_reprompt");
  p.ground_system = take("ground_system");
  p.ground_user = take("ground_user");
  p.ground_reprompt = take("ground_reprompt");
  p.fewshot = parse_fewshot(take("fewshot"));
  if (p.fewshot.examples.empty()) throw Error(Errc::parse, "prompt file has no few-shot examples");
  return p;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates kBuiltin = parse(kBuiltinPromptsV1);
  return kBuiltin;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string format_fewshot(const FewShotSet& fewshot) {
  std::string out;
  for (std::size_t i = 0; i < fewshot.examples.size(); ++i) {
    const auto& e = fewshot.examples[i];
    if (i) out += "\n\n";
    out += "Query: " + e.query + "\ntarget: " + e.target_class + "\nanchor: " + e.anchor_class.value_or("none");
  }
  return out;
}

// Transcript ----------------------------------------------------------------

std::string exchange_to_jsonl(const Exchange& e) {
  json j;
  j["query_id"] = e.query_id;
  j["stage"] = e.stage;
  j["request_text"] = e.request_text;
  if (e.image_sha256) j["image_sha256"] = *e.image_sha256;
  j["reply"] = e.reply;
  j["latency_ms"] = e.latency_ms;
  return j.dump();
}

Exchange exchange_from_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& err) {
    throw Error(Errc::parse, std::string("transcript: ") + err.what());
  }
  Exchange e;
  try {
    e.query_id = j.at("query_id").get<std::string>();
    e.stage = j.at("stage").get<std::string>();
    e.request_text = j.value("request_text", "");
    if (j.contains("image_sha256") && j["image_sha256"].is_string()) e.image_sha256 = j["image_sha256"].get<std::string>();
    e.reply = j.at("reply").get<std::string>();
    e.latency_ms = j.value("latency_ms", 0.0);
  } catch (const json::exception& err) {
    throw Error(Errc::parse, std::string("transcript entry: ") + err.what());
  }
  return e;
}

std::vector<Exchange> load_transcript(const std::filesystem::path& path) {
  std::vector<Exchange> out;
  for (const auto& line : split_lines(read_file(path)))
    if (!trim(line).empty()) out.push_back(exchange_from_jsonl(line));
  return out;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) : path_(path) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot create transcript '" + path_.string() + "'");
}

void TranscriptWriter::append(const Exchange& e) {
  const std::string line = exchange_to_jsonl(e) + "\n";
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  out << line;
  if (!out) throw Error(Errc::io, "cannot append to transcript '" + path_.string() + "'");
}

std::string AgentSession::exchange(const std::string& stage, const std::string& system_text,
                                   const std::string& user_text, const std::optional<std::string>& image_png) {
  AgentRequest req{query_id_, stage, system_text, user_text, image_png};
  const auto t0 = std::chrono::steady_clock::now();
  std::string reply = backend_.complete(req);
  const auto t1 = std::chrono::steady_clock::now();
  Exchange e;
  e.query_id = query_id_;
  e.stage = stage;
  e.request_text = system_text + "\n---\n" + user_text;
  if (image_png) e.image_sha256 = sha256_hex(*image_png);
  e.reply = reply;
  e.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  transcript_.push_back(e);
  if (writer_) writer_->append(e);
  return reply;
}

// Parse ---------------------------------------------------------------------

std::optional<ParsedQuery> parse_parse_reply(std::string_view reply, std::string_view raw_query) {
  std::optional<std::string> target, anchor;
  for (const auto& raw : split_lines(reply)) {
    std::string_view line = trim(raw);
    while (!line.empty() && (line.front() == '*' || line.front() == '-')) line = trim(line.substr(1));
    const std::string lower = to_lower(line);
    if (lower.rfind("target:", 0) == 0) target = normalize_label(line.substr(7));
    if (lower.rfind("anchor:", 0) == 0) anchor = normalize_label(line.substr(7));
  }
  if (!target || target->empty() || !anchor) return std::nullopt;
  ParsedQuery pq;
  pq.target_class = *target;
  if (!anchor->empty() && *anchor != "none" && *anchor != "null" && *anchor != "n/a") pq.anchor_class = *anchor;
  pq.raw_query = std::string(raw_query);
  return pq;
}

ParsedQuery parse_query(AgentSession& session, const std::string& query, const FewShotSet& fewshot,
                        const std::vector<std::string>& scene_classes, const PromptTemplates& prompts) {
  if (trim(query).empty()) throw Error(Errc::invalid_argument, "empty query");
  std::string classes;
  for (std::size_t i = 0; i < scene_classes.size(); ++i) classes += (i ? ", " : "") + scene_classes[i];
  const std::string user = fill_template(
      prompts.parse_user, {{"query", query}, {"fewshot", format_fewshot(fewshot)}, {"classes", classes}});
  std::string reply = session.exchange("parse", prompts.parse_system, user);
  if (auto pq = parse_parse_reply(reply, query)) return *pq;
  reply = session.exchange("parse_retry", prompts.parse_system, user + "\n\n" + prompts.parse_reprompt);
  if (auto pq = parse_parse_reply(reply, query)) return *pq;
  throw Error(Errc::unparseable_reply, "unparseable parse reply");
}

// Ground --------------------------------------------------------------------

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct IntToken {
  std::size_t pos;
  std::int64_t value;
  bool standalone;
};

std::vector<IntToken> integer_tokens(std::string_view s) {
  std::vector<IntToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    bool standalone = true;
    if (i > 0 && (word_char(s[i - 1]) || (s[i - 1] == '.' && i > 1 && std::isdigit(static_cast<unsigned char>(s[i - 2])))))
      standalone = false;
    if (j < s.size() && (word_char(s[j]) || (s[j] == '.' && j + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[j + 1])))))
      standalone = false;
    const std::string digits(s.substr(i, std::min<std::size_t>(j - i, 18)));
    out.push_back({i, std::stoll(digits), standalone});
    i = j;
  }
  return out;
}

}  // namespace

std::int64_t parse_answer(std::string_view raw) {
  const std::string lower = to_lower(raw);
  const auto tokens = integer_tokens(raw);
  const auto tag = lower.rfind("answer:");
  if (tag != std::string::npos) {
    for (const auto& t : tokens)
      if (t.pos >= tag + 7) return t.value;
  }
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it)
    if (it->standalone) return it->value;
  throw Error(Errc::unparseable_reply, "no object id in reply");
}

std::string describe_markers(const std::vector<MarkerSpec>& markers, bool image_attached) {
  if (!image_attached) return "(no image attached)";
  if (markers.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const auto& m = markers[i];
    if (i) out += '\n';
    out += "- [" + std::to_string(m.object_id) + "] at pixel (" + std::to_string(m.center.u) + ", " +
           std::to_string(m.center.v) + ")";
  }
  return out;
}

GroundingAnswer ground(AgentSession& session, const GroundInputs& inputs,
                       const std::function<bool(std::int64_t)>& accept, const PromptTemplates& prompts) {
  const std::string user = fill_template(prompts.ground_user,
                                         {{"query", inputs.query},
                                          {"spatial_text", inputs.spatial_text.text},
                                          {"markers", describe_markers(inputs.markers, inputs.image_png.has_value())}});
  std::optional<std::int64_t> rejected;
  std::string reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string stage = attempt == 0 ? "ground" : "ground_retry";
    const std::string text = attempt == 0 ? user : user + "\n\n" + prompts.ground_reprompt;
    reply = session.exchange(stage, prompts.ground_system, text, inputs.image_png);
    std::int64_t id = 0;
    try {
      id = parse_answer(reply);
    } catch (const Error&) {
      rejected.reset();
      continue;
    }
    if (accept && !accept(id)) {
      rejected = id;
      continue;
    }
    return GroundingAnswer{id, reply, session.backend().name()};
  }
  if (rejected)
    throw Error(Errc::rejected_answer, "predicted id " + std::to_string(*rejected) + " is not in the object table");
  throw Error(Errc::unparseable_reply, "unparseable grounding reply");
}

}  // namespace seeground
