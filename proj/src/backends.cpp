#include <algorithm>
#include <atomic>
#include <cctype>
#include <limits>
#include <set>

#include "seeground/agent.hpp"
#include "seeground/error.hpp"
#include "seeground/util.hpp"

namespace seeground {

// Scripted ------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(Script script, std::string name) : script_(std::move(script)), name_(std::move(name)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::cycling(std::vector<std::string> replies) {
  if (replies.empty()) throw Error(Errc::invalid_argument, "scripted backend needs at least one reply");
  auto counter = std::make_shared<std::atomic<std::size_t>>(0);
  return std::make_unique<ScriptedBackend>(
      [replies = std::move(replies), counter](const AgentRequest&) {
        return replies[counter->fetch_add(1) % replies.size()];
      },
      "scripted");
}

std::string ScriptedBackend::complete(const AgentRequest& request) { return script_(request); }

// Oracle --------------------------------------------------------------------

std::string OracleBackend::complete(const AgentRequest& request) {
  auto it = truth_.find(request.query_id);
  if (it == truth_.end()) throw Error(Errc::not_found, "oracle has no ground truth for query '" + request.query_id + "'");
  if (request.stage.rfind("parse", 0) == 0) return "target: " + it->second.label + "\nanchor: none";
  return "Answer: " + std::to_string(it->second.object_id);
}

std::unique_ptr<OracleBackend> oracle_backend(std::map<std::string, OracleTruth> truth) {
  return std::make_unique<OracleBackend>(std::move(truth));
}

// Recorded ------------------------------------------------------------------

RecordedBackend::RecordedBackend(const std::vector<Exchange>& transcript) {
  for (const auto& e : transcript) replies_[{e.query_id, e.stage}] = e.reply;
}

std::string RecordedBackend::complete(const AgentRequest& request) {
  auto it = replies_.find({request.query_id, request.stage});
  if (it == replies_.end())
    throw Error(Errc::not_found,
                "no recorded reply for query '" + request.query_id + "' stage '" + request.stage + "'");
  return it->second;
}

// Heuristic -----------------------------------------------------------------

namespace {

struct Mention {
  std::size_t pos;
  std::size_t len;
  std::string cls;
};

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

/// Whole-word occurrences of scene classes in the query, allowing plural "s"/"es".
std::vector<Mention> find_mentions(const std::string& query_lower, const std::vector<std::string>& classes) {
  std::vector<Mention> out;
  for (const auto& cls : classes) {
    if (cls.empty()) continue;
    std::size_t from = 0;
    while (true) {
      const auto pos = query_lower.find(cls, from);
      if (pos == std::string::npos) break;
      from = pos + 1;
      if (pos > 0 && is_alpha(query_lower[pos - 1])) continue;
      std::size_t end = pos + cls.size();
      if (end < query_lower.size() && is_alpha(query_lower[end])) {
        if (query_lower.compare(end, 2, "es") == 0 && (end + 2 >= query_lower.size() || !is_alpha(query_lower[end + 2])))
          end += 2;
        else if (query_lower[end] == 's' && (end + 1 >= query_lower.size() || !is_alpha(query_lower[end + 1])))
          end += 1;
        else
          continue;
      }
      out.push_back({pos, end - pos, cls});
      break;
    }
  }
  std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    return a.len > b.len;
  });
  return out;
}

std::pair<std::optional<std::string>, std::optional<std::string>> target_and_anchor(
    const std::string& query, const std::vector<std::string>& classes) {
  const auto mentions = find_mentions(to_lower(query), classes);
  std::optional<std::string> target, anchor;
  std::size_t target_end = 0;
  for (const auto& m : mentions) {
    if (!target) {
      target = m.cls;
      target_end = m.pos + m.len;
    } else if (m.pos >= target_end && m.cls != *target) {
      anchor = m.cls;
      break;
    }
  }
  return {target, anchor};
}

std::string line_value(const std::vector<std::string>& lines, std::string_view prefix, bool last) {
  std::string found;
  for (const auto& l : lines) {
    if (l.rfind(prefix, 0) == 0) {
      found = std::string(trim(std::string_view(l).substr(prefix.size())));
      if (!last) break;
    }
  }
  return found;
}

/// Lines after a heading that starts with `heading`, up to the next blank line.
std::vector<std::string> block_after(const std::vector<std::string>& lines, std::string_view heading) {
  std::vector<std::string> out;
  bool on = false;
  for (const auto& l : lines) {
    if (!on) {
      if (l.rfind(heading, 0) == 0) on = true;
      continue;
    }
    if (trim(l).empty()) break;
    out.push_back(l);
  }
  return out;
}

bool has_word(const std::string& lower, std::string_view word) {
  std::size_t from = 0;
  while (true) {
    const auto pos = lower.find(word, from);
    if (pos == std::string::npos) return false;
    const std::size_t end = pos + word.size();
    if ((pos == 0 || !is_alpha(lower[pos - 1])) && (end >= lower.size() || !is_alpha(lower[end]))) return true;
    from = pos + 1;
  }
}

bool label_matches(const std::string& label, const std::string& cls, bool exact_exists) {
  if (exact_exists) return label == cls;
  return label.find(cls) != std::string::npos || cls.find(label) != std::string::npos;
}

std::string heuristic_parse(const AgentRequest& req) {
  const auto lines = split_lines(req.user_text);
  const std::string query = line_value(lines, "Query:", /*last=*/true);
  std::vector<std::string> classes;
  const std::string listed = line_value(lines, "Object classes present in the scene:", false);
  std::size_t start = 0;
  while (start <= listed.size() && !listed.empty()) {
    const auto comma = listed.find(',', start);
    const auto item = normalize_label(listed.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) classes.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  const auto [target, anchor] = target_and_anchor(query, classes);
  if (!target) return "I could not identify the target object in this query.";
  return "target: " + *target + "\nanchor: " + anchor.value_or("none");
}

std::string heuristic_ground(const AgentRequest& req) {
  const auto lines = split_lines(req.user_text);
  const std::string query = line_value(lines, "Query:", false);
  const std::string query_lower = to_lower(query);

  SpatialText st;
  for (const auto& l : block_after(lines, "Objects in the scene")) st.text += (st.text.empty() ? "" : "\n") + l;
  const auto objects = parse_spatial_text(st);
  std::set<std::string> label_set;
  for (const auto& o : objects) label_set.insert(o.label);
  const std::vector<std::string> classes(label_set.begin(), label_set.end());

  std::map<std::int64_t, std::pair<int, int>> marked;
  for (const auto& l : block_after(lines, "Marked objects in the image")) {
    long long id = 0;
    int u = 0, v = 0;
    if (std::sscanf(l.c_str(), "- [%lld] at pixel (%d, %d)", &id, &u, &v) == 3) marked[id] = {u, v};
  }
  const bool image = req.image_png.has_value();

  const auto [target, anchor] = target_and_anchor(query, classes);
  if (!target) return "The query does not name any object class in the scene; cannot determine.";

  const bool exact = std::any_of(objects.begin(), objects.end(), [&](const SpatialLine& o) { return o.label == *target; });
  std::vector<const SpatialLine*> cands;
  for (const auto& o : objects)
    if (label_matches(o.label, *target, exact) && (!image || marked.count(o.id))) cands.push_back(&o);
  if (cands.empty()) return "None of the marked objects matches the query; cannot determine.";

  const SpatialLine* pick = nullptr;
  const bool left = has_word(query_lower, "left") || has_word(query_lower, "leftmost");
  const bool right = has_word(query_lower, "right") || has_word(query_lower, "rightmost");
  if (image && (left != right)) {
    for (const auto* c : cands) {
      if (!pick) {
        pick = c;
        continue;
      }
      const int uc = marked[c->id].first, up = marked[pick->id].first;
      if (left ? uc < up : uc > up) pick = c;
    }
  }
  if (!pick && anchor) {
    const bool aexact = std::any_of(objects.begin(), objects.end(), [&](const SpatialLine& o) { return o.label == *anchor; });
    Vec3 centroid = Vec3::Zero();
    for (const auto* c : cands) centroid += c->center;
    centroid /= static_cast<double>(cands.size());
    const SpatialLine* anchor_obj = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : objects) {
      if (!label_matches(o.label, *anchor, aexact)) continue;
      const double d = (o.center - centroid).norm();
      if (d < best) {
        best = d;
        anchor_obj = &o;
      }
    }
    if (anchor_obj) {
      best = std::numeric_limits<double>::infinity();
      for (const auto* c : cands) {
        const double d = (c->center - anchor_obj->center).norm();
        if (d < best) {
          best = d;
          pick = c;
        }
      }
    }
  }
  if (!pick) pick = cands.front();
  std::string reply = "Candidates:";
  for (const auto* c : cands) reply += " " + std::to_string(c->id);
  reply += "\nAnswer: " + std::to_string(pick->id);
  return reply;
}

}  // namespace

std::string HeuristicBackend::complete(const AgentRequest& request) {
  if (request.stage.rfind("parse", 0) == 0) return heuristic_parse(request);
  return heuristic_ground(request);
}

}  // namespace seeground
