#include "seeground/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <vector>

#include "seeground/error.hpp"
#include "seeground/util.hpp"

namespace seeground {

std::string_view marker_policy_name(MarkerPolicy p) {
  return p == MarkerPolicy::candidates_and_anchor ? "candidates_and_anchor" : "all_visible";
}

std::string_view text_scope_name(TextScope s) {
  return s == TextScope::all_objects ? "all_objects" : "candidates_only";
}

std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::oracle: return "oracle";
    case BackendKind::heuristic: return "heuristic";
    case BackendKind::recorded: return "recorded";
    case BackendKind::remote: return "remote";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view name) {
  for (auto k : {BackendKind::oracle, BackendKind::heuristic, BackendKind::recorded, BackendKind::remote})
    if (backend_kind_name(k) == name) return k;
  throw Error(Errc::invalid_argument, "unknown backend '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  render.validate();
  auto bad = [](const std::string& what) { throw Error(Errc::invalid_argument, "config: " + what); };
  if (!(view.fov_deg > 0.0 && view.fov_deg < 180.0)) bad("view.fov_deg must be in (0, 180)");
  for (double v : {view.back_offset, view.up_offset, view.eye_height, view.bev_height})
    if (!std::isfinite(v)) bad("view offsets must be finite");
  if (!(fusion.tol >= 0.0) || !std::isfinite(fusion.tol)) bad("fusion.tol must be a finite value >= 0");
  if (fusion.style.radius < 1) bad("fusion.marker_radius must be >= 1");
  if (agent.remote.max_retries < 0) bad("agent.max_retries must be >= 0");
  if (agent.remote.max_in_flight < 1 || agent.remote.max_in_flight > 1024) bad("agent.max_in_flight must be in [1, 1024]");
  if (agent.remote.timeout.count() <= 0) bad("agent.timeout_ms must be > 0");
  if (agent.remote.backoff.count() < 0) bad("agent.backoff_ms must be >= 0");
  if (agent.backend == BackendKind::recorded && !agent.recording) bad("the recorded backend needs agent.recording");
  if (concurrency < 1) bad("concurrency must be >= 1");
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(Errc::invalid_argument,
              "config: " + std::string(key) + " = '" + std::string(value) + "' (expected " + std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view s) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad_value(key, s, "a number");
  return v;
}

long long to_int(std::string_view key, std::string_view s) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_value(key, s, "an integer");
  return v;
}

bool to_bool(std::string_view key, std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  bad_value(key, s, "true or false");
}

Rgb to_rgb(std::string_view key, std::string_view s) {
  int r = 0, g = 0, b = 0;
  char tail = 0;
  if (std::sscanf(std::string(s).c_str(), "%d,%d,%d%c", &r, &g, &b, &tail) != 3 || r < 0 || g < 0 || b < 0 ||
      r > 255 || g > 255 || b > 255)
    bad_value(key, s, "r,g,b with components in [0, 255]");
  return Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

std::string rgb_text(Rgb c) { return std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b); }

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string unquote(std::string_view s, int line) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::string(s);
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 2 >= s.size()) throw Error(Errc::parse, "config line " + std::to_string(line) + ": dangling escape");
      ++i;
    }
    out += s[i];
  }
  return out;
}

std::string opt_path(const std::optional<std::filesystem::path>& p) { return p ? p->string() : ""; }

std::optional<std::filesystem::path> path_or_none(std::string_view v) {
  if (v.empty()) return std::nullopt;
  return std::filesystem::path(std::string(v));
}

struct Field {
  const char* key;  // "section.name" or "name"
  bool hashed;
  bool quoted;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
};

int to_int32(std::string_view k, std::string_view v) {
  const long long x = to_int(k, v);
  if (x < -2147483647LL || x > 2147483647LL) bad_value(k, v, "a 32-bit integer");
  return static_cast<int>(x);
}

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  using SV = std::string_view;
  static const std::vector<Field> table{
      {"strategy", true, false, [](const C& c) { return std::string(strategy_name(c.strategy)); },
       [](C& c, SV, SV v) { c.strategy = parse_strategy(v); }},
      {"text_scope", true, false, [](const C& c) { return std::string(text_scope_name(c.text_scope)); },
       [](C& c, SV k, SV v) {
         if (v == "all_objects") c.text_scope = TextScope::all_objects;
         else if (v == "candidates_only") c.text_scope = TextScope::candidates_only;
         else bad_value(k, v, "all_objects or candidates_only");
       }},
      {"concurrency", false, false, [](const C& c) { return std::to_string(c.concurrency); },
       [](C& c, SV k, SV v) { c.concurrency = to_int32(k, v); }},
      {"dump_dir", false, true, [](const C& c) { return opt_path(c.dump_dir); },
       [](C& c, SV, SV v) { c.dump_dir = path_or_none(v); }},

      {"render.width", true, false, [](const C& c) { return std::to_string(c.render.width); },
       [](C& c, SV k, SV v) { c.render.width = to_int32(k, v); }},
      {"render.height", true, false, [](const C& c) { return std::to_string(c.render.height); },
       [](C& c, SV k, SV v) { c.render.height = to_int32(k, v); }},
      {"render.splat_radius", true, false, [](const C& c) { return std::to_string(c.render.splat_radius); },
       [](C& c, SV k, SV v) { c.render.splat_radius = to_int32(k, v); }},
      {"render.near", true, false, [](const C& c) { return fmt_double(c.render.near); },
       [](C& c, SV k, SV v) { c.render.near = to_double(k, v); }},
      {"render.background", true, false, [](const C& c) { return rgb_text(c.render.background); },
       [](C& c, SV k, SV v) { c.render.background = to_rgb(k, v); }},
      {"render.ceiling_margin", true, false, [](const C& c) { return fmt_double(c.render.ceiling_margin); },
       [](C& c, SV k, SV v) { c.render.ceiling_margin = to_double(k, v); }},

      {"view.back_offset", true, false, [](const C& c) { return fmt_double(c.view.back_offset); },
       [](C& c, SV k, SV v) { c.view.back_offset = to_double(k, v); }},
      {"view.up_offset", true, false, [](const C& c) { return fmt_double(c.view.up_offset); },
       [](C& c, SV k, SV v) { c.view.up_offset = to_double(k, v); }},
      {"view.eye_height", true, false, [](const C& c) { return fmt_double(c.view.eye_height); },
       [](C& c, SV k, SV v) { c.view.eye_height = to_double(k, v); }},
      {"view.bev_height", true, false, [](const C& c) { return fmt_double(c.view.bev_height); },
       [](C& c, SV k, SV v) { c.view.bev_height = to_double(k, v); }},
      {"view.fov_deg", true, false, [](const C& c) { return fmt_double(c.view.fov_deg); },
       [](C& c, SV k, SV v) { c.view.fov_deg = to_double(k, v); }},

      {"fusion.tol", true, false, [](const C& c) { return fmt_double(c.fusion.tol); },
       [](C& c, SV k, SV v) { c.fusion.tol = to_double(k, v); }},
      {"fusion.min_visible", true, false, [](const C& c) { return std::to_string(c.fusion.style.min_visible); },
       [](C& c, SV k, SV v) {
         const long long x = to_int(k, v);
         if (x < 0) bad_value(k, v, "an integer >= 0");
         c.fusion.style.min_visible = static_cast<std::size_t>(x);
       }},
      {"fusion.marker_radius", true, false, [](const C& c) { return std::to_string(c.fusion.style.radius); },
       [](C& c, SV k, SV v) { c.fusion.style.radius = to_int32(k, v); }},
      {"fusion.marker_fill", true, false, [](const C& c) { return rgb_text(c.fusion.style.fill); },
       [](C& c, SV k, SV v) { c.fusion.style.fill = to_rgb(k, v); }},
      {"fusion.marker_border", true, false, [](const C& c) { return rgb_text(c.fusion.style.border); },
       [](C& c, SV k, SV v) { c.fusion.style.border = to_rgb(k, v); }},
      {"fusion.marker_text", true, false, [](const C& c) { return rgb_text(c.fusion.style.text); },
       [](C& c, SV k, SV v) { c.fusion.style.text = to_rgb(k, v); }},
      {"fusion.marker_policy", true, false, [](const C& c) { return std::string(marker_policy_name(c.fusion.marker_policy)); },
       [](C& c, SV k, SV v) {
         if (v == "candidates_and_anchor") c.fusion.marker_policy = MarkerPolicy::candidates_and_anchor;
         else if (v == "all_visible") c.fusion.marker_policy = MarkerPolicy::all_visible;
         else bad_value(k, v, "candidates_and_anchor or all_visible");
       }},

      {"agent.backend", true, false, [](const C& c) { return std::string(backend_kind_name(c.agent.backend)); },
       [](C& c, SV, SV v) { c.agent.backend = parse_backend_kind(v); }},
      {"agent.endpoint", true, true, [](const C& c) { return c.agent.remote.base_url; },
       [](C& c, SV, SV v) { c.agent.remote.base_url = std::string(v); }},
      {"agent.model", true, true, [](const C& c) { return c.agent.remote.model; },
       [](C& c, SV, SV v) { c.agent.remote.model = std::string(v); }},
      {"agent.max_retries", true, false, [](const C& c) { return std::to_string(c.agent.remote.max_retries); },
       [](C& c, SV k, SV v) { c.agent.remote.max_retries = to_int32(k, v); }},
      {"agent.max_in_flight", false, false, [](const C& c) { return std::to_string(c.agent.remote.max_in_flight); },
       [](C& c, SV k, SV v) { c.agent.remote.max_in_flight = to_int32(k, v); }},
      {"agent.timeout_ms", false, false, [](const C& c) { return std::to_string(c.agent.remote.timeout.count()); },
       [](C& c, SV k, SV v) { c.agent.remote.timeout = std::chrono::milliseconds(to_int(k, v)); }},
      {"agent.backoff_ms", false, false, [](const C& c) { return std::to_string(c.agent.remote.backoff.count()); },
       [](C& c, SV k, SV v) { c.agent.remote.backoff = std::chrono::milliseconds(to_int(k, v)); }},
      {"agent.prompts", true, true, [](const C& c) { return opt_path(c.agent.prompts); },
       [](C& c, SV, SV v) { c.agent.prompts = path_or_none(v); }},
      {"agent.recording", true, true, [](const C& c) { return opt_path(c.agent.recording); },
       [](C& c, SV, SV v) { c.agent.recording = path_or_none(v); }},

      {"ablation.disable_fam", true, false, [](const C& c) { return std::string(c.ablation.disable_fam ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.ablation.disable_fam = to_bool(k, v); }},
      {"ablation.disable_pam", true, false, [](const C& c) { return std::string(c.ablation.disable_pam ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.ablation.disable_pam = to_bool(k, v); }},
      {"ablation.disable_texture", true, false,
       [](const C& c) { return std::string(c.ablation.disable_texture ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.ablation.disable_texture = to_bool(k, v); }},
      {"ablation.disable_pos", true, false, [](const C& c) { return std::string(c.ablation.disable_pos ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.ablation.disable_pos = to_bool(k, v); }},
  };
  return table;
}

std::string canonical(const PipelineConfig& cfg, bool hashed_only) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  std::string section;
  for (const auto& f : fields()) {
    if (hashed_only && !f.hashed) continue;
    const std::string_view key = f.key;
    const auto dot = key.find('.');
    const std::string sec = dot == std::string_view::npos ? "" : std::string(key.substr(0, dot));
    const std::string name(dot == std::string_view::npos ? key : key.substr(dot + 1));
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    const std::string value = f.get(cfg);
    out += name + " = " + (f.quoted ? quote(value) : value) + "\n";
  }
  return out;
}

}  // namespace

void set_config_value(PipelineConfig& cfg, std::string_view dotted_key, std::string_view value) {
  for (const auto& f : fields()) {
    if (dotted_key == f.key) {
      f.set(cfg, dotted_key, value);
      return;
    }
  }
  throw Error(Errc::invalid_argument, "config: unknown key '" + std::string(dotted_key) + "'");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::string section;
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto where = [&] { return "config line " + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(Errc::parse, where() + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::parse, where() + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value = unquote(trim(line.substr(eq + 1)), line_no);
    if (key.empty()) throw Error(Errc::parse, where() + "empty key");
    if (section.empty() && key == "version") {
      if (value != std::to_string(kConfigVersion))
        throw Error(Errc::parse, where() + "unsupported config version " + value);
      continue;
    }
    try {
      set_config_value(cfg, section.empty() ? key : section + "." + key, value);
    } catch (const Error& e) {
      throw Error(Errc::parse, where() + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string config_to_text(const PipelineConfig& cfg) { return canonical(cfg, false); }

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(canonical(cfg, true)); }

}  // namespace seeground
