#include "seeground/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "seeground/error.hpp"
#include "seeground/pam.hpp"
#include "seeground/util.hpp"

namespace seeground {

using nlohmann::json;

// Benchmark files -----------------------------------------------------------

namespace {

json box_json(const Aabb& b) {
  return {{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}};
}

Aabb box_from(const json& j) {
  auto v = [&](const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw Error(Errc::parse, std::string("box.") + key + " must have 3 numbers");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  return Aabb(v("min"), v("max"));
}

const std::set<std::string> kKnownTags{"unique", "multiple", "easy", "hard", "view_dep", "view_indep"};

}  // namespace

std::string query_to_jsonl(const QueryRecord& q) {
  json j;
  j["query_id"] = q.query_id;
  j["scene_id"] = q.scene_id;
  j["query"] = q.query;
  if (q.gt_box) j["gt_box"] = box_json(*q.gt_box);
  if (q.gt_object_id) j["gt_object_id"] = *q.gt_object_id;
  j["gt_label"] = q.gt_label;
  j["split_tags"] = std::vector<std::string>(q.split_tags.begin(), q.split_tags.end());
  return j.dump();
}

QueryRecord query_from_jsonl(std::string_view line) {
  QueryRecord q;
  try {
    const json j = json::parse(line);
    q.query_id = j.at("query_id").get<std::string>();
    q.scene_id = j.at("scene_id").get<std::string>();
    q.query = j.at("query").get<std::string>();
    if (j.contains("gt_box") && !j["gt_box"].is_null()) q.gt_box = box_from(j["gt_box"]);
    if (j.contains("gt_object_id") && !j["gt_object_id"].is_null()) q.gt_object_id = j["gt_object_id"].get<std::int64_t>();
    q.gt_label = normalize_label(j.value("gt_label", ""));
    if (j.contains("split_tags"))
      for (const auto& t : j["split_tags"]) {
        const auto tag = t.get<std::string>();
        if (!kKnownTags.count(tag)) throw Error(Errc::parse, "unknown split tag '" + tag + "'");
        q.split_tags.insert(tag);
      }
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("benchmark record: ") + e.what());
  }
  if (!q.gt_box && !q.gt_object_id)
    throw Error(Errc::parse, "query '" + q.query_id + "' needs gt_box or gt_object_id");
  return q;
}

std::vector<QueryRecord> load_benchmark(const std::filesystem::path& path) {
  std::vector<QueryRecord> out;
  std::set<std::string> ids;
  for (const auto& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    out.push_back(query_from_jsonl(line));
    if (!ids.insert(out.back().query_id).second)
      throw Error(Errc::parse, "duplicate query id '" + out.back().query_id + "' in benchmark");
  }
  return out;
}

void save_benchmark(const std::vector<QueryRecord>& queries, const std::filesystem::path& path) {
  std::string text;
  for (const auto& q : queries) text += query_to_jsonl(q) + "\n";
  write_file(path, text);
}

// Metrics -------------------------------------------------------------------

double iou_aabb(const Aabb& a, const Aabb& b) {
  const Vec3 lo = a.min.cwiseMax(b.min);
  const Vec3 hi = a.max.cwiseMin(b.max);
  const Vec3 ext = (hi - lo).cwiseMax(0.0);
  const double inter = ext.x() * ext.y() * ext.z();
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Classification classify_unique_multiple(const QueryRecord& q, const ObjectLookupTable& olt) {
  const auto matches = match_class(olt, q.gt_label);
  Classification c;
  if (matches.size() == 1) {
    c.tag = UniqueTag::unique;
  } else {
    c.tag = UniqueTag::multiple;
    if (matches.empty())
      c.warning = "query '" + q.query_id + "': class '" + q.gt_label + "' has no match in scene '" + q.scene_id + "'";
  }
  return c;
}

const SplitMetrics* MetricsReport::row(const std::string& name) const {
  for (const auto& [k, v] : rows)
    if (k == name) return &v;
  return nullptr;
}

namespace {

std::map<std::string, const GroundingResult*> index_results(const std::vector<GroundingResult>& results,
                                                            const std::vector<QueryRecord>& queries) {
  std::set<std::string> known;
  for (const auto& q : queries) known.insert(q.query_id);
  std::map<std::string, const GroundingResult*> by_id;
  for (const auto& r : results) {
    if (!known.count(r.query_id)) throw Error(Errc::not_found, "result for unknown query '" + r.query_id + "'");
    if (!by_id.emplace(r.query_id, &r).second)
      throw Error(Errc::invalid_argument, "duplicate result for query '" + r.query_id + "'");
  }
  return by_id;
}

}  // namespace

MetricsReport evaluate_scanrefer(const std::vector<GroundingResult>& results, const std::vector<QueryRecord>& queries,
                                 const std::map<std::string, ObjectLookupTable>& olts) {
  const auto by_id = index_results(results, queries);
  MetricsReport rep;
  rep.mode = EvalMode::scanrefer;
  SplitMetrics unique, multiple, overall;
  bool used_metadata = false, used_table = false;

  for (const auto& q : queries) {
    bool is_unique = false;
    if (q.split_tags.count("unique") || q.split_tags.count("multiple")) {
      is_unique = q.split_tags.count("unique") > 0;
      used_metadata = true;
    } else if (auto it = olts.find(q.scene_id); it != olts.end()) {
      const auto c = classify_unique_multiple(q, it->second);
      is_unique = c.tag == UniqueTag::unique;
      if (c.warning) rep.warnings.push_back(*c.warning);
      used_table = true;
    } else {
      rep.warnings.push_back("query '" + q.query_id + "': no object table for scene '" + q.scene_id +
                             "', counted as multiple");
    }
    SplitMetrics& split = is_unique ? unique : multiple;

    bool ok25 = false, ok50 = false, failed = true;
    auto it = by_id.find(q.query_id);
    if (it != by_id.end() && it->second->ok() && it->second->predicted_box) {
      failed = false;
      if (q.gt_box) {
        const double iou = iou_aabb(*it->second->predicted_box, *q.gt_box);
        ok25 = iou >= 0.25;
        ok50 = iou >= 0.5;
      } else {
        rep.warnings.push_back("query '" + q.query_id + "' has no gt_box; scored as incorrect");
      }
    }
    for (SplitMetrics* m : {&split, &overall}) {
      ++m->n;
      m->correct_25 += ok25;
      m->correct_50 += ok50;
      m->failures += failed;
    }
  }
  rep.rows = {{"unique", unique}, {"multiple", multiple}, {"overall", overall}};
  rep.split_rule = used_metadata && used_table ? "unique_multiple=mixed(metadata,object_table)"
                   : used_metadata             ? "unique_multiple=metadata"
                                               : "unique_multiple=object_table";
  return rep;
}

MetricsReport evaluate_nr3d(const std::vector<GroundingResult>& results, const std::vector<QueryRecord>& queries,
                            const std::map<std::string, ObjectLookupTable>& olts) {
  const auto by_id = index_results(results, queries);
  MetricsReport rep;
  rep.mode = EvalMode::nr3d;
  SplitMetrics easy, hard, dep, indep, overall;
  bool meta = false, fallback = false;

  for (const auto& q : queries) {
    if (!q.gt_object_id) throw Error(Errc::invalid_argument, "nr3d query '" + q.query_id + "' lacks gt_object_id");
    bool correct = false, failed = true;
    auto it = by_id.find(q.query_id);
    if (it != by_id.end() && it->second->ok()) {
      failed = false;
      correct = *it->second->predicted_object_id == *q.gt_object_id;
    }
    std::vector<SplitMetrics*> targets{&overall};
    if (q.split_tags.count("easy") || q.split_tags.count("hard")) {
      targets.push_back(q.split_tags.count("easy") ? &easy : &hard);
      meta = true;
    } else if (auto o = olts.find(q.scene_id); o != olts.end()) {
      targets.push_back(match_class(o->second, q.gt_label).size() <= 2 ? &easy : &hard);
      fallback = true;
    } else {
      rep.warnings.push_back("query '" + q.query_id + "': no easy/hard tag and no object table");
    }
    if (q.split_tags.count("view_dep"))
      targets.push_back(&dep);
    else if (q.split_tags.count("view_indep"))
      targets.push_back(&indep);
    for (SplitMetrics* m : targets) {
      ++m->n;
      m->correct += correct;
      m->failures += failed;
    }
  }
  rep.rows = {{"easy", easy}, {"hard", hard}, {"view_dep", dep}, {"view_indep", indep}, {"overall", overall}};
  rep.split_rule = meta && fallback ? "easy_hard=mixed(metadata,same_class_count<=2)"
                   : fallback       ? "easy_hard=same_class_count<=2"
                                    : "easy_hard=metadata";
  return rep;
}

// Reports -------------------------------------------------------------------

std::string format_percent(double fraction) { return format_fixed(fraction * 100.0, 1); }

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["mode"] = report.mode == EvalMode::scanrefer ? "scanrefer" : "nr3d";
  j["split_rule"] = report.split_rule;
  j["warnings"] = report.warnings;
  json rows = json::array();
  for (const auto& [name, m] : report.rows) {
    json r{{"split", name}, {"n", m.n}, {"failures", m.failures}};
    if (report.mode == EvalMode::scanrefer) {
      r["correct_at_25"] = m.correct_25;
      r["correct_at_50"] = m.correct_50;
      r["acc_at_25"] = format_percent(m.acc_at_25());
      r["acc_at_50"] = format_percent(m.acc_at_50());
    } else {
      r["correct"] = m.correct;
      r["accuracy"] = format_percent(m.accuracy());
    }
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(std::string_view text) {
  MetricsReport rep;
  try {
    const json j = json::parse(text);
    const auto mode = j.at("mode").get<std::string>();
    if (mode != "scanrefer" && mode != "nr3d") throw Error(Errc::parse, "unknown report mode '" + mode + "'");
    rep.mode = mode == "scanrefer" ? EvalMode::scanrefer : EvalMode::nr3d;
    rep.split_rule = j.value("split_rule", "");
    rep.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& r : j.at("rows")) {
      SplitMetrics m;
      m.n = r.at("n").get<std::size_t>();
      m.failures = r.at("failures").get<std::size_t>();
      if (rep.mode == EvalMode::scanrefer) {
        m.correct_25 = r.at("correct_at_25").get<std::size_t>();
        m.correct_50 = r.at("correct_at_50").get<std::size_t>();
      } else {
        m.correct = r.at("correct").get<std::size_t>();
      }
      rep.rows.emplace_back(r.at("split").get<std::string>(), m);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("report: ") + e.what());
  }
  return rep;
}

std::string report_to_table(const MetricsReport& report) {
  std::vector<std::vector<std::string>> cells;
  if (report.mode == EvalMode::scanrefer) {
    cells.push_back({"split", "n", "Acc@0.25", "Acc@0.5", "failures"});
    for (const auto& [name, m] : report.rows)
      cells.push_back({name, std::to_string(m.n), format_percent(m.acc_at_25()), format_percent(m.acc_at_50()),
                       std::to_string(m.failures)});
  } else {
    cells.push_back({"split", "n", "Acc", "failures"});
    for (const auto& [name, m] : report.rows)
      cells.push_back({name, std::to_string(m.n), format_percent(m.accuracy()), std::to_string(m.failures)});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        out += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    out += '\n';
  }
  return out;
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  write_file(path, report_to_json(report));
  auto txt = path;
  txt.replace_extension(".txt");
  write_file(txt, report_to_table(report));
}

MetricsReport read_report(const std::filesystem::path& path) { return report_from_json(read_file(path)); }

// Converters ----------------------------------------------------------------

std::vector<QueryRecord> convert_scanrefer(std::string_view json_text,
                                           const std::optional<std::filesystem::path>& gt_olt_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, std::string("scanrefer: ") + e.what());
  }
  if (!doc.is_array()) throw Error(Errc::parse, "scanrefer: expected a JSON array");
  std::map<std::string, ObjectLookupTable> gt_tables;
  std::vector<QueryRecord> out;
  for (const auto& a : doc) {
    QueryRecord q;
    try {
      q.scene_id = a.at("scene_id").get<std::string>();
      const auto& oid = a.at("object_id");
      q.gt_object_id = oid.is_string() ? std::stoll(oid.get<std::string>()) : oid.get<std::int64_t>();
      std::string name = a.at("object_name").get<std::string>();
      std::replace(name.begin(), name.end(), '_', ' ');
      q.gt_label = normalize_label(name);
      q.query = a.at("description").get<std::string>();
      const auto& ann = a.contains("ann_id") ? a["ann_id"] : json(out.size());
      const std::string ann_id = ann.is_string() ? ann.get<std::string>() : std::to_string(ann.get<std::int64_t>());
      q.query_id = q.scene_id + "/" + std::to_string(*q.gt_object_id) + "/" + ann_id;
    } catch (const json::exception& e) {
      throw Error(Errc::parse, std::string("scanrefer record: ") + e.what());
    }
    if (gt_olt_dir) {
      auto it = gt_tables.find(q.scene_id);
      if (it == gt_tables.end()) it = gt_tables.emplace(q.scene_id, load_olt(*gt_olt_dir / (q.scene_id + ".json"))).first;
      if (const auto* r = it->second.find(*q.gt_object_id)) q.gt_box = r->box;
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(Errc::parse, "csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool is_view_dependent(std::string_view utterance) {
  static const std::set<std::string> kViewWords{"front",  "behind",   "back",      "right",   "left",
                                                "facing", "leftmost", "rightmost", "looking", "across"};
  std::string word;
  for (char ch : to_lower(utterance) + " ") {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      word += ch;
    } else {
      if (kViewWords.count(word)) return true;
      word.clear();
    }
  }
  return false;
}

std::vector<QueryRecord> convert_nr3d(std::string_view csv_text) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw Error(Errc::parse, "nr3d: empty csv");
  const auto& header = rows.front();
  auto col = [&](const char* name, bool required) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return static_cast<int>(i);
    if (required) throw Error(Errc::parse, std::string("nr3d: missing column '") + name + "'");
    return -1;
  };
  const int c_stim = col("stimulus_id", true);
  const int c_utt = col("utterance", true);
  const int c_target = col("target_id", false);
  const int c_type = col("instance_type", false);
  const int c_scan = col("scan_id", false);
  const int c_assign = col("assignmentid", false);

  std::vector<QueryRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto at = [&](int c) -> std::string { return c >= 0 && c < static_cast<int>(row.size()) ? row[c] : ""; };
    const std::string stim = at(c_stim);
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (int k = 0; k < 4; ++k) {
      const auto dash = stim.find('-', start);
      if (dash == std::string::npos) break;
      parts.push_back(stim.substr(start, dash - start));
      start = dash + 1;
    }
    parts.push_back(stim.substr(start));
    if (parts.size() < 4) throw Error(Errc::parse, "nr3d: malformed stimulus_id '" + stim + "' on row " + std::to_string(r));

    QueryRecord q;
    q.scene_id = c_scan >= 0 && !at(c_scan).empty() ? at(c_scan) : parts[0];
    q.gt_label = normalize_label(c_type >= 0 && !at(c_type).empty() ? at(c_type) : parts[1]);
    q.gt_object_id = std::stoll(c_target >= 0 && !at(c_target).empty() ? at(c_target) : parts[3]);
    q.query = at(c_utt);
    q.query_id = c_assign >= 0 && !at(c_assign).empty() ? at(c_assign) : "nr3d_" + std::to_string(r - 1);
    const long n_instances = std::stol(parts[2]);
    q.split_tags.insert(n_instances <= 2 ? "easy" : "hard");

    const bool view_dep = is_view_dependent(q.query);
    q.split_tags.insert(view_dep ? "view_dep" : "view_indep");
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace seeground
