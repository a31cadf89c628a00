#include "seeground/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>
#include <thread>

#include "json.hpp"

#include "seeground/camgeom.hpp"
#include "seeground/error.hpp"
#include "seeground/image.hpp"
#include "seeground/util.hpp"

namespace seeground {

using nlohmann::json;

// Hybrid view ---------------------------------------------------------------

HybridView build_hybrid(const SceneBundle& scene, const ParsedQuery& parsed, const PipelineConfig& cfg) {
  HybridView hv;
  auto [anchor, candidates] = resolve_candidates(parsed, scene.olt);
  hv.anchor = std::move(anchor);
  hv.candidates = std::move(candidates);

  const Aabb scene_box = Aabb::around(scene.cloud.points());
  hv.strategy = cfg.ablation.disable_pam ? ViewpointStrategy::BirdsEyeView : cfg.strategy;
  hv.viewpoint = hv.strategy == ViewpointStrategy::QueryAligned ? select_viewpoint(scene_box, hv.anchor, cfg.view)
                                                                : static_viewpoint(hv.strategy, scene_box, cfg.view);
  const CameraPose pose = look_at_with_fallback(hv.viewpoint.eye, hv.viewpoint.target);
  const Intrinsics intr = intrinsics_from_fov(cfg.view.fov_deg, cfg.render.width, cfg.render.height);

  VisibilityParams vis_params;
  vis_params.tol = cfg.fusion.tol;
  const double top = scene.cloud.max_z();
  hv.render = render(crop_ceiling(scene.cloud, cfg.render.ceiling_margin, top), pose, intr, cfg.render);
  vis_params.z_limit = top - cfg.render.ceiling_margin;

  std::vector<const ObjectRecord*> marked;
  if (cfg.fusion.marker_policy == MarkerPolicy::all_visible) {
    for (const auto& r : scene.olt.records()) marked.push_back(&r);
  } else {
    for (const auto& c : hv.candidates.records) marked.push_back(scene.olt.find(c.id));
    if (hv.anchor.object) marked.push_back(scene.olt.find(hv.anchor.object->id));
  }
  std::sort(marked.begin(), marked.end(), [](auto* a, auto* b) { return a->id < b->id; });
  marked.erase(std::unique(marked.begin(), marked.end()), marked.end());

  std::vector<MarkerSpec> markers;
  for (const ObjectRecord* r : marked) {
    VisibilityResult vis;
    try {
      vis = compute_visibility(hv.render, *r, scene.cloud, vis_params);
    } catch (const Error& e) {
      // A box holding no points (e.g. entirely above the crop) simply gets no marker.
      if (e.code() != Errc::invalid_argument) throw;
      vis.object_id = r->id;
      vis.image_width = hv.render.width();
      vis.image_height = hv.render.height();
    }
    if (auto m = place_marker(vis, cfg.fusion.style)) markers.push_back(*m);
    hv.visibility.push_back(std::move(vis));
  }
  if (cfg.ablation.disable_fam)
    hv.prompted = PromptedImage{hv.render.color, {}};
  else
    hv.prompted = composite_prompts(hv.render.color, std::move(markers));

  DescribeOptions text_opts;
  text_opts.include_geometry = !cfg.ablation.disable_pos;
  if (cfg.text_scope == TextScope::all_objects) {
    hv.spatial_text = describe_scene(scene.olt, text_opts);
  } else {
    std::vector<ObjectRecord> subset = hv.candidates.records;
    if (hv.anchor.object && !std::any_of(subset.begin(), subset.end(),
                                         [&](const ObjectRecord& r) { return r.id == hv.anchor.object->id; }))
      subset.push_back(*hv.anchor.object);
    hv.spatial_text = describe_scene(ObjectLookupTable(scene.scene_id, std::move(subset)), text_opts);
  }
  return hv;
}

// Single query --------------------------------------------------------------

namespace {

std::vector<std::string> scene_classes(const ObjectLookupTable& olt) {
  std::set<std::string> s;
  for (const auto& r : olt.records()) s.insert(r.label);
  return {s.begin(), s.end()};
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::string dump_name(const std::string& query_id) {
  std::string out = query_id;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return out;
}

void dump_artifacts(const std::filesystem::path& root, const std::string& query_id, const HybridView* hv,
                    const std::vector<Exchange>& transcript) {
  const auto dir = root / dump_name(query_id);
  std::filesystem::create_directories(dir);
  std::string lines;
  for (const auto& e : transcript) lines += exchange_to_jsonl(e) + "\n";
  write_file(dir / "transcript.jsonl", lines);
  if (!hv) return;
  save_png(hv->render.color, dir / "render.png");
  save_png(hv->prompted.color, dir / "prompted.png");
  write_file(dir / "spatial.txt", hv->spatial_text.text + "\n");
  json view{{"strategy", strategy_name(hv->strategy)},
            {"eye", vec_json(hv->viewpoint.eye)},
            {"target", vec_json(hv->viewpoint.target)},
            {"anchor", hv->anchor.kind == AnchorSpec::Kind::object ? json(hv->anchor.object->id) : json("pseudo")},
            {"anchor_point", vec_json(hv->anchor.point)}};
  json vis = json::array();
  for (const auto& v : hv->visibility) {
    json item{{"object_id", v.object_id}, {"visible_count", v.visible_count}, {"total_projected", v.total_projected}};
    for (const auto& m : hv->prompted.markers)
      if (m.object_id == v.object_id) item["marker"] = {m.center.u, m.center.v};
    vis.push_back(item);
  }
  view["visibility"] = vis;
  write_file(dir / "view.json", view.dump(2) + "\n");
}

}  // namespace

GroundingResult run_query(const SceneBundle& scene, const std::string& query_id, const std::string& query,
                          AgentBackend& backend, const PipelineConfig& cfg, const QueryOptions& opts) {
  GroundingResult result;
  result.query_id = query_id;
  const PromptTemplates& prompts = opts.prompts ? *opts.prompts : PromptTemplates::builtin();
  AgentSession session(backend, query_id);
  std::optional<HybridView> hv;
  std::string stage = "scene";

  try {
    if (scene.olt.empty()) throw Error(Errc::contract, "scene '" + scene.scene_id + "' has no objects");
    stage = "parse";
    const ParsedQuery parsed = parse_query(session, query, prompts.fewshot, scene_classes(scene.olt), prompts);

    stage = "hybrid";
    hv = build_hybrid(scene, parsed, cfg);

    stage = "ground";
    GroundInputs inputs;
    inputs.query = query;
    if (!cfg.ablation.disable_texture) {
      inputs.image_png = encode_png(hv->prompted.color);
      inputs.markers = hv->prompted.markers;
    }
    inputs.spatial_text = hv->spatial_text;
    try {
      const auto answer =
          ground(session, inputs, [&](std::int64_t id) { return scene.olt.find(id) != nullptr; }, prompts);
      result.predicted_object_id = answer.object_id;
      result.predicted_box = olt_lookup(scene.olt, answer.object_id).box;
    } catch (const Error& e) {
      if (e.code() == Errc::rejected_answer) stage = "ground/validate";
      throw;
    }
  } catch (const std::exception& e) {
    result.predicted_object_id.reset();
    result.predicted_box.reset();
    result.failed_stage = stage;
    result.error = e.what();
  }

  if (cfg.dump_dir) {
    try {
      dump_artifacts(*cfg.dump_dir, query_id, hv ? &*hv : nullptr, session.transcript());
      result.transcript_ref = (*cfg.dump_dir / dump_name(query_id) / "transcript.jsonl").string();
    } catch (const std::exception& e) {
      if (!result.failed_stage) {
        result.failed_stage = "dump";
        result.error = e.what();
        result.predicted_object_id.reset();
        result.predicted_box.reset();
      }
    }
  }
  if (opts.transcript) *opts.transcript = session.transcript();
  return result;
}

// Scene cache ---------------------------------------------------------------

std::shared_future<std::shared_ptr<const SceneCache::Entry>> SceneCache::entry(const std::string& scene_id) {
  std::promise<std::shared_ptr<const Entry>> promise;
  {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(scene_id); it != entries_.end()) return it->second;
    entries_.emplace(scene_id, promise.get_future().share());
  }
  // Load outside the lock; concurrent callers for this scene wait on the future.
  try {
    ++loads_;
    auto e = std::make_shared<Entry>();
    e->bundle = std::make_shared<const SceneBundle>(load_scene(dir_, scene_id));
    e->digest = sha256_hex(read_file(dir_ / (scene_id + ".ply")) + "\n" + read_file(dir_ / (scene_id + ".json")));
    promise.set_value(std::move(e));
  } catch (...) {
    promise.set_exception(std::current_exception());
  }
  std::lock_guard lock(mu_);
  return entries_.at(scene_id);
}

std::shared_ptr<const SceneBundle> SceneCache::get(const std::string& scene_id) { return entry(scene_id).get()->bundle; }

std::string SceneCache::digest(const std::string& scene_id) { return entry(scene_id).get()->digest; }

// Benchmark -----------------------------------------------------------------

std::map<std::string, OracleTruth> oracle_truth(const std::vector<QueryRecord>& queries, SceneCache& scenes) {
  std::map<std::string, OracleTruth> truth;
  for (const auto& q : queries) {
    if (q.gt_object_id) {
      truth[q.query_id] = {*q.gt_object_id, q.gt_label};
      continue;
    }
    std::shared_ptr<const SceneBundle> scene;
    try {
      scene = scenes.get(q.scene_id);
    } catch (const Error&) {
      continue;  // the query fails later with the load error
    }
    const ObjectRecord* best = nullptr;
    double best_iou = 0.0;
    for (const auto& r : scene->olt.records()) {
      const double iou = iou_aabb(r.box, *q.gt_box);
      if (iou > best_iou) {
        best_iou = iou;
        best = &r;
      }
    }
    if (best) truth[q.query_id] = {best->id, best->label};
  }
  return truth;
}

std::unique_ptr<AgentBackend> make_backend(const AgentConfig& cfg, std::map<std::string, OracleTruth> truth) {
  switch (cfg.backend) {
    case BackendKind::oracle: return oracle_backend(std::move(truth));
    case BackendKind::heuristic: return std::make_unique<HeuristicBackend>();
    case BackendKind::recorded:
      if (!cfg.recording) throw Error(Errc::invalid_argument, "the recorded backend needs agent.recording");
      return std::make_unique<RecordedBackend>(load_transcript(*cfg.recording));
    case BackendKind::remote: {
      RemoteConfig rc = cfg.remote;
      rc.apply_environment();
      return std::make_unique<RemoteBackend>(std::move(rc));
    }
  }
  throw Error(Errc::invalid_argument, "unknown backend kind");
}

PromptTemplates load_prompts(const PipelineConfig& cfg) {
  return cfg.agent.prompts ? PromptTemplates::load(*cfg.agent.prompts) : PromptTemplates::builtin();
}

BenchmarkRun run_benchmark(const std::vector<QueryRecord>& queries, const std::filesystem::path& scene_dir,
                           AgentBackend& backend, const PipelineConfig& cfg, const BenchmarkOptions& opts) {
  cfg.validate();
  const std::size_t n = queries.size();
  std::vector<std::size_t> order = opts.order;
  if (order.empty()) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  }
  {
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted.size() != n || sorted[i] != i)
        throw Error(Errc::invalid_argument, "execution order is not a permutation of the benchmark");
  }

  const PromptTemplates prompts = load_prompts(cfg);
  SceneCache scenes(scene_dir);
  BenchmarkRun run;
  run.results.resize(n);
  run.transcripts.resize(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      const std::size_t i = order[k];
      const auto& q = queries[i];
      QueryOptions qo;
      qo.prompts = &prompts;
      qo.transcript = &run.transcripts[i];
      try {
        const auto scene = scenes.get(q.scene_id);
        run.results[i] = run_query(*scene, q.query_id, q.query, backend, cfg, qo);
      } catch (const std::exception& e) {
        run.results[i] = GroundingResult{};
        run.results[i].query_id = q.query_id;
        run.results[i].failed_stage = "scene";
        run.results[i].error = e.what();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<std::string, ObjectLookupTable> olts;
  std::set<std::string> scene_ids;
  for (const auto& q : queries) scene_ids.insert(q.scene_id);
  std::string inputs;
  for (const auto& q : queries) inputs += query_to_jsonl(q) + "\n";
  for (const auto& id : scene_ids) {
    try {
      olts.emplace(id, scenes.get(id)->olt);
      inputs += id + " " + scenes.digest(id) + "\n";
    } catch (const std::exception&) {
      inputs += id + " missing\n";
    }
  }
  run.report = opts.mode == EvalMode::scanrefer ? evaluate_scanrefer(run.results, queries, olts)
                                                 : evaluate_nr3d(run.results, queries, olts);

  json per_query = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = run.results[i];
    json item{{"query_id", r.query_id}, {"status", r.ok() ? "ok" : "failed"}};
    item["predicted_id"] = r.predicted_object_id ? json(*r.predicted_object_id) : json(nullptr);
    if (r.ok() && queries[i].gt_box && r.predicted_box)
      item["iou"] = format_fixed(iou_aabb(*r.predicted_box, *queries[i].gt_box), 6);
    if (r.failed_stage) {
      item["stage"] = *r.failed_stage;
      item["error"] = r.error;
    }
    per_query.push_back(item);
  }

  std::string transcripts;
  for (std::size_t i = 0; i < n; ++i)
    for (Exchange e : run.transcripts[i]) {
      e.latency_ms = 0.0;
      transcripts += exchange_to_jsonl(e) + "\n";
    }

  json manifest{{"config_hash", config_hash(cfg)},
                {"backend", backend.name()},
                {"mode", opts.mode == EvalMode::scanrefer ? "scanrefer" : "nr3d"},
                {"strategy", strategy_name(cfg.ablation.disable_pam ? ViewpointStrategy::BirdsEyeView : cfg.strategy)},
                {"inputs_hash", sha256_hex(inputs)},
                {"transcripts_hash", sha256_hex(transcripts)},
                {"queries", per_query}};
  run.manifest_hash = sha256_hex(manifest.dump());
  manifest["manifest_hash"] = run.manifest_hash;
  run.manifest_json = manifest.dump(2) + "\n";

  if (opts.manifest_path) write_file(*opts.manifest_path, run.manifest_json);
  if (opts.report_path) write_report(run.report, *opts.report_path);
  if (opts.transcript_path) {
    TranscriptWriter writer(*opts.transcript_path);
    for (const auto& t : run.transcripts)
      for (const auto& e : t) writer.append(e);
  }
  return run;
}

}  // namespace seeground
