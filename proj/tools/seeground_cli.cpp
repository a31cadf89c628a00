// seeground command-line front end.
//
// Exit codes: 0 success, 1 a failed query (ground) or a runtime error, 2 usage error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "seeground/config.hpp"
#include "seeground/error.hpp"
#include "seeground/evalkit.hpp"
#include "seeground/pipeline.hpp"
#include "seeground/synth.hpp"
#include "seeground/util.hpp"

namespace sg = seeground;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flag values detected after CLI11 has parsed them.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string strategy;
  std::string backend;
  std::string recording;
  std::string prompts;
  std::string endpoint;
  std::string model;
  std::string dump_dir;
  int concurrency = 0;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "Pipeline config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override a config field, section.key=value (repeatable)");
    app->add_option("--strategy", strategy, "query_aligned, bev, center2corner, edge2center, corner2center");
    app->add_option("--backend", backend, "oracle, heuristic, recorded, remote");
    app->add_option("--recording", recording, "Transcript replayed by the recorded backend");
    app->add_option("--prompts", prompts, "Prompt template file");
    app->add_option("--endpoint", endpoint, "Chat-completions base URL (remote backend)");
    app->add_option("--model", model, "Model name (remote backend)");
    app->add_option("--dump-dir", dump_dir, "Write per-query debug artifacts here");
    app->add_option("--concurrency", concurrency, "Queries in flight")->check(CLI::PositiveNumber);
  }

  sg::PipelineConfig resolve() const {
    sg::PipelineConfig cfg = config_path.empty() ? sg::PipelineConfig{} : sg::load_config(config_path);
    auto set = [&](const std::string& flag, const char* key, const std::string& value) {
      if (value.empty()) return;
      try {
        sg::set_config_value(cfg, key, value);
      } catch (const sg::Error& e) {
        throw UsageError(flag + ": " + e.what());
      }
    };
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set " + s + ": expected section.key=value");
      set("--set " + s, s.substr(0, eq).c_str(), s.substr(eq + 1));
    }
    set("--strategy", "strategy", strategy);
    set("--backend", "agent.backend", backend);
    set("--recording", "agent.recording", recording);
    set("--prompts", "agent.prompts", prompts);
    set("--endpoint", "agent.endpoint", endpoint);
    set("--model", "agent.model", model);
    set("--dump-dir", "dump_dir", dump_dir);
    if (concurrency > 0) cfg.concurrency = concurrency;
    try {
      cfg.validate();
    } catch (const sg::Error& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

std::string vec_text(const sg::Vec3& v) {
  return "(" + sg::format_fixed(v.x(), 3) + ", " + sg::format_fixed(v.y(), 3) + ", " + sg::format_fixed(v.z(), 3) + ")";
}

sg::Vec3 parse_vec(const std::string& flag, const std::string& s) {
  double x, y, z;
  char tail;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &x, &y, &z, &tail) != 3) throw UsageError(flag + ": expected x,y,z");
  return {x, y, z};
}

// ground ----------------------------------------------------------------------

struct GroundArgs {
  ConfigFlags flags;
  std::string scene_dir, scene_id, query, query_id = "cli";
  std::int64_t gt = -1;
};

int run_ground(const GroundArgs& a) {
  const auto cfg = a.flags.resolve();
  const auto scene = sg::load_scene(a.scene_dir, a.scene_id);
  std::map<std::string, sg::OracleTruth> truth;
  if (cfg.agent.backend == sg::BackendKind::oracle) {
    if (a.gt < 0) throw UsageError("--gt: the oracle backend needs the ground-truth object id");
    const auto* r = scene.olt.find(a.gt);
    if (!r) throw UsageError("--gt " + std::to_string(a.gt) + ": no such object in scene '" + a.scene_id + "'");
    truth[a.query_id] = {r->id, r->label};
  }
  auto backend = sg::make_backend(cfg.agent, std::move(truth));
  const auto prompts = sg::load_prompts(cfg);
  sg::QueryOptions opts;
  opts.prompts = &prompts;
  const auto result = sg::run_query(scene, a.query_id, a.query, *backend, cfg, opts);
  if (!result.ok()) {
    std::cout << "failed at stage " << *result.failed_stage << ": " << result.error << "\n";
    return kExitFailed;
  }
  const auto& rec = sg::olt_lookup(scene.olt, *result.predicted_object_id);
  std::cout << "object " << rec.id << "\n"
            << "label " << rec.label << "\n"
            << "box min=" << vec_text(rec.box.min) << " max=" << vec_text(rec.box.max) << "\n";
  return 0;
}

// bench -----------------------------------------------------------------------

struct BenchArgs {
  ConfigFlags flags;
  std::string benchmark, scene_dir, out_dir, mode = "scanrefer";
};

int run_bench(const BenchArgs& a) {
  const auto cfg = a.flags.resolve();
  if (a.mode != "scanrefer" && a.mode != "nr3d") throw UsageError("--mode " + a.mode + ": expected scanrefer or nr3d");
  const auto queries = sg::load_benchmark(a.benchmark);
  sg::SceneCache scenes(a.scene_dir);
  auto backend = sg::make_backend(cfg.agent, cfg.agent.backend == sg::BackendKind::oracle
                                                 ? sg::oracle_truth(queries, scenes)
                                                 : std::map<std::string, sg::OracleTruth>{});
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path out(a.out_dir);
  sg::BenchmarkOptions opts;
  opts.mode = a.mode == "scanrefer" ? sg::EvalMode::scanrefer : sg::EvalMode::nr3d;
  opts.manifest_path = out / "manifest.json";
  opts.report_path = out / "report.json";
  opts.transcript_path = out / "transcript.jsonl";
  const auto run = sg::run_benchmark(queries, a.scene_dir, *backend, cfg, opts);
  std::cout << sg::report_to_table(run.report);
  for (const auto& w : run.report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "manifest " << run.manifest_hash << "\n";
  return 0;
}

// render ----------------------------------------------------------------------

struct RenderArgs {
  ConfigFlags flags;
  std::string scene_dir, scene_id, out, depth_out, eye, target;
};

int run_render(const RenderArgs& a) {
  auto cfg = a.flags.resolve();
  const auto scene = sg::load_scene(a.scene_dir, a.scene_id);
  const sg::Aabb box = sg::Aabb::around(scene.cloud.points());
  sg::Viewpoint vp;
  if (!a.eye.empty() || !a.target.empty()) {
    if (a.eye.empty() || a.target.empty()) throw UsageError("--eye/--target: give both or neither");
    vp = {parse_vec("--eye", a.eye), parse_vec("--target", a.target)};
  } else {
    if (cfg.strategy == sg::ViewpointStrategy::QueryAligned) throw UsageError("--strategy: render needs a static strategy or --eye/--target");
    vp = sg::static_viewpoint(cfg.strategy, box, cfg.view);
  }
  const auto pose = sg::look_at_with_fallback(vp.eye, vp.target);
  const auto intr = sg::intrinsics_from_fov(cfg.view.fov_deg, cfg.render.width, cfg.render.height);
  const auto cloud = sg::crop_ceiling(scene.cloud, cfg.render.ceiling_margin);
  const auto out = sg::render(cloud, pose, intr, cfg.render);
  sg::save_image(out, a.out);
  if (!a.depth_out.empty()) sg::save_depth(out, a.depth_out);
  std::cout << "eye " << vec_text(vp.eye) << " target " << vec_text(vp.target) << "\n";
  return 0;
}

// olt / convert / synth ----------------------------------------------------------

struct OltArgs {
  std::string scene, detections, out, scene_id;
};

int run_olt(const OltArgs& a) {
  const auto cloud = sg::load_point_cloud(a.scene);
  auto olt = sg::ingest_detections(a.detections, cloud);
  if (!a.scene_id.empty() && a.scene_id != olt.scene_id()) olt = sg::ObjectLookupTable(a.scene_id, olt.records());
  sg::save_olt(olt, a.out);
  std::cout << "wrote " << olt.size() << " objects to " << a.out << "\n";
  return 0;
}

struct ConvertArgs {
  std::string format, input, out, gt_olt_dir;
};

int run_convert(const ConvertArgs& a) {
  std::vector<sg::QueryRecord> queries;
  const auto text = sg::read_file(a.input);
  if (a.format == "scanrefer") {
    queries = sg::convert_scanrefer(text, a.gt_olt_dir.empty() ? std::nullopt
                                                              : std::optional<std::filesystem::path>(a.gt_olt_dir));
  } else if (a.format == "nr3d") {
    queries = sg::convert_nr3d(text);
  } else {
    throw UsageError("--format " + a.format + ": expected scanrefer or nr3d");
  }
  sg::save_benchmark(queries, a.out);
  std::cout << "wrote " << queries.size() << " queries to " << a.out << "\n";
  return 0;
}

struct SynthArgs {
  std::string out, suite = "grounding";
};

int run_synth(const SynthArgs& a) {
  sg::SynthSuite suite;
  if (a.suite == "grounding")
    suite = sg::make_grounding_suite();
  else if (a.suite == "view_dependent")
    suite = sg::make_view_dependent_suite();
  else
    throw UsageError("--suite " + a.suite + ": expected grounding or view_dependent");
  sg::write_suite(suite, a.out);
  std::cout << "wrote " << suite.scenes.size() << " scenes and " << suite.queries.size() << " queries to " << a.out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free 3D visual grounding engine"};
  app.require_subcommand(1);

  GroundArgs ground;
  auto* g = app.add_subcommand("ground", "Ground one query in one scene");
  g->add_option("--scene-dir", ground.scene_dir, "Directory holding {scene_id}.ply and {scene_id}.json")->required();
  g->add_option("--scene-id", ground.scene_id)->required();
  g->add_option("--query", ground.query)->required();
  g->add_option("--query-id", ground.query_id, "Id used in transcripts and dumps");
  g->add_option("--gt", ground.gt, "Ground-truth object id (oracle backend)");
  ground.flags.add_to(g);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run a benchmark file and write report, manifest and transcript");
  b->add_option("--benchmark", bench.benchmark, "Normalized benchmark (JSON lines)")->required()->check(CLI::ExistingFile);
  b->add_option("--scene-dir", bench.scene_dir)->required()->check(CLI::ExistingDirectory);
  b->add_option("--out", bench.out_dir, "Output directory")->required();
  b->add_option("--mode", bench.mode, "scanrefer or nr3d");
  bench.flags.add_to(b);

  RenderArgs rnd;
  auto* r = app.add_subcommand("render", "Render a scene from a static or explicit viewpoint");
  r->add_option("--scene-dir", rnd.scene_dir)->required();
  r->add_option("--scene-id", rnd.scene_id)->required();
  r->add_option("--out", rnd.out, "PNG output")->required();
  r->add_option("--depth-out", rnd.depth_out, "Raw float32 depth output");
  r->add_option("--eye", rnd.eye, "x,y,z");
  r->add_option("--target", rnd.target, "x,y,z");
  rnd.flags.add_to(r);

  OltArgs olt;
  auto* o = app.add_subcommand("olt", "Build and persist an object lookup table from detections");
  o->add_option("--scene", olt.scene, "Point cloud (.ply)")->required()->check(CLI::ExistingFile);
  o->add_option("--detections", olt.detections, "Detection JSON")->required()->check(CLI::ExistingFile);
  o->add_option("--out", olt.out)->required();
  o->add_option("--scene-id", olt.scene_id, "Override the scene id");

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert", "Convert a dataset annotation file to a benchmark file");
  c->add_option("--format", conv.format, "scanrefer or nr3d")->required();
  c->add_option("--input", conv.input)->required()->check(CLI::ExistingFile);
  c->add_option("--out", conv.out)->required();
  c->add_option("--gt-olt-dir", conv.gt_olt_dir, "Ground-truth tables supplying gt boxes (scanrefer)");

  SynthArgs syn;
  auto* s = app.add_subcommand("synth", "Write a synthetic scene suite");
  s->add_option("--out", syn.out)->required();
  s->add_option("--suite", syn.suite, "grounding or view_dependent");

  auto* cfg_cmd = app.add_subcommand("config", "Print the effective configuration");
  ConfigFlags cfg_flags;
  cfg_flags.add_to(cfg_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return run_ground(ground);
    if (*b) return run_bench(bench);
    if (*r) return run_render(rnd);
    if (*o) return run_olt(olt);
    if (*c) return run_convert(conv);
    if (*s) return run_synth(syn);
    if (*cfg_cmd) {
      const auto cfg = cfg_flags.resolve();
      std::cout << sg::config_to_text(cfg) << "# hash " << sg::config_hash(cfg) << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sg::Error& e) {
    std::cerr << "error (" << sg::errc_name(e.code()) << "): " << e.what() << "\n";
    return kExitFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
