#include <doctest.h>

#include <functional>

#include "oracles.hpp"
#include "seeground/config.hpp"
#include "seeground/error.hpp"
#include "seeground/util.hpp"

namespace sg = seeground;

namespace {

sg::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const sg::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return sg::Errc::contract;
}

}  // namespace

TEST_CASE("canonical text round-trips") {
  const sg::PipelineConfig defaults;
  CHECK(sg::config_to_text(sg::parse_config(sg::config_to_text(defaults))) == sg::config_to_text(defaults));
  CHECK(sg::parse_config("").concurrency == defaults.concurrency);

  sg::PipelineConfig cfg;
  cfg.render.width = 640;
  cfg.render.background = {1, 2, 3};
  cfg.view.fov_deg = 75.5;
  cfg.fusion.tol = 0.2;
  cfg.fusion.marker_policy = sg::MarkerPolicy::all_visible;
  cfg.agent.backend = sg::BackendKind::oracle;
  cfg.agent.remote.model = "model \"x\" \\ y";
  cfg.agent.prompts = "/tmp/prompts file.txt";
  cfg.strategy = sg::ViewpointStrategy::Edge2Center;
  cfg.text_scope = sg::TextScope::candidates_only;
  cfg.ablation.disable_pos = true;
  cfg.dump_dir = "/tmp/dump";
  cfg.concurrency = 7;
  const auto text = sg::config_to_text(cfg);
  const auto back = sg::parse_config(text);
  CHECK(sg::config_to_text(back) == text);
  CHECK(back.render.width == 640);
  CHECK(back.view.fov_deg == 75.5);
  CHECK(back.agent.remote.model == cfg.agent.remote.model);
  CHECK(back.agent.prompts == cfg.agent.prompts);
  CHECK(back.strategy == sg::ViewpointStrategy::Edge2Center);
  CHECK(sg::config_hash(back) == sg::config_hash(cfg));
}

TEST_CASE("sections, comments and overrides") {
  const auto cfg = sg::parse_config(
      "# a comment\n"
      "version = 1\n"
      "strategy = bev\n"
      "[render]\n"
      "width = 320\n"
      "  height = 240  \n"
      "[fusion]\n"
      "tol = 0.05\n");
  CHECK(cfg.strategy == sg::ViewpointStrategy::BirdsEyeView);
  CHECK(cfg.render.width == 320);
  CHECK(cfg.render.height == 240);
  CHECK(cfg.fusion.tol == 0.05);

  sg::PipelineConfig c;
  sg::set_config_value(c, "fusion.min_visible", "9");
  sg::set_config_value(c, "ablation.disable_fam", "true");
  CHECK(c.fusion.style.min_visible == 9);
  CHECK(c.ablation.disable_fam);
  CHECK(code_of([&] { sg::set_config_value(c, "fusion.colour", "1"); }) == sg::Errc::invalid_argument);
}

TEST_CASE("config errors") {
  CHECK(code_of([] { sg::parse_config("[render]\nwidht = 3\n"); }) == sg::Errc::parse);
  CHECK(code_of([] { sg::parse_config("version = 2\n"); }) == sg::Errc::parse);
  CHECK(code_of([] { sg::parse_config("[render\n"); }) == sg::Errc::parse);
  CHECK(code_of([] { sg::parse_config("strategy\n"); }) == sg::Errc::parse);
  CHECK(code_of([] { sg::parse_config("[render]\nwidth = wide\n"); }) == sg::Errc::parse);
  CHECK(code_of([] { sg::parse_config("[view]\nfov_deg = 180\n"); }) == sg::Errc::invalid_argument);
  CHECK(code_of([] { sg::parse_config("[ablation]\ndisable_fam = yes\n"); }) == sg::Errc::parse);
  try {
    sg::parse_config("\n\n[render]\nbogus = 1\n");
  } catch (const sg::Error& e) {
    CHECK(std::string(e.what()).find("config line 4") == 0);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK(code_of([] { sg::load_config("/nonexistent/seeground.cfg"); }) == sg::Errc::io);
}

TEST_CASE("the hash ignores runtime-only fields") {
  sg::PipelineConfig a, b;
  b.concurrency = 1;
  b.dump_dir = "/tmp/elsewhere";
  b.agent.remote.max_in_flight = 64;
  b.agent.remote.timeout = std::chrono::milliseconds(5);
  b.agent.remote.backoff = std::chrono::milliseconds(0);
  CHECK(sg::config_hash(a) == sg::config_hash(b));
  CHECK(sg::config_hash(a).size() == 64);
  b.fusion.tol = 0.11;
  CHECK(sg::config_hash(a) != sg::config_hash(b));
  sg::PipelineConfig c;
  c.ablation.disable_texture = true;
  CHECK(sg::config_hash(a) != sg::config_hash(c));
}

TEST_CASE("config files on disk") {
  const auto dir = sgtest::scratch_dir("config");
  sg::PipelineConfig cfg;
  cfg.render.splat_radius = 3;
  sg::write_file(dir / "c.cfg", sg::config_to_text(cfg));
  CHECK(sg::load_config(dir / "c.cfg").render.splat_radius == 3);
}
