#include <doctest.h>

#include <string>

#include "test_util.hpp"
#include "tubekit/config.hpp"
#include "tubekit/error.hpp"

using namespace tubekit;

namespace {

std::string config_error(std::string_view text) {
  try {
    PipelineConfig::parse(text, "test.cfg").validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.fusion_nms_threshold == 0.3);
  CHECK(c.prune_st_threshold == 0.3);
  CHECK(c.localize_tau == 0.3);
  CHECK(c.clip_length == 16);
  CHECK(c.footprint_layout().cell_count() == 49);
}

TEST_CASE("parse") {
  const auto c = PipelineConfig::parse(
      "# comment\n"
      "classes = 4\n"
      "  fusion.nms_threshold=0.45   # trailing comment\n"
      "\n"
      "tracker.method = neighborhood\n"
      "scoring.fusion = multiply\n"
      "footprint.projection = union\n"
      "localize.mode = between_low_clips\n"
      "evaluation.iou_thresholds = 0.1, 0.5\n"
      "synth.motion = sinusoidal\n"
      "synth.seed = 18446744073709551615\n"
      "prune.enabled = false\n"
      "run.threads = 3\n");
  CHECK(c.classes == 4);
  CHECK(c.fusion_nms_threshold == 0.45);
  CHECK(c.tracker_method == TrackerMethod::kNeighborhood);
  CHECK(c.score_fusion == ScoreFusion::kMultiply);
  CHECK(c.footprint_projection == Projection::kUnion);
  CHECK(c.localize_mode == TrimMode::kBetweenLowClips);
  CHECK(c.evaluation.iou_thresholds == std::vector{0.1, 0.5});
  CHECK(c.synth.motion == MotionModel::kSinusoidal);
  CHECK(c.synth.seed == 18446744073709551615ULL);
  CHECK_FALSE(c.prune_enabled);
  CHECK(c.threads == 3);
  const auto s = c.scenario();
  CHECK(s.num_classes == 4);
  CHECK(s.clip_length == c.clip_length);
  CHECK(s.grid_size == c.footprint_grid_size);
}

TEST_CASE("errors name the origin and line") {
  CHECK(config_error("classes = 3\nbogus.key = 1\n").find("test.cfg:2") != std::string::npos);
  CHECK(config_error("bogus.key = 1\n").find("bogus.key") != std::string::npos);
  CHECK(config_error("classes = three\n").find("test.cfg:1") != std::string::npos);
  CHECK(config_error("classes = 3x\n").find("classes") != std::string::npos);
  CHECK(config_error("classes\n").find("test.cfg:1") != std::string::npos);
  CHECK(config_error("fusion.saliency = maybe\n").find("fusion.saliency") != std::string::npos);
  CHECK(config_error("tracker.method = teleport\n").find("tracker.method") != std::string::npos);
  CHECK_FALSE(config_error("fusion.nms_threshold = 1.5\n").empty());
  CHECK_FALSE(config_error("localize.tau = -0.1\n").empty());
  CHECK_FALSE(config_error("footprint.cell_side = 3\n").empty());
  CHECK_FALSE(config_error("evaluation.iou_thresholds = 0\n").empty());
  CHECK_FALSE(config_error("synth.miss_rate = 2\n").empty());
  CHECK_FALSE(config_error("run.threads = 0\n").empty());
}

TEST_CASE("text form round-trips") {
  PipelineConfig c;
  c.classes = 5;
  c.fusion_nms_threshold = 0.1 + 0.2;  // not exactly representable in short decimal
  c.tracker.min_match_ratio = 1.0 / 3.0;
  c.evaluation.score_grid = {0.0, 0.25, 0.5};
  c.synth.speed = 80.0;
  c.synth.motion = MotionModel::kRandomWalk;
  c.localize_enabled = false;
  const auto text = c.to_text();
  const auto back = PipelineConfig::parse(text);
  CHECK(back.to_text() == text);
  CHECK(back.fusion_nms_threshold == c.fusion_nms_threshold);
  CHECK(back.tracker.min_match_ratio == c.tracker.min_match_ratio);
  CHECK(back.evaluation.score_grid == c.evaluation.score_grid);
  for (const auto& key : PipelineConfig::keys()) CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("load and overrides") {
  const auto dir = test::scratch_dir("config");
  {
    std::ofstream out(dir / "a.cfg");
    out << "classes = 2\n";
  }
  CHECK(PipelineConfig::load((dir / "a.cfg").string()).classes == 2);
  CHECK_THROWS_AS(PipelineConfig::load((dir / "missing.cfg").string()), ConfigError);
  CHECK(split_override("prune.st_threshold=0.5") == std::pair<std::string, std::string>{"prune.st_threshold", "0.5"});
  CHECK(split_override(" a = b ") == std::pair<std::string, std::string>{"a", "b"});
  CHECK_THROWS_AS(split_override("novalue"), ConfigError);
  PipelineConfig c;
  CHECK_THROWS_AS(c.set("nope", "1"), ConfigError);
  c.set("prune.st_threshold", "0.5");
  CHECK(c.prune_st_threshold == 0.5);
}
