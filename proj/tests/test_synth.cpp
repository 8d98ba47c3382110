#include <doctest.h>

#include <algorithm>

#include "test_util.hpp"
#include "tubekit/error.hpp"
#include "tubekit/synth.hpp"

using namespace tubekit;

namespace {

ScenarioConfig small(std::uint64_t seed = 7) {
  ScenarioConfig c;
  c.seed = seed;
  c.video_count = 4;
  c.frames_per_video = 30;
  return c;
}

bool same_bundle(const ScenarioBundle& a, const ScenarioBundle& b) {
  return a.videos == b.videos && a.ground_truth == b.ground_truth && a.drift_tubes == b.drift_tubes &&
         a.gmm == b.gmm && a.cell_accuracy == b.cell_accuracy;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const auto a = generate(small());
  CHECK(same_bundle(a, generate(small())));
  CHECK(same_bundle(a, generate(small(), 3)));
  CHECK_FALSE(same_bundle(a, generate(small(8))));
}

TEST_CASE("noiseless detections reproduce the ground truth") {
  const auto b = generate(small());
  REQUIRE(b.config.noiseless());
  REQUIRE(b.ground_truth.size() == 4);
  for (const auto& g : b.ground_truth) {
    const auto& video = b.videos[std::stoul(g.video_id.substr(1))];
    for (const auto& e : g.entries) {
      const auto& dets = video.static_detections[static_cast<std::size_t>(e.frame_index)];
      const bool found = std::any_of(dets.begin(), dets.end(), [&](const Detection& d) {
        return d.box == e.box && d.class_scores[static_cast<std::size_t>(g.label)] == 1.0;
      });
      CHECK(found);
    }
  }
}

TEST_CASE("miss rate 1 removes every detection") {
  auto c = small();
  c.miss_rate = 1.0;
  const auto b = generate(c);
  for (const auto& v : b.videos) {
    for (const auto* source : {&v.static_detections, &v.flow_detections, &v.early_detections}) {
      for (const auto& frame : *source) CHECK(frame.empty());
    }
  }
}

TEST_CASE("box jitter lowers the overlap with the truth by a bounded amount") {
  auto c = small(11);
  c.box_jitter = 2.0;
  c.actor_width = c.actor_height = 100.0;
  c.video_count = 10;
  const auto b = generate(c);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : b.videos) {
    for (const auto& actor : v.actors) {
      for (int f = actor.action.start; f < actor.action.end; ++f) {
        double best = 0.0;
        for (const auto& d : v.static_detections[static_cast<std::size_t>(f)]) {
          best = std::max(best, iou(d.box, actor.boxes[static_cast<std::size_t>(f)]));
        }
        total += best;
        ++n;
      }
    }
  }
  const double mean = total / static_cast<double>(n);
  CHECK(mean >= 0.85);
  CHECK(mean <= 0.99);
}

TEST_CASE("drift injection") {
  auto c = small();
  c.video_count = 10;
  auto b = generate(c);
  REQUIRE(b.ground_truth.size() == 10);
  auto unchanged = b;
  inject_drift(unchanged, 0.0);
  CHECK(unchanged.drift_tubes.empty());
  inject_drift(b, 0.5);
  REQUIRE(b.drift_tubes.size() == 5);
  for (const auto& d : b.drift_tubes) {
    for (const auto& g : b.ground_truth) CHECK(st_iou(d, g) == 0.0);
    for (const auto& g : b.ground_truth) {
      if (g.video_id != d.video_id) continue;
      for (const auto& e : g.entries) CHECK(iou(d.entries[0].box, e.box) == 0.0);
    }
  }
  CHECK_THROWS_AS(inject_drift(b, 1.5), ConfigError);
}

TEST_CASE("world matches follow the actor") {
  auto c = small();
  c.speed = 10.0;
  const auto b = generate(c);
  const auto world = SyntheticWorld::from_bundle(b);
  const auto& actor = world.actors(0)[0];
  const auto& from = actor.boxes[5];
  const auto& to = actor.boxes[6];
  const auto m = world.match("v0000", 5, 6, from);
  REQUIRE_FALSE(m.pairs.empty());
  for (const auto& pair : m.pairs) {
    CHECK(pair.to.x - pair.from.x == doctest::Approx(to.x_min - from.x_min));
    CHECK(pair.to.y - pair.from.y == doctest::Approx(to.y_min - from.y_min));
  }
  const auto flow = world.flow(0, 6);
  CHECK(flow.stride == c.flow_stride);
  CHECK_THROWS(world.video_index("nope"));
}

TEST_CASE("scenario validation") {
  auto c = small();
  c.miss_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small();
  c.grid_size = 15;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(motion_from_string("random_walk") == MotionModel::kRandomWalk);
  CHECK(synthetic_video_id(12) == "v0012");
}
