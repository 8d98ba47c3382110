#include <doctest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tubekit/core.hpp"
#include "tubekit/error.hpp"
#include "tubekit/rng.hpp"

using namespace tubekit;

TEST_CASE("iou of identical, disjoint and half-overlapping boxes") {
  const BoundingBox b{0, 0, 10, 10};
  CHECK(iou(b, b) == 1.0);
  CHECK(iou(b, {20, 20, 30, 30}) == 0.0);
  CHECK(iou(b, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(iou(b, {10, 0, 20, 10}) == 0.0);  // shared edge only
}

TEST_CASE("iou is symmetric and agrees with pixel enumeration") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const BoundingBox a = test::random_int_box(rng, 12);
    const BoundingBox b = test::random_int_box(rng, 12);
    CHECK(iou(a, b) == doctest::Approx(oracle::grid_iou(a, b)).epsilon(1e-12));
    CHECK(iou(a, b) == iou(b, a));
  }
}

TEST_CASE("temporal_iou") {
  CHECK(temporal_iou({0, 10}, {0, 10}) == 1.0);
  CHECK(temporal_iou({0, 5}, {5, 10}) == 0.0);
  CHECK(temporal_iou({0, 10}, {5, 15}) == doctest::Approx(5.0 / 15.0).epsilon(1e-12));
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const int s1 = static_cast<int>(rng.below(20)), s2 = static_cast<int>(rng.below(20));
    const FrameInterval a{s1, s1 + 1 + static_cast<int>(rng.below(15))};
    const FrameInterval b{s2, s2 + 1 + static_cast<int>(rng.below(15))};
    CHECK(temporal_iou(a, b) == doctest::Approx(oracle::frame_set_iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("st_iou") {
  const Tube t = test::make_tube("v", 0, 10, {0, 0, 10, 10});
  CHECK(st_iou(t, t) == doctest::Approx(1.0));
  CHECK(st_iou(t, test::make_tube("v", 10, 20, {0, 0, 10, 10})) == 0.0);
  CHECK(st_iou(t, test::make_tube("w", 0, 10, {0, 0, 10, 10})) == 0.0);

  // Constant spatial overlap 0.6 on the shared frames: 40x10 vs 40x10
  // shifted by 10 gives 30/50.
  const Tube a = test::make_tube("v", 0, 10, {0, 0, 40, 10});
  const Tube b = test::make_tube("v", 5, 15, {10, 0, 50, 10});
  CHECK(st_iou(a, b) == doctest::Approx(0.2).epsilon(1e-12));

  GroundTruthTube g{"v", 0, {}};
  for (int f = 5; f < 15; ++f) g.entries.push_back({f, {10, 0, 50, 10}});
  CHECK(st_iou(a, g) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(st_iou(g, a) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("validation rejects malformed records") {
  CHECK_THROWS_AS(validate(BoundingBox{0, 0, 0, 5}), InputError);
  CHECK_THROWS_AS(validate(BoundingBox{0, 0, std::nan(""), 5}), InputError);
  CHECK_NOTHROW(validate(BoundingBox{0, 0, 1, 1}));

  Tube t = test::make_tube("v", 0, 3, {0, 0, 5, 5}, 2);
  CHECK_NOTHROW(validate(t, 2));
  CHECK_THROWS_AS(validate(t, 3), InputError);  // score vector length
  Tube gap = t;
  gap.entries[2].frame_index = 5;
  CHECK_THROWS_AS(validate(gap, 2), InputError);
  Tube empty = t;
  empty.entries.clear();
  CHECK_THROWS_AS(validate(empty, 2), InputError);
  Tube bad_label = t;
  bad_label.label = 2;
  CHECK_THROWS_AS(validate(bad_label, 2), InputError);
  Tube negative = test::make_tube("v", -1, 1, {0, 0, 5, 5}, 2);
  CHECK_THROWS_AS(validate(negative, 2), InputError);
}

TEST_CASE("source names round-trip") {
  for (Source s : {Source::kStatic, Source::kFlow, Source::kEarlyFusion, Source::kLateFusion, Source::kMerged,
                   Source::kTracked}) {
    CHECK(source_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(source_from_string("camera"), InputError);
}

TEST_CASE("nms examples") {
  const Detection a = test::make_detection(0, {0, 0, 10, 10}, {0.9});
  CHECK(nms(std::vector{a}, 0, 0.5) == std::vector{a});
  const Detection far = test::make_detection(0, {50, 50, 60, 60}, {0.4});
  CHECK(nms(std::vector{a, far}, 0, 0.5).size() == 2);
  const Detection dup = test::make_detection(0, {0, 0, 10, 10}, {0.7});
  const auto kept = nms(std::vector{dup, a}, 0, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score(0) == 0.9);
  CHECK(nms(std::vector<Detection>{}, 0, 0.5).empty());
}

TEST_CASE("nms equals the exhaustive suppression fixed point") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dets = test::random_detections(rng, 1 + static_cast<int>(rng.below(6)));
    const double thr = rng.uniform(0.0, 0.9);
    const auto fixed = oracle::nms_fixed_points(dets, 0, thr);
    REQUIRE(fixed.size() == 1);
    std::vector<Detection> expected;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (fixed[0] >> i & 1u) expected.push_back(dets[i]);
    }
    auto got = nms(dets, 0, thr);
    auto by_box = [](const Detection& x, const Detection& y) { return box_less(x.box, y.box) || (x.box == y.box && x.score(0) > y.score(0)); };
    std::sort(expected.begin(), expected.end(), by_box);
    std::sort(got.begin(), got.end(), by_box);
    CHECK(got == expected);
  }
}
