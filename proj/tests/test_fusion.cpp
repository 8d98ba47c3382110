#include <doctest.h>

#include "test_util.hpp"
#include "tubekit/error.hpp"
#include "tubekit/fusion.hpp"

using namespace tubekit;

namespace {

FlowMagnitudeGrid constant_grid(int w, int h, double v, double stride = 1.0) {
  return {0, w, h, stride, std::vector<double>(static_cast<std::size_t>(w * h), v)};
}

Proposal proposal(const BoundingBox& b) { return {0, b, 0.5, {}}; }

}  // namespace

TEST_CASE("saliency_prune thresholds") {
  const std::vector props{proposal({1, 1, 5, 5}), proposal({10, 10, 14, 14}), proposal({2.2, 2.2, 2.4, 2.4})};
  CHECK(saliency_prune(props, constant_grid(20, 20, 0.0), 0.1).empty());
  CHECK(saliency_prune(props, constant_grid(20, 20, 0.0), 0.0) == props);
  CHECK_THROWS_AS(saliency_prune(props, constant_grid(20, 20, 0.0), -1.0), InputError);
}

TEST_CASE("saliency_prune keeps the moving box") {
  // Per-pixel grid: magnitude 2 over box A, 0 elsewhere (including box B).
  const BoundingBox a{0, 0, 8, 8}, b{12, 12, 20, 20};
  FlowMagnitudeGrid g = constant_grid(20, 20, 0.0);
  double oracle_sum = 0.0;
  int oracle_n = 0;
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      if (x < 8 && y < 8) g.values[static_cast<std::size_t>(y * 20 + x)] = 2.0;
      if (x >= 0 && x < 8 && y >= 0 && y < 8) {
        oracle_sum += g.values[static_cast<std::size_t>(y * 20 + x)];
        ++oracle_n;
      }
    }
  }
  CHECK(mean_magnitude(g, a) == doctest::Approx(oracle_sum / oracle_n));
  CHECK(mean_magnitude(g, b) == 0.0);
  const auto kept = saliency_prune(std::vector{proposal(a), proposal(b)}, g, 1.0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].box == a);
}

TEST_CASE("mean_magnitude on a strided grid uses cell centers") {
  FlowMagnitudeGrid g = constant_grid(4, 4, 0.0, 10.0);  // centers at 5, 15, 25, 35
  g.values[1 * 4 + 1] = 4.0;                             // center (15, 15)
  CHECK(mean_magnitude(g, {10, 10, 20, 20}) == 4.0);
  CHECK(mean_magnitude(g, {0, 0, 20, 20}) == 1.0);
  CHECK(mean_magnitude(g, {14, 14, 16, 16}) == 4.0);  // no center inside: cell under the box center
  CHECK(mean_magnitude(g, {15, 15, 25, 25}) == 0.0);  // centers on the border are outside
}

TEST_CASE("flow grid validation") {
  FlowMagnitudeGrid g = constant_grid(2, 2, 1.0);
  CHECK_NOTHROW(validate(g));
  g.values.pop_back();
  CHECK_THROWS_AS(validate(g), InputError);
  g = constant_grid(2, 2, -1.0);
  CHECK_THROWS_AS(validate(g), InputError);
}

TEST_CASE("late_fuse") {
  const auto a = test::make_detection(0, {0, 0, 10, 10}, {0.9, 0.1});
  const auto b = test::make_detection(0, {40, 40, 50, 50}, {0.2, 0.6}, Source::kFlow);
  const std::vector<Detection> none;

  SUBCASE("one stream empty is nms of the other") {
    const auto dup = test::make_detection(0, {0, 0, 10, 9}, {0.8, 0.1});
    auto fused = late_fuse(std::vector{a, dup}, none, 0.3);
    auto expected = nms(std::vector{a, dup}, 0, 0.3);
    REQUIRE(fused.size() == expected.size());
    CHECK(fused[0].box == expected[0].box);
    CHECK(fused[0].source == Source::kLateFusion);
  }
  SUBCASE("identical detection in both streams survives once") {
    const auto fused = late_fuse(std::vector{a}, std::vector{a}, 0.3);
    CHECK(fused.size() == 1);
  }
  SUBCASE("different classes never suppress each other") {
    const auto c = test::make_detection(0, {1, 1, 10, 10}, {0.1, 0.7}, Source::kFlow);
    CHECK(late_fuse(std::vector{a, b}, std::vector{c}, 0.3).size() == 3);
  }
  CHECK_THROWS_AS(late_fuse(std::vector{a}, std::vector{test::make_detection(1, {0, 0, 1, 1}, {1, 0})}, 0.3),
                  InputError);
}

TEST_CASE("merge_early_late") {
  const auto late = test::make_detection(0, {0, 0, 10, 10}, {0.7}, Source::kLateFusion);
  const auto early = test::make_detection(0, {0, 0, 10, 10}, {0.8}, Source::kEarlyFusion);
  const std::vector<Detection> none;
  const auto only_late = merge_early_late(none, std::vector{late}, 0.3);
  REQUIRE(only_late.size() == 1);
  CHECK(only_late[0].box == late.box);
  CHECK(only_late[0].source == Source::kMerged);
  const auto merged = merge_early_late(std::vector{early}, std::vector{late}, 0.3);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].score(0) == 0.8);
  CHECK(merge_early_late(none, none, 0.3).empty());
}
