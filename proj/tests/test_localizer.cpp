#include <doctest.h>

#include "test_util.hpp"
#include "tubekit/localizer.hpp"
#include "tubekit/rng.hpp"
#include "tubekit/scoring.hpp"

using namespace tubekit;

namespace {

// Two-sided scan written independently of the library: the kept range is
// every index i with some score >= tau at or before i and at or after i.
std::optional<std::pair<std::size_t, std::size_t>> scan(const std::vector<double>& s, double tau) {
  std::vector<bool> from_left(s.size()), from_right(s.size());
  bool seen = false;
  for (std::size_t i = 0; i < s.size(); ++i) from_left[i] = seen = seen || s[i] >= tau;
  seen = false;
  for (std::size_t i = s.size(); i-- > 0;) from_right[i] = seen = seen || s[i] >= tau;
  std::optional<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(from_left[i] && from_right[i])) continue;
    if (!out) out = std::pair{i, i};
    out->second = i;
  }
  return out;
}

struct Labeled {
  Tube tube;
  ClipScoreSequence scores;
  std::vector<FrameInterval> clips;
};

Labeled labeled(int start, const std::vector<double>& label_scores, int clip_length = 4) {
  Labeled l;
  const int frames = static_cast<int>(label_scores.size()) * clip_length;
  l.tube = test::make_tube("v", start, start + frames, {0, 0, 10, 10});
  l.tube.label = 1;
  l.scores.clip_length = clip_length;
  for (double s : label_scores) l.scores.scores.push_back({1.0 - s, s});
  l.tube.clip_scores = l.scores;
  l.clips = slice_clips(l.tube, clip_length);
  return l;
}

}  // namespace

TEST_CASE("surviving clips") {
  const std::vector<double> s{0.1, 0.5, 0.6, 0.2};
  CHECK(surviving_clips(s, 0.3) == std::pair<std::size_t, std::size_t>{1, 2});
  CHECK(surviving_clips(s, 0.3, TrimMode::kBetweenLowClips) == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(surviving_clips(std::vector{0.4, 0.1, 0.5}, 0.3) == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(surviving_clips(std::vector{0.3}, 0.3) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK_FALSE(surviving_clips(std::vector{0.1, 0.2}, 0.3));
  CHECK_FALSE(surviving_clips(std::vector<double>{}, 0.3));
  CHECK(surviving_clips(std::vector{0.5, 0.9}, 0.3, TrimMode::kBetweenLowClips) ==
        std::pair<std::size_t, std::size_t>{0, 1});
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> scores(rng.below(8));
    for (double& v : scores) v = static_cast<double>(rng.below(10)) / 10.0;
    const double tau = static_cast<double>(rng.below(11)) / 10.0;
    CHECK(surviving_clips(scores, tau) == scan(scores, tau));
  }
}

TEST_CASE("localize") {
  SUBCASE("low ends are trimmed to the surviving clips") {
    const auto l = labeled(10, {0.1, 0.5, 0.6, 0.2});
    const auto out = localize(l.tube, l.scores, l.clips, 0.3);
    REQUIRE(out);
    CHECK(out->extent() == FrameInterval{14, 22});
    CHECK(out->clip_scores->scores.size() == 2);
    CHECK(out->label == l.tube.label);
  }
  SUBCASE("all clips at or above tau leave the tube unchanged") {
    const auto l = labeled(0, {0.3, 0.9, 0.4});
    const auto out = localize(l.tube, l.scores, l.clips, 0.3);
    REQUIRE(out);
    CHECK(*out == l.tube);
  }
  SUBCASE("all clips below tau remove the tube") {
    const auto l = labeled(0, {0.1, 0.29});
    CHECK_FALSE(localize(l.tube, l.scores, l.clips, 0.3));
  }
  SUBCASE("misaligned or unlabeled input") {
    auto l = labeled(0, {0.5, 0.5});
    CHECK_THROWS(localize(l.tube, l.scores, std::span(l.clips).first(1), 0.3));
    l.tube.label.reset();
    CHECK_THROWS(localize(l.tube, l.scores, l.clips, 0.3));
  }
}

TEST_CASE("localize is idempotent, monotone in tau and stays inside the input") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> scores(1 + rng.below(8));
    for (double& v : scores) v = rng.uniform();
    const auto l = labeled(static_cast<int>(rng.below(20)), scores, 1 + static_cast<int>(rng.below(6)));
    const double tau = rng.uniform();
    const auto once = localize(l.tube, l.scores, l.clips, tau);
    if (once) {
      CHECK(once->extent().start >= l.tube.extent().start);
      CHECK(once->extent().end <= l.tube.extent().end);
      CHECK(static_cast<int>(once->entries.size()) == once->extent().length());
      const auto clips = slice_clips(*once, l.scores.clip_length);
      const auto twice = localize(*once, *once->clip_scores, clips, tau);
      REQUIRE(twice);
      CHECK(*twice == *once);
    }
    const auto higher = localize(l.tube, l.scores, l.clips, tau + 0.1 * rng.uniform());
    const int len_low = once ? once->extent().length() : 0;
    const int len_high = higher ? higher->extent().length() : 0;
    CHECK(len_high <= len_low);
  }
}
