#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tubekit/core.hpp"
#include "tubekit/rng.hpp"

namespace test {

using tubekit::BoundingBox;
using tubekit::Detection;
using tubekit::Tube;

inline Detection make_detection(int frame, const BoundingBox& box, std::vector<double> scores,
                                tubekit::Source source = tubekit::Source::kStatic) {
  return {frame, box, std::move(scores), source};
}

/// Tube with a constant box on frames [start, end) and one-hot scores for
/// class 0 over `classes` classes.
inline Tube make_tube(const std::string& video, int start, int end, const BoundingBox& box, int classes = 1) {
  Tube t;
  t.video_id = video;
  for (int f = start; f < end; ++f) {
    std::vector<double> s(static_cast<std::size_t>(classes), 0.0);
    s[0] = 1.0;
    t.entries.push_back(make_detection(f, box, s));
  }
  return t;
}

/// Box with integer corners in [0, extent].
inline BoundingBox random_int_box(tubekit::Rng& rng, int extent) {
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(extent)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(extent)));
  const int x1 = x0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(extent - x0)));
  const int y1 = y0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(extent - y0)));
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1), static_cast<double>(y1)};
}

/// Single-class detections on a small integer grid with scores drawn from a
/// few levels so that ties occur.
inline std::vector<Detection> random_detections(tubekit::Rng& rng, int n) {
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) {
    const double score = 0.1 * static_cast<double>(1 + rng.below(5));
    out.push_back(make_detection(0, random_int_box(rng, 8), {score}));
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tubekit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
