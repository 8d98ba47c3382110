#include "tubekit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "tubekit/error.hpp"

namespace tubekit {

void validate(const FlowMagnitudeGrid& grid) {
  if (grid.width <= 0 || grid.height <= 0) throw InputError("flow grid: non-positive dimensions");
  if (!(grid.stride > 0.0) || !std::isfinite(grid.stride)) throw InputError("flow grid: stride must be positive");
  const auto expected = static_cast<std::size_t>(grid.width) * static_cast<std::size_t>(grid.height);
  if (grid.values.size() != expected) {
    throw InputError("flow grid for frame " + std::to_string(grid.frame_index) + ": " +
                     std::to_string(grid.values.size()) + " values, expected " + std::to_string(expected));
  }
  for (double v : grid.values) {
    if (!std::isfinite(v) || v < 0.0) throw InputError("flow grid: magnitudes must be finite and >= 0");
  }
}

namespace {

// Cell index range [lo, hi] whose centers may lie inside (lo_px, hi_px).
std::pair<int, int> candidate_cells(double lo_px, double hi_px, double stride, int count) {
  const int lo = std::max(0, static_cast<int>(std::floor(lo_px / stride - 0.5)));
  const int hi = std::min(count - 1, static_cast<int>(std::ceil(hi_px / stride - 0.5)));
  return {lo, hi};
}

}  // namespace

double mean_magnitude(const FlowMagnitudeGrid& grid, const BoundingBox& box) {
  const auto [c0, c1] = candidate_cells(box.x_min, box.x_max, grid.stride, grid.width);
  const auto [r0, r1] = candidate_cells(box.y_min, box.y_max, grid.stride, grid.height);
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = r0; r <= r1; ++r) {
    const double cy = (r + 0.5) * grid.stride;
    if (!(cy > box.y_min && cy < box.y_max)) continue;
    for (int c = c0; c <= c1; ++c) {
      const double cx = (c + 0.5) * grid.stride;
      if (!(cx > box.x_min && cx < box.x_max)) continue;
      sum += grid.at(c, r);
      ++n;
    }
  }
  if (n > 0) return sum / static_cast<double>(n);
  const int c = std::clamp(static_cast<int>(std::floor(box.center_x() / grid.stride)), 0, grid.width - 1);
  const int r = std::clamp(static_cast<int>(std::floor(box.center_y() / grid.stride)), 0, grid.height - 1);
  return grid.at(c, r);
}

std::vector<Proposal> saliency_prune(std::span<const Proposal> proposals, const FlowMagnitudeGrid& flow,
                                     double min_mean_magnitude) {
  if (min_mean_magnitude < 0.0) throw InputError("saliency_prune: negative magnitude threshold");
  std::vector<Proposal> kept;
  for (const auto& p : proposals) {
    if (p.frame_index != flow.frame_index) {
      throw InputError("saliency_prune: proposal on frame " + std::to_string(p.frame_index) +
                       " checked against flow of frame " + std::to_string(flow.frame_index));
    }
    if (mean_magnitude(flow, p.box) >= min_mean_magnitude) kept.push_back(p);
  }
  return kept;
}

std::vector<Detection> fuse_by_nms(std::span<const Detection> first, std::span<const Detection> second,
                                   double nms_threshold, Source tag) {
  std::map<int, std::vector<Detection>> by_class;
  std::optional<int> frame;
  for (auto stream : {first, second}) {
    for (const auto& d : stream) {
      if (frame && *frame != d.frame_index) {
        throw InputError("detection fusion: mixed frames " + std::to_string(*frame) + " and " +
                         std::to_string(d.frame_index));
      }
      frame = d.frame_index;
      by_class[d.top_class()].push_back(d);
    }
  }
  std::vector<Detection> out;
  for (auto& [cls, group] : by_class) {
    for (auto& d : nms(group, cls, nms_threshold)) {
      d.source = tag;
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace tubekit
