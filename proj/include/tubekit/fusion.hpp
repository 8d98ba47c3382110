#pragma once

#include <span>
#include <vector>

#include "tubekit/core.hpp"

namespace tubekit {

/// Dense optical-flow magnitude for one frame. `stride` is the pixel pitch of
/// one grid cell: cell (i, j) has its center at ((i + 0.5) * stride,
/// (j + 0.5) * stride) in frame pixels. stride 1 is a per-pixel grid.
struct FlowMagnitudeGrid {
  int frame_index = 0;
  int width = 0;
  int height = 0;
  double stride = 1.0;
  std::vector<double> values;  // row-major, height rows of width values

  double at(int col, int row) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }

  friend bool operator==(const FlowMagnitudeGrid&, const FlowMagnitudeGrid&) = default;
};

/// Throws InputError on shape mismatch or negative / non-finite magnitudes.
void validate(const FlowMagnitudeGrid& grid);

/// Mean magnitude over the grid cells whose centers lie strictly inside the
/// box. A box too small to hold any cell center reads the cell under its
/// center.
double mean_magnitude(const FlowMagnitudeGrid& grid, const BoundingBox& box);

/// Keeps the proposals whose mean in-box flow magnitude reaches
/// `min_mean_magnitude`.
std::vector<Proposal> saliency_prune(std::span<const Proposal> proposals,
                                     const FlowMagnitudeGrid& flow, double min_mean_magnitude);

/// Class-wise NMS over the union of two detection sets from one frame.
/// Each detection takes part in the NMS of its top class.
std::vector<Detection> fuse_by_nms(std::span<const Detection> first, std::span<const Detection> second,
                                   double nms_threshold, Source tag);

inline std::vector<Detection> late_fuse(std::span<const Detection> static_dets,
                                        std::span<const Detection> flow_dets, double nms_threshold) {
  return fuse_by_nms(static_dets, flow_dets, nms_threshold, Source::kLateFusion);
}

inline std::vector<Detection> merge_early_late(std::span<const Detection> early,
                                               std::span<const Detection> late, double nms_threshold) {
  return fuse_by_nms(early, late, nms_threshold, Source::kMerged);
}

}  // namespace tubekit
