#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tubekit {

/// Axis-aligned box in continuous pixel coordinates (corner form).
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool contains(double x, double y) const {
    return x > x_min && x < x_max && y > y_min && y < y_max;
  }
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws InputError unless the box is finite with positive area.
void validate(const BoundingBox& box);

/// Lexicographic order on (x_min, y_min, x_max, y_max).
bool box_less(const BoundingBox& a, const BoundingBox& b);

/// Half-open frame range [start, end).
struct FrameInterval {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(int frame) const { return frame >= start && frame < end; }

  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

enum class Source : std::uint8_t { kStatic, kFlow, kEarlyFusion, kLateFusion, kMerged, kTracked };

std::string_view to_string(Source source);
Source source_from_string(std::string_view name);

struct Detection {
  int frame_index = 0;
  BoundingBox box;
  std::vector<double> class_scores;
  Source source = Source::kStatic;

  double score(int cls) const { return class_scores.at(static_cast<std::size_t>(cls)); }
  /// Highest-scoring class, lowest index on ties.
  int top_class() const;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Class-agnostic region proposal. `class_scores` is optional: when the
/// detector's score file provides per-class scores for the proposal they are
/// carried here, otherwise it is empty and objectness stands in.
struct Proposal {
  int frame_index = 0;
  BoundingBox box;
  double objectness = 0.0;
  std::vector<double> class_scores;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

/// Per-clip class distributions produced by the recurrent clip scorer.
struct ClipScoreSequence {
  int clip_length = 16;
  std::vector<std::vector<double>> scores;

  friend bool operator==(const ClipScoreSequence&, const ClipScoreSequence&) = default;
};

struct Tube {
  std::string video_id;
  std::vector<Detection> entries;
  std::optional<int> label;
  std::optional<double> tube_score;
  std::optional<ClipScoreSequence> clip_scores;

  FrameInterval extent() const;
  /// Entry on `frame`, or nullptr when the tube does not cover it.
  const Detection* at_frame(int frame) const;

  friend bool operator==(const Tube&, const Tube&) = default;
};

struct GroundTruthEntry {
  int frame_index = 0;
  BoundingBox box;

  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct GroundTruthTube {
  std::string video_id;
  int label = 0;
  std::vector<GroundTruthEntry> entries;

  FrameInterval extent() const;
  const BoundingBox* at_frame(int frame) const;

  friend bool operator==(const GroundTruthTube&, const GroundTruthTube&) = default;
};

/// Throws InputError if entries are empty, unordered or have gaps, or if the
/// label / score vectors do not fit `num_classes`.
void validate(const Tube& tube, int num_classes);
void validate(const GroundTruthTube& tube, int num_classes);

double iou(const BoundingBox& a, const BoundingBox& b);
double temporal_iou(const FrameInterval& a, const FrameInterval& b);

/// Temporal IOU of the extents times the mean spatial IOU over the frames
/// both tubes cover. Zero without temporal overlap or across videos.
double st_iou(const Tube& a, const Tube& b);
double st_iou(const Tube& a, const GroundTruthTube& b);
double st_iou(const GroundTruthTube& a, const Tube& b);
double st_iou(const GroundTruthTube& a, const GroundTruthTube& b);

/// Strict weak order used for every score-ranked selection: higher score
/// first, then larger area, then lexicographically smaller box.
bool ranks_before(double score_a, const BoundingBox& a, double score_b, const BoundingBox& b);

/// Greedy non-maximum suppression on one frame for class `cls`.
/// Survivors are returned by descending score; every surviving pair has
/// iou <= threshold.
std::vector<Detection> nms(std::span<const Detection> detections, int cls, double threshold);

}  // namespace tubekit
