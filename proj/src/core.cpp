#include "tubekit/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tubekit/error.hpp"

namespace tubekit {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

void validate(const BoundingBox& box) {
  if (!box.valid()) {
    throw InputError("invalid box (" + std::to_string(box.x_min) + ", " + std::to_string(box.y_min) +
                     ", " + std::to_string(box.x_max) + ", " + std::to_string(box.y_max) +
                     "): coordinates must be finite with positive area");
  }
}

bool box_less(const BoundingBox& a, const BoundingBox& b) {
  if (a.x_min != b.x_min) return a.x_min < b.x_min;
  if (a.y_min != b.y_min) return a.y_min < b.y_min;
  if (a.x_max != b.x_max) return a.x_max < b.x_max;
  return a.y_max < b.y_max;
}

std::string_view to_string(Source source) {
  switch (source) {
    case Source::kStatic: return "static";
    case Source::kFlow: return "flow";
    case Source::kEarlyFusion: return "early_fusion";
    case Source::kLateFusion: return "late_fusion";
    case Source::kMerged: return "merged";
    case Source::kTracked: return "tracked";
  }
  return "static";
}

Source source_from_string(std::string_view name) {
  for (auto s : {Source::kStatic, Source::kFlow, Source::kEarlyFusion, Source::kLateFusion,
                 Source::kMerged, Source::kTracked}) {
    if (to_string(s) == name) return s;
  }
  throw InputError("unknown detection source '" + std::string(name) + "'");
}

int Detection::top_class() const {
  if (class_scores.empty()) return 0;
  return static_cast<int>(std::max_element(class_scores.begin(), class_scores.end()) -
                          class_scores.begin());
}

FrameInterval Tube::extent() const {
  if (entries.empty()) return {};
  return {entries.front().frame_index, entries.back().frame_index + 1};
}

const Detection* Tube::at_frame(int frame) const {
  if (entries.empty()) return nullptr;
  const int offset = frame - entries.front().frame_index;
  if (offset < 0 || offset >= static_cast<int>(entries.size())) return nullptr;
  return &entries[static_cast<std::size_t>(offset)];
}

FrameInterval GroundTruthTube::extent() const {
  if (entries.empty()) return {};
  return {entries.front().frame_index, entries.back().frame_index + 1};
}

const BoundingBox* GroundTruthTube::at_frame(int frame) const {
  if (entries.empty()) return nullptr;
  const int offset = frame - entries.front().frame_index;
  if (offset < 0 || offset >= static_cast<int>(entries.size())) return nullptr;
  return &entries[static_cast<std::size_t>(offset)].box;
}

namespace {

template <typename Entries, typename FrameOf>
void validate_sequence(const Entries& entries, FrameOf frame_of, const std::string& what) {
  if (entries.empty()) throw InputError(what + ": no entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (frame_of(entries[i]) < 0) throw InputError(what + ": negative frame index");
    if (i > 0 && frame_of(entries[i]) != frame_of(entries[i - 1]) + 1) {
      throw InputError(what + ": frames must be consecutive (gap or disorder at frame " +
                       std::to_string(frame_of(entries[i])) + ")");
    }
  }
}

const BoundingBox* box_at(const Tube& t, int frame) {
  const Detection* d = t.at_frame(frame);
  return d ? &d->box : nullptr;
}
const BoundingBox* box_at(const GroundTruthTube& t, int frame) { return t.at_frame(frame); }

template <typename A, typename B>
double st_iou_impl(const A& a, const B& b) {
  if (a.video_id != b.video_id) return 0.0;
  const FrameInterval ea = a.extent();
  const FrameInterval eb = b.extent();
  const double tiou = temporal_iou(ea, eb);
  if (tiou <= 0.0) return 0.0;
  const int lo = std::max(ea.start, eb.start);
  const int hi = std::min(ea.end, eb.end);
  double sum = 0.0;
  for (int f = lo; f < hi; ++f) sum += iou(*box_at(a, f), *box_at(b, f));
  return tiou * (sum / static_cast<double>(hi - lo));
}

}  // namespace

void validate(const Tube& tube, int num_classes) {
  const std::string what = "tube in video '" + tube.video_id + "'";
  validate_sequence(tube.entries, [](const Detection& d) { return d.frame_index; }, what);
  for (const auto& d : tube.entries) {
    validate(d.box);
    if (static_cast<int>(d.class_scores.size()) != num_classes) {
      throw InputError(what + ": class score vector has " + std::to_string(d.class_scores.size()) +
                       " entries, expected " + std::to_string(num_classes));
    }
    for (double s : d.class_scores) {
      if (!std::isfinite(s)) throw InputError(what + ": non-finite class score");
    }
  }
  if (tube.label && (*tube.label < 0 || *tube.label >= num_classes)) {
    throw InputError(what + ": label out of range");
  }
}

void validate(const GroundTruthTube& tube, int num_classes) {
  const std::string what = "ground-truth tube in video '" + tube.video_id + "'";
  validate_sequence(tube.entries, [](const GroundTruthEntry& e) { return e.frame_index; }, what);
  for (const auto& e : tube.entries) validate(e.box);
  if (tube.label < 0 || tube.label >= num_classes) throw InputError(what + ": label out of range");
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double temporal_iou(const FrameInterval& a, const FrameInterval& b) {
  const int inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0) return 0.0;
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double st_iou(const Tube& a, const Tube& b) { return st_iou_impl(a, b); }
double st_iou(const Tube& a, const GroundTruthTube& b) { return st_iou_impl(a, b); }
double st_iou(const GroundTruthTube& a, const Tube& b) { return st_iou_impl(a, b); }
double st_iou(const GroundTruthTube& a, const GroundTruthTube& b) { return st_iou_impl(a, b); }

bool ranks_before(double score_a, const BoundingBox& a, double score_b, const BoundingBox& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.area() != b.area()) return a.area() > b.area();
  return box_less(a, b);
}

std::vector<Detection> nms(std::span<const Detection> detections, int cls, double threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return ranks_before(detections[i].score(cls), detections[i].box, detections[j].score(cls),
                        detections[j].box);
  });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const auto& candidate = detections[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, candidate.box) > threshold;
    });
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

}  // namespace tubekit
