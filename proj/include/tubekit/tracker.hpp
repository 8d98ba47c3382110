#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tubekit/core.hpp"

namespace tubekit {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointPair {
  Point from;
  Point to;
  friend bool operator==(const PointPair&, const PointPair&) = default;
};

/// Correspondences between two adjacent frames (|to_frame - from_frame| == 1).
struct PointMatchSet {
  int from_frame = 0;
  int to_frame = 0;
  std::vector<PointPair> pairs;
  friend bool operator==(const PointMatchSet&, const PointMatchSet&) = default;
};

void validate(const PointMatchSet& matches);

/// Produces correspondences for the points of `region` on `from_frame`.
/// Every returned from-point lies inside `region`.
class PointMatcher {
 public:
  virtual ~PointMatcher() = default;
  virtual PointMatchSet match(const std::string& video_id, int from_frame, int to_frame,
                              const BoundingBox& region) const = 0;
};

/// Serves precomputed frame-wide match sets, restricted to the query box.
/// A request for t+1 -> t with no stored set uses the t -> t+1 set reversed.
class MatchSetMatcher : public PointMatcher {
 public:
  void add(const std::string& video_id, PointMatchSet set);
  PointMatchSet match(const std::string& video_id, int from_frame, int to_frame,
                      const BoundingBox& region) const override;

 private:
  std::map<std::tuple<std::string, int, int>, PointMatchSet> sets_;
};

struct TrackerConfig {
  double min_match_ratio = 0.5;
  double min_prev_overlap = 0.2;
  double consume_overlap = 0.5;
  int max_predicted_run = 8;

  /// Throws ConfigError when a threshold is out of range.
  void validate() const;
};

/// Class score of a candidate region; stands in for the detector's S_cnn.
using RegionScorer = std::function<double(int cls, const Proposal&)>;

/// Per-class score carried by the proposal, or its objectness when the
/// proposal has no class scores.
double proposal_class_score(int cls, const Proposal& proposal);

/// Detections of one video that no tube has absorbed yet.
class UntrackedPool {
 public:
  void add(const Detection& detection);
  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }
  std::span<const Detection> at(int frame) const;

  /// Removes and returns the detection with the highest top-class score
  /// (ties: larger area, smaller box, earlier frame).
  std::optional<Detection> take_best();
  /// Removes the detection on `frame` with index `i` in at(frame).
  Detection take(int frame, std::size_t i);

 private:
  std::map<int, std::vector<Detection>> frames_;
  std::size_t size_ = 0;
};

/// One frame's worth of tracking input.
struct VideoFrames {
  std::string video_id;
  int num_frames = 0;
  std::vector<std::vector<Detection>> detections;  // indexed by frame
  std::vector<std::vector<Proposal>> proposals;    // indexed by frame
};

/// Throws InputError when per-frame vectors do not match num_frames or a
/// record sits on the wrong frame.
void validate(const VideoFrames& video);

double match_ratio(const Proposal& proposal, const PointMatchSet& matches);

/// Extends `region` by one frame. Returns nullopt when the action vanishes
/// (no matches or no proposal passes both the match-ratio and the
/// previous-overlap tests). Otherwise returns the best-scoring candidate,
/// snapped to an overlapping same-class pool detection when one exists
/// (that detection is removed from the pool).
std::optional<Detection> track_step(const Detection& region, int cls, std::span<const Proposal> proposals_next,
                                    const PointMatchSet& matches, const RegionScorer& score_fn,
                                    const TrackerConfig& cfg, UntrackedPool& pool);

/// Tracking-by-point-matching over a whole video: seeds tubes from the pool
/// in descending score order and extends each forward then backward until
/// termination; stops when the pool is empty.
std::vector<Tube> build_tubes(const VideoFrames& video, const PointMatcher& matcher,
                              const RegionScorer& score_fn, const TrackerConfig& cfg);

/// Contrast baseline: neighborhood-constrained tracking. A region can only
/// move to a proposal whose center lies within `search_radius` pixels of its
/// own center; no point matching is used.
std::vector<Tube> build_tubes_neighborhood(const VideoFrames& video, const RegionScorer& score_fn,
                                           const TrackerConfig& cfg, double search_radius);

}  // namespace tubekit
