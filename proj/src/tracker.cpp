#include "tubekit/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "tubekit/error.hpp"

namespace tubekit {

void validate(const PointMatchSet& matches) {
  if (std::abs(matches.to_frame - matches.from_frame) != 1) {
    throw InputError("match set " + std::to_string(matches.from_frame) + "->" +
                     std::to_string(matches.to_frame) + ": frames must be adjacent");
  }
  for (const auto& p : matches.pairs) {
    if (!std::isfinite(p.from.x) || !std::isfinite(p.from.y) || !std::isfinite(p.to.x) ||
        !std::isfinite(p.to.y)) {
      throw InputError("match set " + std::to_string(matches.from_frame) + "->" +
                       std::to_string(matches.to_frame) + ": non-finite coordinate");
    }
  }
}

void MatchSetMatcher::add(const std::string& video_id, PointMatchSet set) {
  validate(set);
  auto key = std::make_tuple(video_id, set.from_frame, set.to_frame);
  sets_[key] = std::move(set);
}

PointMatchSet MatchSetMatcher::match(const std::string& video_id, int from_frame, int to_frame,
                                     const BoundingBox& region) const {
  PointMatchSet out{from_frame, to_frame, {}};
  if (auto it = sets_.find({video_id, from_frame, to_frame}); it != sets_.end()) {
    for (const auto& p : it->second.pairs) {
      if (region.contains(p.from.x, p.from.y)) out.pairs.push_back(p);
    }
  } else if (auto rev = sets_.find({video_id, to_frame, from_frame}); rev != sets_.end()) {
    for (const auto& p : rev->second.pairs) {
      if (region.contains(p.to.x, p.to.y)) out.pairs.push_back({p.to, p.from});
    }
  }
  return out;
}

void TrackerConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("tracker.") + name + " must lie in [0, 1]");
  };
  unit(min_match_ratio, "min_match_ratio");
  unit(min_prev_overlap, "min_prev_overlap");
  unit(consume_overlap, "consume_overlap");
  if (max_predicted_run < 1) throw ConfigError("tracker.max_predicted_run must be >= 1");
}

double proposal_class_score(int cls, const Proposal& proposal) {
  if (proposal.class_scores.empty()) return proposal.objectness;
  return proposal.class_scores.at(static_cast<std::size_t>(cls));
}

void UntrackedPool::add(const Detection& detection) {
  frames_[detection.frame_index].push_back(detection);
  ++size_;
}

std::span<const Detection> UntrackedPool::at(int frame) const {
  auto it = frames_.find(frame);
  if (it == frames_.end()) return {};
  return it->second;
}

std::optional<Detection> UntrackedPool::take_best() {
  const Detection* best = nullptr;
  std::size_t best_index = 0;
  for (const auto& [frame, dets] : frames_) {
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto& d = dets[i];
      const double s = d.score(d.top_class());
      if (!best || ranks_before(s, d.box, best->score(best->top_class()), best->box)) {
        best = &d;
        best_index = i;
      }
    }
  }
  if (!best) return std::nullopt;
  return take(best->frame_index, best_index);
}

Detection UntrackedPool::take(int frame, std::size_t i) {
  auto it = frames_.find(frame);
  if (it == frames_.end() || i >= it->second.size()) {
    throw ProcessingError("untracked pool: no detection " + std::to_string(i) + " on frame " +
                          std::to_string(frame));
  }
  Detection d = std::move(it->second[i]);
  it->second.erase(it->second.begin() + static_cast<std::ptrdiff_t>(i));
  if (it->second.empty()) frames_.erase(it);
  --size_;
  return d;
}

void validate(const VideoFrames& video) {
  const auto n = static_cast<std::size_t>(video.num_frames);
  if (video.num_frames < 0 || video.detections.size() != n || video.proposals.size() != n) {
    throw InputError("video '" + video.video_id + "': per-frame data does not match frame count " +
                     std::to_string(video.num_frames));
  }
  for (std::size_t f = 0; f < n; ++f) {
    for (const auto& d : video.detections[f]) {
      if (d.frame_index != static_cast<int>(f)) throw InputError("video '" + video.video_id + "': detection filed under wrong frame");
    }
    for (const auto& p : video.proposals[f]) {
      if (p.frame_index != static_cast<int>(f)) throw InputError("video '" + video.video_id + "': proposal filed under wrong frame");
    }
  }
}

double match_ratio(const Proposal& proposal, const PointMatchSet& matches) {
  if (matches.pairs.empty()) return 0.0;
  const auto inside = std::count_if(matches.pairs.begin(), matches.pairs.end(), [&](const PointPair& p) {
    return proposal.box.contains(p.to.x, p.to.y);
  });
  return static_cast<double>(inside) / static_cast<double>(matches.pairs.size());
}

namespace {

// Picks the best-scoring proposal among `candidates` and turns it into the
// tube's next entry, snapping to an overlapping same-class pool detection.
std::optional<Detection> select_and_snap(const Detection& region, int cls,
                                         const std::vector<const Proposal*>& candidates,
                                         const RegionScorer& score_fn, const TrackerConfig& cfg,
                                         UntrackedPool& pool) {
  if (candidates.empty()) return std::nullopt;
  const Proposal* best = nullptr;
  double best_score = 0.0;
  for (const Proposal* p : candidates) {
    const double s = score_fn(cls, *p);
    if (!best || ranks_before(s, p->box, best_score, best->box)) {
      best = p;
      best_score = s;
    }
  }

  const int frame = best->frame_index;
  const auto pooled = pool.at(frame);
  std::optional<std::size_t> snap;
  double snap_iou = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const auto& d = pooled[i];
    if (d.top_class() != cls) continue;
    const double o = iou(best->box, d.box);
    if (o < cfg.consume_overlap) continue;
    if (!snap || o > snap_iou ||
        (o == snap_iou && ranks_before(d.score(cls), d.box, pooled[*snap].score(cls), pooled[*snap].box))) {
      snap = i;
      snap_iou = o;
    }
  }
  if (snap) {
    Detection d = pool.take(frame, *snap);
    d.source = Source::kMerged;
    return d;
  }

  Detection tracked;
  tracked.frame_index = frame;
  tracked.box = best->box;
  tracked.source = Source::kTracked;
  tracked.class_scores.resize(region.class_scores.size());
  for (std::size_t k = 0; k < tracked.class_scores.size(); ++k) {
    tracked.class_scores[k] = score_fn(static_cast<int>(k), *best);
  }
  return tracked;
}

template <typename Step>
std::vector<Tube> run_tracking(const VideoFrames& video, const TrackerConfig& cfg, Step step) {
  validate(video);
  cfg.validate();
  UntrackedPool pool;
  for (const auto& frame : video.detections) {
    for (const auto& d : frame) pool.add(d);
  }

  std::vector<Tube> tubes;
  while (auto seed = pool.take_best()) {
    const int cls = seed->top_class();
    auto extend = [&](int direction) {
      std::vector<Detection> path;
      Detection region = *seed;
      int predicted_run = 0;
      for (int to = seed->frame_index + direction; to >= 0 && to < video.num_frames; to += direction) {
        std::optional<Detection> next;
        try {
          next = step(region, cls, to, pool);
        } catch (const ProcessingError&) {
          // A failing scorer ends this tube's extension; other tubes proceed.
          break;
        }
        if (!next) break;
        if (next->source == Source::kTracked) {
          if (++predicted_run > cfg.max_predicted_run) break;
        } else {
          predicted_run = 0;
        }
        region = *next;
        path.push_back(std::move(*next));
      }
      return path;
    };
    std::vector<Detection> forward = extend(+1);
    std::vector<Detection> backward = extend(-1);

    Tube tube;
    tube.video_id = video.video_id;
    tube.label = cls;
    tube.entries.reserve(backward.size() + 1 + forward.size());
    tube.entries.insert(tube.entries.end(), std::make_move_iterator(backward.rbegin()),
                        std::make_move_iterator(backward.rend()));
    tube.entries.push_back(std::move(*seed));
    tube.entries.insert(tube.entries.end(), std::make_move_iterator(forward.begin()),
                        std::make_move_iterator(forward.end()));
    tubes.push_back(std::move(tube));
  }
  return tubes;
}

}  // namespace

std::optional<Detection> track_step(const Detection& region, int cls, std::span<const Proposal> proposals_next,
                                    const PointMatchSet& matches, const RegionScorer& score_fn,
                                    const TrackerConfig& cfg, UntrackedPool& pool) {
  if (matches.pairs.empty()) return std::nullopt;
  std::vector<const Proposal*> candidates;
  for (const auto& p : proposals_next) {
    if (p.frame_index != matches.to_frame) {
      throw InputError("track_step: proposal on frame " + std::to_string(p.frame_index) +
                       " does not match target frame " + std::to_string(matches.to_frame));
    }
    if (match_ratio(p, matches) >= cfg.min_match_ratio && iou(p.box, region.box) >= cfg.min_prev_overlap) {
      candidates.push_back(&p);
    }
  }
  return select_and_snap(region, cls, candidates, score_fn, cfg, pool);
}

std::vector<Tube> build_tubes(const VideoFrames& video, const PointMatcher& matcher, const RegionScorer& score_fn,
                              const TrackerConfig& cfg) {
  return run_tracking(video, cfg, [&](const Detection& region, int cls, int to, UntrackedPool& pool) {
    const PointMatchSet matches = matcher.match(video.video_id, region.frame_index, to, region.box);
    return track_step(region, cls, video.proposals[static_cast<std::size_t>(to)], matches, score_fn, cfg, pool);
  });
}

std::vector<Tube> build_tubes_neighborhood(const VideoFrames& video, const RegionScorer& score_fn,
                                           const TrackerConfig& cfg, double search_radius) {
  return run_tracking(video, cfg, [&](const Detection& region, int cls, int to, UntrackedPool& pool) {
    std::vector<const Proposal*> candidates;
    for (const auto& p : video.proposals[static_cast<std::size_t>(to)]) {
      const double dx = p.box.center_x() - region.box.center_x();
      const double dy = p.box.center_y() - region.box.center_y();
      if (std::hypot(dx, dy) <= search_radius) candidates.push_back(&p);
    }
    return select_and_snap(region, cls, candidates, score_fn, cfg, pool);
  });
}

}  // namespace tubekit
