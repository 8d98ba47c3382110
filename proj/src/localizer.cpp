#include "tubekit/localizer.hpp"

#include <string>

#include "tubekit/error.hpp"

namespace tubekit {

std::optional<std::pair<std::size_t, std::size_t>> surviving_clips(std::span<const double> label_scores, double tau,
                                                                   TrimMode mode) {
  const std::size_t n = label_scores.size();
  if (n == 0) return std::nullopt;
  if (mode == TrimMode::kBetweenLowClips) {
    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < n; ++i) {
      if (label_scores[i] < tau) {
        if (!first) first = i;
        last = i;
      }
    }
    if (!first) return std::pair{std::size_t{0}, n - 1};
    return std::pair{*first, *last};
  }
  std::size_t lo = 0;
  while (lo < n && label_scores[lo] < tau) ++lo;
  if (lo == n) return std::nullopt;
  std::size_t hi = n - 1;
  while (label_scores[hi] < tau) --hi;
  return std::pair{lo, hi};
}

std::optional<Tube> localize(const Tube& tube, const ClipScoreSequence& clip_scores,
                             std::span<const FrameInterval> clip_intervals, double tau, TrimMode mode) {
  if (!tube.label) throw InputError("localize: tube in video '" + tube.video_id + "' has no label");
  if (clip_scores.scores.size() != clip_intervals.size()) {
    throw InputError("localize: " + std::to_string(clip_scores.scores.size()) + " clip scores for " +
                     std::to_string(clip_intervals.size()) + " clips");
  }
  const auto label = static_cast<std::size_t>(*tube.label);
  std::vector<double> label_scores;
  label_scores.reserve(clip_scores.scores.size());
  for (const auto& s : clip_scores.scores) label_scores.push_back(s.at(label));

  const auto range = surviving_clips(label_scores, tau, mode);
  if (!range) return std::nullopt;
  const int start = clip_intervals[range->first].start;
  const int end = clip_intervals[range->second].end;

  Tube out = tube;
  out.entries.clear();
  for (const auto& e : tube.entries) {
    if (e.frame_index >= start && e.frame_index < end) out.entries.push_back(e);
  }
  if (out.entries.empty()) return std::nullopt;
  if (out.clip_scores) {
    ClipScoreSequence cut;
    cut.clip_length = clip_scores.clip_length;
    cut.scores.assign(clip_scores.scores.begin() + static_cast<std::ptrdiff_t>(range->first),
                      clip_scores.scores.begin() + static_cast<std::ptrdiff_t>(range->second + 1));
    out.clip_scores = std::move(cut);
  }
  return out;
}

}  // namespace tubekit
