#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tubekit/core.hpp"

namespace tubekit {

enum class TrimMode {
  /// Drop leading and trailing clips scoring below tau.
  kTrimLowEnds,
  /// Keep the span between the first and last clips scoring below tau.
  kBetweenLowClips,
};

/// Inclusive clip index range that survives trimming, or nullopt when no
/// clip survives. Interior clips are never examined by kTrimLowEnds.
std::optional<std::pair<std::size_t, std::size_t>> surviving_clips(std::span<const double> label_scores, double tau,
                                                                   TrimMode mode = TrimMode::kTrimLowEnds);

/// Trims the tube to the frames of its surviving clips, using the score of
/// the tube's label in each clip. nullopt means the tube is removed.
/// The tube's clip scores, when present, are cut to the surviving clips.
std::optional<Tube> localize(const Tube& tube, const ClipScoreSequence& clip_scores,
                             std::span<const FrameInterval> clip_intervals, double tau,
                             TrimMode mode = TrimMode::kTrimLowEnds);

}  // namespace tubekit
