#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tubekit/core.hpp"
#include "tubekit/footprint.hpp"
#include "tubekit/fusion.hpp"
#include "tubekit/scoring.hpp"
#include "tubekit/tracker.hpp"

namespace tubekit {

enum class MotionModel { kLinear, kSinusoidal, kRandomWalk };

std::string_view to_string(MotionModel m);
MotionModel motion_from_string(std::string_view name);

/// Everything that determines a synthetic scenario. Identical configs
/// (including the seed) produce identical bundles.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  int video_count = 20;
  int frames_per_video = 80;
  int frame_width = 640;
  int frame_height = 480;
  int num_classes = 3;
  int actors_per_video = 1;
  double actor_width = 100.0;
  double actor_height = 100.0;
  MotionModel motion = MotionModel::kLinear;
  double speed = 6.0;  // pixels per frame
  /// Confine each class to its own region of the frame. Without it, single
  /// actors roam the whole frame and multiple actors get disjoint bands.
  bool spatial_focus = true;
  double home_margin = 40.0;
  double action_fraction = 1.0;  // share of each video where the action happens

  double box_jitter = 0.0;       // sigma, pixels
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;  // per frame
  double label_confusion = 0.0;
  double score_noise = 0.0;
  double match_noise = 0.0;      // sigma, pixels
  double proposal_recall = 1.0;
  int distractor_proposals = 4;
  double drift_rate = 0.0;

  double flow_stride = 16.0;
  double flow_noise = 0.05;
  int match_grid = 6;  // synthetic matcher samples match_grid^2 points
  int clip_length = 16;
  int feature_dim = 8;
  double feature_amplitude = 3.0;
  double feature_noise = 0.3;
  int grid_size = 14;
  int grid_depth = 4;
  int cell_side = 2;
  int gmm_components = 4;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  bool noiseless() const;
};

/// One actor's full trajectory. The actor is visible on every frame; the
/// action (and therefore the ground truth) covers `action` only.
struct ActorTrack {
  int label = 0;
  BoundingBox region;  // area the actor moves in
  FrameInterval action;
  std::vector<BoundingBox> boxes;  // one per frame

  friend bool operator==(const ActorTrack&, const ActorTrack&) = default;
};

struct SyntheticVideo {
  std::string video_id;
  int num_frames = 0;
  std::vector<ActorTrack> actors;
  std::vector<std::vector<Detection>> static_detections;
  std::vector<std::vector<Detection>> flow_detections;
  std::vector<std::vector<Detection>> early_detections;
  std::vector<std::vector<Proposal>> proposals;

  friend bool operator==(const SyntheticVideo&, const SyntheticVideo&) = default;
};

struct ScenarioBundle {
  ScenarioConfig config;
  std::vector<SyntheticVideo> videos;
  std::vector<GroundTruthTube> ground_truth;
  std::vector<Tube> drift_tubes;  // fabricated off-actor tubes
  RecurrentScorerWeights weights;
  GaussianMixture gmm;
  std::vector<std::vector<double>> cell_accuracy;  // per class, per footprint cell
};

/// Video id for index i ("v0000", "v0001", ...).
std::string synthetic_video_id(int index);

/// Ground-truth view of a scenario: actor tracks and frame geometry. This is
/// all the matcher, flow and feature oracles need.
class SyntheticWorld : public PointMatcher {
 public:
  SyntheticWorld(ScenarioConfig config, std::vector<std::string> video_ids,
                 std::vector<std::vector<ActorTrack>> actors);
  static SyntheticWorld from_bundle(const ScenarioBundle& bundle);

  const ScenarioConfig& config() const { return config_; }
  std::size_t video_count() const { return video_ids_.size(); }
  const std::vector<ActorTrack>& actors(std::size_t video) const { return actors_.at(video); }
  std::size_t video_index(const std::string& video_id) const;

  /// Grid points inside `region`, carried along the motion of the actor
  /// under each point (background points stay put), plus match noise.
  PointMatchSet match(const std::string& video_id, int from_frame, int to_frame,
                      const BoundingBox& region) const override;

  /// Frame-wide match set: the grid inside every actor box plus one grid
  /// over the whole frame.
  PointMatchSet frame_matches(std::size_t video, int from_frame, int to_frame) const;

  FlowMagnitudeGrid flow(std::size_t video, int frame) const;

  /// Clip descriptor: the class blob of the actor the tube follows during
  /// the clip (if that actor is acting), background otherwise.
  std::vector<double> clip_features(std::size_t video, const Tube& tube, const FrameInterval& clip) const;

  /// Frame-wide descriptor grids sampled at the middle frame of each clip.
  FeatureGridSequence feature_grid(std::size_t video, std::span<const FrameInterval> clips) const;

 private:
  ScenarioConfig config_;
  std::vector<std::string> video_ids_;
  std::vector<std::vector<ActorTrack>> actors_;
  std::map<std::string, std::size_t> index_;
};

/// Scorer weights matched to the synthetic clip features: class blobs map
/// to their class, background clips fall to a trailing non-action output.
RecurrentScorerWeights synthetic_scorer_weights(const ScenarioConfig& config);

/// Fits the Fisher-vector codebook on ground-truth tube grids and measures
/// per-cell nearest-centroid accuracy on one sample per clip. Within each
/// class, alternate ground-truth tubes go to training and to testing.
void fit_footprint_statistics(ScenarioBundle& bundle);

/// Videos are generated on up to `threads` workers; the bundle does not
/// depend on the worker count.
ScenarioBundle generate(const ScenarioConfig& config, int threads = 1);

/// Adds round(rate * ground-truth count) fabricated tubes that copy a
/// ground-truth tube's extent and label but sit where no ground-truth box
/// of that video ever is.
void inject_drift(ScenarioBundle& bundle, double rate);

}  // namespace tubekit
