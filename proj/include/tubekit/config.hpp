#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tubekit/evaluation.hpp"
#include "tubekit/footprint.hpp"
#include "tubekit/localizer.hpp"
#include "tubekit/scoring.hpp"
#include "tubekit/synth.hpp"
#include "tubekit/tracker.hpp"

namespace tubekit {

enum class TrackerMethod { kPointMatching, kNeighborhood };

/// Every tunable of the pipeline. Serialized as flat `key = value` lines
/// with dotted section names; `#` starts a comment.
struct PipelineConfig {
  int classes = 3;

  double fusion_nms_threshold = 0.3;
  double fusion_min_flow_magnitude = 0.5;
  bool fusion_saliency = true;

  TrackerConfig tracker;
  TrackerMethod tracker_method = TrackerMethod::kPointMatching;
  double tracker_search_radius = 20.0;
  bool tracker_include_drift = true;

  int clip_length = 16;
  ScoreFusion score_fusion = ScoreFusion::kAdd;

  bool prune_enabled = true;
  double prune_st_threshold = 0.3;

  bool footprint_enabled = true;
  int footprint_grid_size = 14;
  int footprint_cell_side = 2;
  Projection footprint_projection = Projection::kMeanBox;

  bool localize_enabled = true;
  double localize_tau = 0.3;
  TrimMode localize_mode = TrimMode::kTrimLowEnds;

  EvalConfig evaluation;

  /// Scenario knobs. num_classes, clip_length, grid_size and cell_side are
  /// taken from the pipeline keys above; see scenario().
  ScenarioConfig synth;

  int threads = 1;

  /// Applies one `key = value` assignment. Throws ConfigError on unknown
  /// keys and unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Throws ConfigError when any value is out of range.
  void validate() const;
  ScenarioConfig scenario() const;
  CellLayout footprint_layout() const { return {footprint_grid_size, footprint_cell_side}; }

  /// Canonical text form; parse(to_text()) reproduces the config.
  std::string to_text() const;
  /// Parses config text; errors name `origin` and the line.
  static PipelineConfig parse(std::string_view text, std::string_view origin = "<config>");
  static PipelineConfig load(const std::string& path);

  /// All recognized keys in canonical order.
  static std::vector<std::string> keys();
};

/// Parses "key=value" as given to --stage-override.
std::pair<std::string, std::string> split_override(std::string_view assignment);

}  // namespace tubekit
