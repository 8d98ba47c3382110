#pragma once

#include <filesystem>
#include <optional>

#include "tubekit/config.hpp"
#include "tubekit/evaluation.hpp"
#include "tubekit/io.hpp"
#include "tubekit/parallel.hpp"
#include "tubekit/synth.hpp"

namespace tubekit {

namespace fs = std::filesystem;

/// Stage inputs are looked up in `out` first, then in `in`; outputs go to
/// `out`.
struct StageDirs {
  fs::path in;
  fs::path out;
};

namespace files {
inline constexpr const char* kScenario = "scenario.cfg";
inline constexpr const char* kVideos = "videos.jsonl";
inline constexpr const char* kActors = "actors.jsonl";
inline constexpr const char* kGroundTruth = "ground_truth.jsonl";
inline constexpr const char* kStaticDetections = "detections_static.jsonl";
inline constexpr const char* kFlowDetections = "detections_flow.jsonl";
inline constexpr const char* kEarlyDetections = "detections_early.jsonl";
inline constexpr const char* kProposals = "proposals.jsonl";
inline constexpr const char* kFlow = "flow.bin";
inline constexpr const char* kMatches = "matches.jsonl";
inline constexpr const char* kWeights = "scorer_weights.bin";
inline constexpr const char* kGmm = "gmm.bin";
inline constexpr const char* kFootprint = "footprint_alpha.jsonl";
inline constexpr const char* kClipFeatures = "clip_features.jsonl";
inline constexpr const char* kDrift = "drift_tubes.jsonl";
inline constexpr const char* kDetections = "detections.jsonl";
inline constexpr const char* kSalientProposals = "proposals_salient.jsonl";
inline constexpr const char* kCandidates = "candidate_tubes.jsonl";
inline constexpr const char* kScored = "scored_tubes.jsonl";
inline constexpr const char* kPruned = "pruned_tubes.jsonl";
inline constexpr const char* kFinal = "final_tubes.jsonl";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportText = "report.txt";
}  // namespace files

/// Writes every file of a synthetic bundle into `dir`.
void write_bundle(const ScenarioBundle& bundle, const PipelineConfig& config, const fs::path& dir);

/// Generates the scenario described by config.scenario() into `out`.
void run_synth(const PipelineConfig& config, const fs::path& out);

/// Late fusion, early/late merge and flow-saliency pruning of proposals.
void run_fuse(const PipelineConfig& config, const StageDirs& dirs);
/// Builds candidate tubes; appends fabricated drift tubes when present.
void run_track(const PipelineConfig& config, const StageDirs& dirs);
/// Clip scores from the recurrent scorer, fused tube labels and scores.
void run_score(const PipelineConfig& config, const StageDirs& dirs);
/// Overlapped-tube pruning followed by footprint pruning.
void run_prune(const PipelineConfig& config, const StageDirs& dirs);
/// Temporal trimming of each tube by its label's clip scores.
void run_localize(const PipelineConfig& config, const StageDirs& dirs);
/// Scores `predictions` (default: final tubes) against the ground truth and
/// writes report.json and report.txt.
EvalReport run_evaluate(const PipelineConfig& config, const StageDirs& dirs,
                        const std::optional<fs::path>& predictions = std::nullopt);
/// All stages in order. Evaluates when ground truth is available.
std::optional<EvalReport> run_pipeline(const PipelineConfig& config, const StageDirs& dirs);

}  // namespace tubekit
