#pragma once

#include <span>
#include <string>
#include <vector>

#include "tubekit/core.hpp"

namespace tubekit {

/// A labeled, scored box on one frame.
struct FramePrediction {
  std::string video_id;
  int frame_index = 0;
  BoundingBox box;
  int label = 0;
  double score = 0.0;
};

struct FrameGroundTruth {
  std::string video_id;
  int frame_index = 0;
  BoundingBox box;
  int label = 0;
};

/// Outcome of greedy one-to-one matching, in rank order (descending score,
/// input order on ties).
struct MatchResult {
  std::vector<std::size_t> order;  // rank -> prediction index
  std::vector<double> scores;      // by rank
  std::vector<int> labels;         // by rank
  std::vector<bool> true_positive; // by rank
  std::vector<int> matched_gt;     // by rank, -1 when unmatched
  std::vector<bool> gt_claimed;    // by ground-truth index
  std::vector<int> gt_labels;      // by ground-truth index
};

/// Each prediction, in rank order, claims the unclaimed same-label ground
/// truth with the highest overlap strictly above sigma. Video mode uses
/// st_iou; predictions must carry a label and a tube score.
MatchResult match_tubes(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth, double sigma);
MatchResult match_frames(std::span<const FramePrediction> predictions, std::span<const FrameGroundTruth> ground_truth,
                         double sigma);

/// All-point interpolated AP of a ranked TP/FP sequence. 0 when num_gt is 0.
double average_precision(const std::vector<bool>& ranked_true_positive, std::size_t num_gt);

struct ClassAp {
  std::vector<double> ap;        // per class
  std::vector<std::size_t> gt;   // ground-truth count per class
  double mean = 0.0;             // over classes with at least one ground truth
};

ClassAp class_average_precision(const MatchResult& result, int num_classes);

/// Mean of the given per-class APs over classes with num_gt > 0.
double map_over_classes(std::span<const double> ap, std::span<const std::size_t> num_gt);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC points for score thresholds (all distinct scores when the grid is
/// empty). FPR is normalized by the false-positive count at the loosest
/// threshold.
std::vector<RocPoint> roc_curve(const MatchResult& result, std::size_t num_gt, std::span<const double> score_grid = {});

/// Trapezoidal area under the ROC points over FPR in [0, fpr_max],
/// normalized by fpr_max.
double roc_auc(std::span<const RocPoint> curve, double fpr_max = 0.6);

/// Fraction of ground-truth tubes covered by a same-class tube with
/// st_iou >= sigma.
double recall_track(std::span<const Tube> tubes, std::span<const GroundTruthTube> ground_truth, double sigma = 0.5);

struct FalseTaxonomy {
  std::size_t predictions = 0;
  std::size_t true_positive = 0;
  std::size_t false_cls = 0;   // overlaps a ground truth of another label at >= sigma
  std::size_t false_bbox = 0;  // every other false positive
  std::size_t false_neg = 0;   // ground truth with no prediction overlapping >= floor
  std::size_t ground_truth = 0;
};

FalseTaxonomy false_taxonomy(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth,
                             double sigma = 0.5, double false_neg_floor = 0.1);
FalseTaxonomy false_taxonomy(std::span<const FramePrediction> predictions,
                             std::span<const FrameGroundTruth> ground_truth, double sigma = 0.5,
                             double false_neg_floor = 0.1);

std::vector<FramePrediction> frame_predictions(std::span<const Tube> tubes);
std::vector<FrameGroundTruth> frame_ground_truth(std::span<const GroundTruthTube> tubes);

struct EvalConfig {
  std::vector<double> iou_thresholds{0.05, 0.1, 0.2, 0.3, 0.5};
  std::vector<double> score_grid;  // empty: every distinct prediction score
  double fpr_max = 0.6;
  double recall_track_iou = 0.5;
  double taxonomy_iou = 0.5;
  double false_neg_floor = 0.1;

  void validate() const;
};

struct ThresholdResult {
  double sigma = 0.0;
  ClassAp video;
  ClassAp frame;
  double auc = 0.0;
};

struct EvalReport {
  int num_classes = 0;
  std::vector<ThresholdResult> thresholds;
  double recall_track = 0.0;
  FalseTaxonomy video_taxonomy;
  FalseTaxonomy frame_taxonomy;

  /// Result for the threshold equal to sigma; throws if it was not evaluated.
  const ThresholdResult& at(double sigma) const;
  std::string to_json() const;
  /// Plain-text table: one row per metric, one column per threshold.
  std::string to_table() const;
};

EvalReport evaluate(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth, int num_classes,
                    const EvalConfig& config = {});

}  // namespace tubekit
