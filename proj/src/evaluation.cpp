#include "tubekit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "tubekit/error.hpp"

namespace tubekit {

namespace {

std::string frame_key(const std::string& video, int frame) { return video + '\x1f' + std::to_string(frame); }

// Greedy matching shared by both modes. `overlap(i, j)` is only evaluated
// for predictions and ground truths with the same key.
template <typename Overlap>
MatchResult greedy_match(std::span<const double> scores, std::span<const int> labels,
                         std::span<const std::string> pred_keys, std::span<const int> gt_labels,
                         std::span<const std::string> gt_keys, double sigma, Overlap overlap) {
  MatchResult r;
  const std::size_t n = scores.size();
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::unordered_map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t j = 0; j < gt_keys.size(); ++j) by_key[gt_keys[j]].push_back(j);
  r.gt_claimed.assign(gt_keys.size(), false);
  r.gt_labels.assign(gt_labels.begin(), gt_labels.end());

  for (std::size_t i : r.order) {
    r.scores.push_back(scores[i]);
    r.labels.push_back(labels[i]);
    int best = -1;
    double best_overlap = sigma;
    if (auto it = by_key.find(pred_keys[i]); it != by_key.end()) {
      for (std::size_t j : it->second) {
        if (r.gt_claimed[j] || gt_labels[j] != labels[i]) continue;
        const double o = overlap(i, j);
        if (o > best_overlap) {
          best = static_cast<int>(j);
          best_overlap = o;
        }
      }
    }
    if (best >= 0) r.gt_claimed[static_cast<std::size_t>(best)] = true;
    r.true_positive.push_back(best >= 0);
    r.matched_gt.push_back(best);
  }
  return r;
}

int tube_label(const Tube& t) {
  if (!t.label) throw InputError("evaluation: predicted tube in video '" + t.video_id + "' has no label");
  return *t.label;
}

double tube_score(const Tube& t) {
  if (!t.tube_score) throw InputError("evaluation: predicted tube in video '" + t.video_id + "' has no score");
  return *t.tube_score;
}

template <typename Overlap>
FalseTaxonomy taxonomy_from(const MatchResult& m, std::size_t num_gt, std::span<const std::string> pred_keys,
                            std::span<const std::string> gt_keys, double sigma, double floor, Overlap overlap) {
  FalseTaxonomy t;
  t.predictions = m.order.size();
  t.ground_truth = num_gt;
  std::unordered_map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t j = 0; j < gt_keys.size(); ++j) by_key[gt_keys[j]].push_back(j);
  std::vector<bool> touched(num_gt, false);
  for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
    const std::size_t i = m.order[rank];
    bool wrong_label_hit = false;
    if (auto it = by_key.find(pred_keys[i]); it != by_key.end()) {
      for (std::size_t j : it->second) {
        const double o = overlap(i, j);
        if (o >= floor) touched[j] = true;
        if (o >= sigma && m.gt_labels[j] != m.labels[rank]) wrong_label_hit = true;
      }
    }
    if (m.true_positive[rank]) {
      ++t.true_positive;
    } else if (wrong_label_hit) {
      ++t.false_cls;
    } else {
      ++t.false_bbox;
    }
  }
  t.false_neg = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), false));
  return t;
}

}  // namespace

MatchResult match_tubes(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth, double sigma) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> keys;
  for (const auto& p : predictions) {
    scores.push_back(tube_score(p));
    labels.push_back(tube_label(p));
    keys.push_back(p.video_id);
  }
  std::vector<int> gt_labels;
  std::vector<std::string> gt_keys;
  for (const auto& g : ground_truth) {
    gt_labels.push_back(g.label);
    gt_keys.push_back(g.video_id);
  }
  return greedy_match(scores, labels, keys, gt_labels, gt_keys, sigma,
                      [&](std::size_t i, std::size_t j) { return st_iou(predictions[i], ground_truth[j]); });
}

MatchResult match_frames(std::span<const FramePrediction> predictions, std::span<const FrameGroundTruth> ground_truth,
                         double sigma) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> keys;
  for (const auto& p : predictions) {
    scores.push_back(p.score);
    labels.push_back(p.label);
    keys.push_back(frame_key(p.video_id, p.frame_index));
  }
  std::vector<int> gt_labels;
  std::vector<std::string> gt_keys;
  for (const auto& g : ground_truth) {
    gt_labels.push_back(g.label);
    gt_keys.push_back(frame_key(g.video_id, g.frame_index));
  }
  return greedy_match(scores, labels, keys, gt_labels, gt_keys, sigma,
                      [&](std::size_t i, std::size_t j) { return iou(predictions[i].box, ground_truth[j].box); });
}

double average_precision(const std::vector<bool>& ranked_true_positive, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  const std::size_t n = ranked_true_positive.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_true_positive[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // Precision envelope: best precision at this or any deeper rank.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_true_positive[k]) ap += precision[k];
  }
  return ap / static_cast<double>(num_gt);
}

double map_over_classes(std::span<const double> ap, std::span<const std::size_t> num_gt) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < ap.size(); ++c) {
    if (num_gt[c] == 0) continue;
    sum += ap[c];
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

ClassAp class_average_precision(const MatchResult& result, int num_classes) {
  const auto classes = static_cast<std::size_t>(num_classes);
  ClassAp out;
  out.ap.assign(classes, 0.0);
  out.gt.assign(classes, 0);
  for (int l : result.gt_labels) ++out.gt.at(static_cast<std::size_t>(l));
  std::vector<std::vector<bool>> ranked(classes);
  for (std::size_t k = 0; k < result.labels.size(); ++k) {
    ranked.at(static_cast<std::size_t>(result.labels[k])).push_back(result.true_positive[k]);
  }
  for (std::size_t c = 0; c < classes; ++c) out.ap[c] = average_precision(ranked[c], out.gt[c]);
  out.mean = map_over_classes(out.ap, out.gt);
  return out;
}

std::vector<RocPoint> roc_curve(const MatchResult& result, std::size_t num_gt, std::span<const double> score_grid) {
  std::vector<double> thresholds(score_grid.begin(), score_grid.end());
  if (thresholds.empty()) thresholds = result.scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<std::pair<std::size_t, std::size_t>> counts;  // (tp, fp) per threshold
  std::size_t rank = 0, tp = 0, fp = 0;
  for (double theta : thresholds) {
    while (rank < result.scores.size() && result.scores[rank] >= theta) {
      result.true_positive[rank] ? ++tp : ++fp;
      ++rank;
    }
    counts.emplace_back(tp, fp);
  }
  const std::size_t negatives = counts.empty() ? 0 : counts.back().second;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  for (auto [t, f] : counts) {
    RocPoint p;
    p.tpr = num_gt == 0 ? 0.0 : static_cast<double>(t) / static_cast<double>(num_gt);
    p.fpr = negatives == 0 ? 0.0 : static_cast<double>(f) / static_cast<double>(negatives);
    curve.push_back(p);
  }
  return curve;
}

double roc_auc(std::span<const RocPoint> curve, double fpr_max) {
  if (curve.empty()) return 0.0;
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const RocPoint a = curve[k - 1];
    RocPoint b = curve[k];
    if (a.fpr >= fpr_max) break;
    if (b.fpr > fpr_max) {
      const double t = (fpr_max - a.fpr) / (b.fpr - a.fpr);
      b = {fpr_max, a.tpr + t * (b.tpr - a.tpr)};
    }
    area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  // A curve that never leaves FPR 0 (no false positives at all) holds its
  // final TPR across the whole range.
  const RocPoint last = curve.back();
  if (last.fpr < fpr_max) area += (fpr_max - last.fpr) * last.tpr;
  return area / fpr_max;
}

double recall_track(std::span<const Tube> tubes, std::span<const GroundTruthTube> ground_truth, double sigma) {
  if (ground_truth.empty()) return 0.0;
  std::unordered_map<std::string, std::vector<const Tube*>> by_video;
  for (const auto& t : tubes) by_video[t.video_id].push_back(&t);
  std::size_t covered = 0;
  for (const auto& g : ground_truth) {
    auto it = by_video.find(g.video_id);
    if (it == by_video.end()) continue;
    const bool hit = std::any_of(it->second.begin(), it->second.end(), [&](const Tube* t) {
      return t->label && *t->label == g.label && st_iou(*t, g) >= sigma;
    });
    if (hit) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(ground_truth.size());
}

FalseTaxonomy false_taxonomy(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth,
                             double sigma, double false_neg_floor) {
  const MatchResult m = match_tubes(predictions, ground_truth, sigma);
  std::vector<std::string> pk, gk;
  for (const auto& p : predictions) pk.push_back(p.video_id);
  for (const auto& g : ground_truth) gk.push_back(g.video_id);
  return taxonomy_from(m, ground_truth.size(), pk, gk, sigma, false_neg_floor,
                       [&](std::size_t i, std::size_t j) { return st_iou(predictions[i], ground_truth[j]); });
}

FalseTaxonomy false_taxonomy(std::span<const FramePrediction> predictions,
                             std::span<const FrameGroundTruth> ground_truth, double sigma, double false_neg_floor) {
  const MatchResult m = match_frames(predictions, ground_truth, sigma);
  std::vector<std::string> pk, gk;
  for (const auto& p : predictions) pk.push_back(frame_key(p.video_id, p.frame_index));
  for (const auto& g : ground_truth) gk.push_back(frame_key(g.video_id, g.frame_index));
  return taxonomy_from(m, ground_truth.size(), pk, gk, sigma, false_neg_floor,
                       [&](std::size_t i, std::size_t j) { return iou(predictions[i].box, ground_truth[j].box); });
}

std::vector<FramePrediction> frame_predictions(std::span<const Tube> tubes) {
  std::vector<FramePrediction> out;
  for (const auto& t : tubes) {
    const int label = tube_label(t);
    const double score = tube_score(t);
    for (const auto& e : t.entries) out.push_back({t.video_id, e.frame_index, e.box, label, score});
  }
  return out;
}

std::vector<FrameGroundTruth> frame_ground_truth(std::span<const GroundTruthTube> tubes) {
  std::vector<FrameGroundTruth> out;
  for (const auto& t : tubes) {
    for (const auto& e : t.entries) out.push_back({t.video_id, e.frame_index, e.box, t.label});
  }
  return out;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ConfigError("evaluation.iou_thresholds must not be empty");
  for (double s : iou_thresholds) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("evaluation.iou_thresholds must lie in (0, 1]");
  }
  if (!(fpr_max > 0.0 && fpr_max <= 1.0)) throw ConfigError("evaluation.fpr_max must lie in (0, 1]");
  for (double v : {recall_track_iou, taxonomy_iou, false_neg_floor}) {
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError("evaluation overlap thresholds must lie in (0, 1]");
  }
}

const ThresholdResult& EvalReport::at(double sigma) const {
  for (const auto& t : thresholds) {
    if (std::abs(t.sigma - sigma) < 1e-12) return t;
  }
  throw ProcessingError("evaluation report has no results at IOU threshold " + std::to_string(sigma));
}

namespace {

nlohmann::json taxonomy_json(const FalseTaxonomy& t) {
  return {{"predictions", t.predictions}, {"true_positive", t.true_positive}, {"false_cls", t.false_cls},
          {"false_bbox", t.false_bbox},   {"false_neg", t.false_neg},         {"ground_truth", t.ground_truth}};
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "tubekit.report";
  j["version"] = 1;
  j["num_classes"] = num_classes;
  j["recall_track"] = recall_track;
  j["false_detections"] = {{"video", taxonomy_json(video_taxonomy)}, {"frame", taxonomy_json(frame_taxonomy)}};
  auto& rows = j["thresholds"] = nlohmann::json::array();
  for (const auto& t : thresholds) {
    rows.push_back({{"sigma", t.sigma},
                    {"video_map", t.video.mean},
                    {"video_ap", t.video.ap},
                    {"frame_map", t.frame.mean},
                    {"frame_ap", t.frame.ap},
                    {"auc", t.auc},
                    {"gt_per_class", t.video.gt}});
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[64];
  out << "metric        ";
  for (const auto& t : thresholds) {
    std::snprintf(buf, sizeof buf, " sigma=%-5.2f", t.sigma);
    out << buf;
  }
  out << "\n";
  auto row = [&](const char* name, auto value) {
    std::snprintf(buf, sizeof buf, "%-14s", name);
    out << buf;
    for (const auto& t : thresholds) {
      std::snprintf(buf, sizeof buf, " %10.1f%%", 100.0 * value(t));
      out << buf;
    }
    out << "\n";
  };
  row("video-mAP", [](const ThresholdResult& t) { return t.video.mean; });
  row("frame-mAP", [](const ThresholdResult& t) { return t.frame.mean; });
  row("AUC", [](const ThresholdResult& t) { return t.auc; });
  std::snprintf(buf, sizeof buf, "recall-track  %10.1f%%\n", 100.0 * recall_track);
  out << buf;
  auto tax = [&](const char* level, const FalseTaxonomy& t) {
    out << "false detections (" << level << "): cls=" << t.false_cls << " bbox=" << t.false_bbox
        << " neg=" << t.false_neg << " (tp=" << t.true_positive << " of " << t.predictions << " predictions, "
        << t.ground_truth << " ground truth)\n";
  };
  tax("video", video_taxonomy);
  tax("frame", frame_taxonomy);
  return out.str();
}

EvalReport evaluate(std::span<const Tube> predictions, std::span<const GroundTruthTube> ground_truth, int num_classes,
                    const EvalConfig& config) {
  config.validate();
  EvalReport report;
  report.num_classes = num_classes;
  const auto frame_preds = frame_predictions(predictions);
  const auto frame_gt = frame_ground_truth(ground_truth);
  for (double sigma : config.iou_thresholds) {
    ThresholdResult r;
    r.sigma = sigma;
    const MatchResult video = match_tubes(predictions, ground_truth, sigma);
    r.video = class_average_precision(video, num_classes);
    r.frame = class_average_precision(match_frames(frame_preds, frame_gt, sigma), num_classes);
    r.auc = roc_auc(roc_curve(video, ground_truth.size(), config.score_grid), config.fpr_max);
    report.thresholds.push_back(std::move(r));
  }
  report.recall_track = recall_track(predictions, ground_truth, config.recall_track_iou);
  report.video_taxonomy = false_taxonomy(predictions, ground_truth, config.taxonomy_iou, config.false_neg_floor);
  report.frame_taxonomy = false_taxonomy(frame_preds, frame_gt, config.taxonomy_iou, config.false_neg_floor);
  return report;
}

}  // namespace tubekit
