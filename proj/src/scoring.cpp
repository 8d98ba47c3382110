#include "tubekit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tubekit/error.hpp"

namespace tubekit {

Matrix Matrix::identity(int n, double scale) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

std::vector<double> Matrix::apply(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != cols) {
    throw InputError("matrix-vector product: vector has " + std::to_string(v.size()) + " entries, matrix has " +
                     std::to_string(cols) + " columns");
  }
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += (*this)(r, c) * v[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLogistic: return "logistic";
  }
  return "tanh";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "logistic") return Activation::kLogistic;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double v) {
  switch (a) {
    case Activation::kTanh: return std::tanh(v);
    case Activation::kRelu: return v > 0.0 ? v : 0.0;
    case Activation::kLogistic: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

void RecurrentScorerWeights::validate() const {
  auto shape_ok = [](const Matrix& m) {
    return m.rows > 0 && m.cols > 0 && m.data.size() == static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols);
  };
  if (!shape_ok(input_to_output)) throw InputError("scorer weights: W_io is empty or malformed");
  if (!shape_ok(hidden_to_hidden) || hidden_to_hidden.rows != hidden_dim() || hidden_to_hidden.cols != hidden_dim()) {
    throw InputError("scorer weights: W_hh must be " + std::to_string(hidden_dim()) + "x" + std::to_string(hidden_dim()));
  }
  if (static_cast<int>(bias.size()) != hidden_dim()) throw InputError("scorer weights: b_y has wrong length");
  if (!shape_ok(classifier) || classifier.cols != hidden_dim()) {
    throw InputError("scorer weights: classifier must have " + std::to_string(hidden_dim()) + " columns");
  }
  if (static_cast<int>(classifier_bias.size()) != classifier.rows) {
    throw InputError("scorer weights: classifier bias has wrong length");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<FrameInterval> slice_clips(const FrameInterval& extent, int clip_length) {
  if (clip_length < 1) throw InputError("slice_clips: clip length must be >= 1");
  std::vector<FrameInterval> clips;
  if (extent.length() <= 0) return clips;
  for (int start = extent.start; start < extent.end; start += clip_length) {
    clips.push_back({start, std::min(start + clip_length, extent.end)});
  }
  if (clips.size() > 1 && 2 * clips.back().length() < clip_length) {
    const int end = clips.back().end;
    clips.pop_back();
    clips.back().end = end;
  }
  return clips;
}

std::vector<double> feed_forward_output(std::span<const double> x, const RecurrentScorerWeights& weights) {
  std::vector<double> pre = weights.input_to_output.apply(x);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = activate(weights.activation, pre[i] + weights.bias[i]);
  return pre;
}

std::vector<std::vector<double>> recurrent_states(std::span<const std::vector<double>> features,
                                                  const RecurrentScorerWeights& weights) {
  weights.validate();
  std::vector<std::vector<double>> states;
  states.reserve(features.size());
  std::vector<double> prev(static_cast<std::size_t>(weights.hidden_dim()), 0.0);
  for (const auto& x : features) {
    if (static_cast<int>(x.size()) != weights.input_dim()) {
      throw InputError("recurrent scorer: feature has " + std::to_string(x.size()) + " dims, expected " +
                       std::to_string(weights.input_dim()));
    }
    std::vector<double> pre = weights.input_to_output.apply(x);
    const std::vector<double> rec = weights.hidden_to_hidden.apply(prev);
    for (std::size_t i = 0; i < pre.size(); ++i) {
      pre[i] = activate(weights.activation, (pre[i] + rec[i]) + weights.bias[i]);
    }
    prev = pre;
    states.push_back(std::move(pre));
  }
  return states;
}

std::vector<double> classify(std::span<const double> y, const RecurrentScorerWeights& weights) {
  std::vector<double> logits = weights.classifier.apply(y);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += weights.classifier_bias[i];
  return softmax(logits);
}

ClipScoreSequence recurrent_forward(std::span<const std::vector<double>> features,
                                    const RecurrentScorerWeights& weights, int clip_length) {
  ClipScoreSequence out;
  out.clip_length = clip_length;
  for (const auto& y : recurrent_states(features, weights)) out.scores.push_back(classify(y, weights));
  return out;
}

TubeScore score_tube(const Tube& tube, const ClipScoreSequence& clip_scores, ScoreFusion fusion) {
  if (tube.entries.empty()) throw InputError("score_tube: empty tube");
  if (clip_scores.scores.empty()) throw InputError("score_tube: no clip scores");
  const std::size_t classes = tube.entries.front().class_scores.size();
  TubeScore s;
  s.frame_mean.assign(classes, 0.0);
  s.clip_mean.assign(classes, 0.0);
  for (const auto& e : tube.entries) {
    if (e.class_scores.size() != classes) throw InputError("score_tube: inconsistent class score lengths");
    for (std::size_t c = 0; c < classes; ++c) s.frame_mean[c] += e.class_scores[c];
  }
  for (const auto& clip : clip_scores.scores) {
    if (clip.size() < classes) throw InputError("score_tube: clip score vector shorter than class count");
    for (std::size_t c = 0; c < classes; ++c) s.clip_mean[c] += clip[c];
  }
  const auto n_entries = static_cast<double>(tube.entries.size());
  const auto n_clips = static_cast<double>(clip_scores.scores.size());
  s.combined.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    s.frame_mean[c] /= n_entries;
    s.clip_mean[c] /= n_clips;
    s.combined[c] = fusion == ScoreFusion::kAdd ? s.frame_mean[c] + s.clip_mean[c] : s.frame_mean[c] * s.clip_mean[c];
  }
  s.label = static_cast<int>(std::max_element(s.combined.begin(), s.combined.end()) - s.combined.begin());
  s.score = s.combined[static_cast<std::size_t>(s.label)];
  return s;
}

std::vector<ScoredTube> prune_overlapped(std::vector<ScoredTube> tubes, double st_threshold) {
  std::stable_sort(tubes.begin(), tubes.end(),
                   [](const ScoredTube& a, const ScoredTube& b) { return a.score.score > b.score.score; });
  std::vector<ScoredTube> kept;
  for (auto& candidate : tubes) {
    const bool overlapped = std::any_of(kept.begin(), kept.end(), [&](const ScoredTube& k) {
      return st_iou(k.tube, candidate.tube) > st_threshold;
    });
    if (!overlapped) kept.push_back(std::move(candidate));
  }
  return kept;
}

}  // namespace tubekit
