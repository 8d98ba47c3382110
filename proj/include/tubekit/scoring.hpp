#pragma once

#include <span>
#include <vector>

#include "tubekit/core.hpp"

namespace tubekit {

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}
  static Matrix identity(int n, double scale = 1.0);

  double& operator()(int r, int c) { return data[index(r, c)]; }
  double operator()(int r, int c) const { return data[index(r, c)]; }

  /// this * v, accumulated left to right per row.
  std::vector<double> apply(std::span<const double> v) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
  }
};

enum class Activation { kTanh, kRelu, kLogistic };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);
double activate(Activation a, double v);

/// Weights of the recurrent clip scorer:
///   y_t = act(W_io x_t + W_hh y_{t-1} + b_y),  y_0 = 0
///   p_t = softmax(W_cls y_t + b_cls)
/// The classifier may have more rows than there are action classes; any
/// trailing rows act as non-action outputs and are ignored when fusing.
struct RecurrentScorerWeights {
  Matrix input_to_output;   // d_out x d_in
  Matrix hidden_to_hidden;  // d_out x d_out
  std::vector<double> bias;
  Activation activation = Activation::kTanh;
  Matrix classifier;  // n_outputs x d_out
  std::vector<double> classifier_bias;

  int input_dim() const { return input_to_output.cols; }
  int hidden_dim() const { return input_to_output.rows; }
  int output_dim() const { return classifier.rows; }

  /// Throws InputError on incompatible dimensions.
  void validate() const;

  friend bool operator==(const RecurrentScorerWeights&, const RecurrentScorerWeights&) = default;
};

std::vector<double> softmax(std::span<const double> logits);

/// Splits the tube's extent into consecutive clip_length windows. A short
/// final window survives if it has at least clip_length / 2 frames,
/// otherwise it is folded into the previous window.
std::vector<FrameInterval> slice_clips(const FrameInterval& extent, int clip_length);
inline std::vector<FrameInterval> slice_clips(const Tube& tube, int clip_length) {
  return slice_clips(tube.extent(), clip_length);
}

/// Hidden outputs y_1..y_T of the recurrence.
std::vector<std::vector<double>> recurrent_states(std::span<const std::vector<double>> features,
                                                  const RecurrentScorerWeights& weights);

/// Non-recurrent output act(W_io x + b_y) for one clip.
std::vector<double> feed_forward_output(std::span<const double> x, const RecurrentScorerWeights& weights);

/// Class distribution for one hidden output.
std::vector<double> classify(std::span<const double> y, const RecurrentScorerWeights& weights);

ClipScoreSequence recurrent_forward(std::span<const std::vector<double>> features,
                                    const RecurrentScorerWeights& weights, int clip_length = 16);

enum class ScoreFusion { kAdd, kMultiply };

struct TubeScore {
  std::vector<double> frame_mean;  // S_avg-cnn
  std::vector<double> clip_mean;   // S_avg-rnn
  std::vector<double> combined;    // S_traj
  int label = 0;
  double score = 0.0;

  friend bool operator==(const TubeScore&, const TubeScore&) = default;
};

/// Fuses the mean frame-level class scores with the mean clip scores
/// (first num_classes outputs of each clip vector). Label is the argmax,
/// lowest class index on ties.
TubeScore score_tube(const Tube& tube, const ClipScoreSequence& clip_scores,
                     ScoreFusion fusion = ScoreFusion::kAdd);

struct ScoredTube {
  Tube tube;
  TubeScore score;

  friend bool operator==(const ScoredTube&, const ScoredTube&) = default;
};

/// Greedy class-agnostic pruning: in descending score order, a tube is
/// dropped when its st_iou with an already kept tube exceeds st_threshold.
std::vector<ScoredTube> prune_overlapped(std::vector<ScoredTube> tubes, double st_threshold);

}  // namespace tubekit
