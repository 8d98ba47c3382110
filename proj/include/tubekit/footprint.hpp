#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tubekit/core.hpp"
#include "tubekit/scoring.hpp"

namespace tubekit {

/// Per-clip s x s grids of d-dimensional descriptors for one tube.
struct FeatureGridSequence {
  int spatial_size = 14;
  int depth = 0;
  int clips = 0;
  std::vector<double> values;  // [clip][row][col][depth]

  std::span<const double> descriptor(int clip, int row, int col) const;
  void validate() const;

  friend bool operator==(const FeatureGridSequence&, const FeatureGridSequence&) = default;
};

/// Square cells of cell_side x cell_side grid positions tiling an s x s grid.
struct CellLayout {
  int spatial_size = 14;
  int cell_side = 2;

  int cells_per_side() const { return spatial_size / cell_side; }
  int cell_count() const { return cells_per_side() * cells_per_side(); }
  void validate() const;

  friend bool operator==(const CellLayout&, const CellLayout&) = default;
};

/// Diagonal-covariance mixture used as the Fisher vector codebook.
struct GaussianMixture {
  std::vector<double> weights;                // K
  std::vector<std::vector<double>> means;     // K x d
  std::vector<std::vector<double>> variances; // K x d

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  void validate() const;

  friend bool operator==(const GaussianMixture&, const GaussianMixture&) = default;
};

struct EmOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // on the change of mean log-likelihood
  std::uint64_t seed = 0;
  double variance_floor = 1e-6;
};

/// Expectation-maximization for a diagonal GMM. Means start from seeded
/// farthest-point sampling.
GaussianMixture fit_gmm(std::span<const std::vector<double>> descriptors, int components, const EmOptions& options = {});

/// Posterior responsibilities of each component for x.
std::vector<double> posteriors(std::span<const double> x, const GaussianMixture& gmm);

/// Improved Fisher vector: mean and variance gradient blocks (K*d each,
/// mean block first), averaged over descriptors and normalized by the
/// component weights, then signed square root and L2 normalization.
std::vector<double> fisher_vector(std::span<const std::vector<double>> descriptors, const GaussianMixture& gmm);

/// One Fisher vector per cell over every descriptor in the cell across all clips.
std::vector<std::vector<double>> aggregate_cells(const FeatureGridSequence& features, const CellLayout& layout,
                                                 const GaussianMixture& gmm);

struct FootprintMap {
  CellLayout layout;
  std::vector<std::vector<double>> accuracy;  // per class, per cell (alpha)
  std::vector<std::vector<double>> factors;   // per class, per cell (w = softmax(alpha))

  int num_classes() const { return static_cast<int>(factors.size()); }
};

FootprintMap build_footprint_map(const std::vector<std::vector<double>>& cell_accuracies, const CellLayout& layout);

/// Labeled cell vectors of one tube, used to estimate per-cell accuracies.
struct CellSample {
  std::vector<std::vector<double>> cells;
  int label = 0;
};

/// Per-class accuracy of a nearest-centroid classifier trained and tested
/// independently on each cell. Classes without test samples get accuracy 0.
std::vector<std::vector<double>> nearest_centroid_accuracy(std::span<const CellSample> train,
                                                           std::span<const CellSample> test, int num_classes);

enum class Projection { kMeanBox, kUnion };

/// Map cells (row-major indices) touched by the tube's projection.
std::vector<int> projected_cells(const Tube& tube, const CellLayout& layout, double frame_width, double frame_height,
                                 Projection mode = Projection::kMeanBox);

struct FootprintVerdict {
  double projected = 0.0;  // S_proj
  double map_mean = 0.0;   // S_map
  bool keep = false;
};

FootprintVerdict footprint_verdict(const Tube& tube, int label, const FootprintMap& map, double frame_width,
                                   double frame_height, Projection mode = Projection::kMeanBox);

/// Removes tubes whose average footprint factor over their projection is
/// below the map average for their label.
std::vector<ScoredTube> prune_drifted(std::vector<ScoredTube> tubes, const FootprintMap& map, double frame_width,
                                      double frame_height, Projection mode = Projection::kMeanBox);

}  // namespace tubekit
