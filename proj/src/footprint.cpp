#include "tubekit/footprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "tubekit/error.hpp"
#include "tubekit/rng.hpp"

namespace tubekit {

std::span<const double> FeatureGridSequence::descriptor(int clip, int row, int col) const {
  const auto s = static_cast<std::size_t>(spatial_size);
  const auto offset = ((static_cast<std::size_t>(clip) * s + static_cast<std::size_t>(row)) * s +
                       static_cast<std::size_t>(col)) * static_cast<std::size_t>(depth);
  return {values.data() + offset, static_cast<std::size_t>(depth)};
}

void FeatureGridSequence::validate() const {
  if (spatial_size <= 0 || depth <= 0 || clips <= 0) throw InputError("feature grid: non-positive shape");
  const auto expected = static_cast<std::size_t>(spatial_size) * static_cast<std::size_t>(spatial_size) *
                        static_cast<std::size_t>(depth) * static_cast<std::size_t>(clips);
  if (values.size() != expected) {
    throw InputError("feature grid: " + std::to_string(values.size()) + " values, expected " + std::to_string(expected));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("feature grid: non-finite value");
  }
}

void CellLayout::validate() const {
  if (spatial_size <= 0 || cell_side <= 0 || spatial_size % cell_side != 0) {
    throw ConfigError("cell layout: cell side " + std::to_string(cell_side) + " does not tile grid size " +
                      std::to_string(spatial_size));
  }
}

void GaussianMixture::validate() const {
  const auto k = weights.size();
  if (k == 0 || means.size() != k || variances.size() != k) throw InputError("gmm: inconsistent component count");
  const auto d = means.front().size();
  if (d == 0) throw InputError("gmm: zero dimension");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(weights[i] > 0.0)) throw InputError("gmm: component weights must be positive");
    total += weights[i];
    if (means[i].size() != d || variances[i].size() != d) throw InputError("gmm: inconsistent dimensions");
    for (double v : variances[i]) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError("gmm: variances must be positive");
    }
  }
  if (std::abs(total - 1.0) > 1e-6) throw InputError("gmm: weights must sum to 1");
}

namespace {

double log_gaussian(std::span<const double> x, const std::vector<double>& mean, const std::vector<double>& var) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - mean[i];
    acc += std::log(2.0 * std::numbers::pi * var[i]) + diff * diff / var[i];
  }
  return -0.5 * acc;
}

// Fills `resp` with posteriors and returns log p(x).
double responsibilities(std::span<const double> x, const GaussianMixture& gmm, std::vector<double>& resp) {
  const int k = gmm.components();
  resp.resize(static_cast<std::size_t>(k));
  double peak = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    resp[ci] = std::log(gmm.weights[ci]) + log_gaussian(x, gmm.means[ci], gmm.variances[ci]);
    peak = std::max(peak, resp[ci]);
  }
  double sum = 0.0;
  for (double& r : resp) {
    r = std::exp(r - peak);
    sum += r;
  }
  for (double& r : resp) r /= sum;
  return peak + std::log(sum);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

}  // namespace

std::vector<double> posteriors(std::span<const double> x, const GaussianMixture& gmm) {
  std::vector<double> resp;
  responsibilities(x, gmm, resp);
  return resp;
}

GaussianMixture fit_gmm(std::span<const std::vector<double>> descriptors, int components, const EmOptions& options) {
  if (descriptors.empty()) throw InputError("fit_gmm: no descriptors");
  if (components < 1) throw InputError("fit_gmm: need at least one component");
  const std::size_t n = descriptors.size();
  const std::size_t d = descriptors.front().size();
  const auto k = static_cast<std::size_t>(components);
  for (const auto& x : descriptors) {
    if (x.size() != d) throw InputError("fit_gmm: descriptors of mixed dimension");
  }

  std::vector<double> global_mean(d, 0.0);
  std::vector<double> global_var(d, 0.0);
  for (const auto& x : descriptors) {
    for (std::size_t i = 0; i < d; ++i) global_mean[i] += x[i];
  }
  for (double& m : global_mean) m /= static_cast<double>(n);
  for (const auto& x : descriptors) {
    for (std::size_t i = 0; i < d; ++i) global_var[i] += (x[i] - global_mean[i]) * (x[i] - global_mean[i]);
  }
  for (double& v : global_var) v = std::max(v / static_cast<double>(n), options.variance_floor);

  GaussianMixture gmm;
  gmm.weights.assign(k, 1.0 / static_cast<double>(k));
  gmm.variances.assign(k, global_var);
  Rng rng(derive_seed(options.seed, {0x676d6dULL}));
  gmm.means.push_back(descriptors[rng.below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (gmm.means.size() < k) {
    std::size_t far = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(descriptors[i], gmm.means.back()));
      if (nearest[i] > nearest[far]) far = i;
    }
    gmm.means.push_back(descriptors[far]);
  }

  std::vector<std::vector<double>> resp(n);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) loglik += responsibilities(descriptors[i], gmm, resp[i]);
    loglik /= static_cast<double>(n);

    for (std::size_t c = 0; c < k; ++c) {
      double mass = 0.0;
      std::vector<double> mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        mass += resp[i][c];
        for (std::size_t j = 0; j < d; ++j) mean[j] += resp[i][c] * descriptors[i][j];
      }
      if (mass < 1e-10) continue;  // starved component keeps its parameters
      for (double& m : mean) m /= mass;
      std::vector<double> var(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = descriptors[i][j] - mean[j];
          var[j] += resp[i][c] * diff * diff;
        }
      }
      for (double& v : var) v = std::max(v / mass, options.variance_floor);
      gmm.weights[c] = mass / static_cast<double>(n);
      gmm.means[c] = std::move(mean);
      gmm.variances[c] = std::move(var);
    }
    double total = 0.0;
    for (double& w : gmm.weights) {
      w = std::max(w, 1e-12);
      total += w;
    }
    for (double& w : gmm.weights) w /= total;

    if (std::abs(loglik - previous) < options.tolerance) break;
    previous = loglik;
  }
  return gmm;
}

std::vector<double> fisher_vector(std::span<const std::vector<double>> descriptors, const GaussianMixture& gmm) {
  if (descriptors.empty()) throw InputError("fisher_vector: empty descriptor set");
  gmm.validate();
  const auto k = static_cast<std::size_t>(gmm.components());
  const auto d = static_cast<std::size_t>(gmm.dim());
  std::vector<double> fv(2 * k * d, 0.0);
  std::vector<double> resp;
  for (const auto& x : descriptors) {
    if (x.size() != d) {
      throw InputError("fisher_vector: descriptor has " + std::to_string(x.size()) + " dims, codebook has " +
                       std::to_string(d));
    }
    responsibilities(x, gmm, resp);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        const double z = (x[j] - gmm.means[c][j]) / std::sqrt(gmm.variances[c][j]);
        fv[c * d + j] += resp[c] * z;
        fv[k * d + c * d + j] += resp[c] * (z * z - 1.0);
      }
    }
  }
  const auto n = static_cast<double>(descriptors.size());
  for (std::size_t c = 0; c < k; ++c) {
    const double mean_scale = 1.0 / (n * std::sqrt(gmm.weights[c]));
    const double var_scale = 1.0 / (n * std::sqrt(2.0 * gmm.weights[c]));
    for (std::size_t j = 0; j < d; ++j) {
      fv[c * d + j] *= mean_scale;
      fv[k * d + c * d + j] *= var_scale;
    }
  }
  double norm = 0.0;
  for (double& v : fv) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm += v * v;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : fv) v /= norm;
  }
  return fv;
}

std::vector<std::vector<double>> aggregate_cells(const FeatureGridSequence& features, const CellLayout& layout,
                                                 const GaussianMixture& gmm) {
  features.validate();
  layout.validate();
  if (features.spatial_size != layout.spatial_size) {
    throw InputError("aggregate_cells: feature grid size " + std::to_string(features.spatial_size) +
                     " does not match layout size " + std::to_string(layout.spatial_size));
  }
  const int side = layout.cells_per_side();
  std::vector<std::vector<double>> cells;
  cells.reserve(static_cast<std::size_t>(layout.cell_count()));
  std::vector<std::vector<double>> members;
  for (int cr = 0; cr < side; ++cr) {
    for (int cc = 0; cc < side; ++cc) {
      members.clear();
      for (int t = 0; t < features.clips; ++t) {
        for (int r = cr * layout.cell_side; r < (cr + 1) * layout.cell_side; ++r) {
          for (int c = cc * layout.cell_side; c < (cc + 1) * layout.cell_side; ++c) {
            auto z = features.descriptor(t, r, c);
            members.emplace_back(z.begin(), z.end());
          }
        }
      }
      cells.push_back(fisher_vector(members, gmm));
    }
  }
  return cells;
}

FootprintMap build_footprint_map(const std::vector<std::vector<double>>& cell_accuracies, const CellLayout& layout) {
  layout.validate();
  FootprintMap map;
  map.layout = layout;
  map.accuracy = cell_accuracies;
  for (const auto& alpha : cell_accuracies) {
    if (static_cast<int>(alpha.size()) != layout.cell_count()) {
      throw InputError("footprint map: " + std::to_string(alpha.size()) + " cell accuracies, layout has " +
                       std::to_string(layout.cell_count()) + " cells");
    }
    for (double a : alpha) {
      if (!(a >= 0.0 && a <= 1.0)) throw InputError("footprint map: cell accuracy outside [0, 1]");
    }
    map.factors.push_back(softmax(alpha));
  }
  return map;
}

std::vector<std::vector<double>> nearest_centroid_accuracy(std::span<const CellSample> train,
                                                           std::span<const CellSample> test, int num_classes) {
  if (train.empty()) throw InputError("nearest_centroid_accuracy: empty training set");
  const std::size_t cells = train.front().cells.size();
  const auto classes = static_cast<std::size_t>(num_classes);
  std::vector<std::vector<double>> accuracy(classes, std::vector<double>(cells, 0.0));
  std::vector<double> test_count(classes, 0.0);
  for (const auto& s : test) test_count.at(static_cast<std::size_t>(s.label)) += 1.0;

  for (std::size_t j = 0; j < cells; ++j) {
    std::vector<std::vector<double>> centroid(classes);
    std::vector<double> count(classes, 0.0);
    for (const auto& s : train) {
      const auto& v = s.cells.at(j);
      auto& c = centroid.at(static_cast<std::size_t>(s.label));
      if (c.empty()) c.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) c[i] += v[i];
      count[static_cast<std::size_t>(s.label)] += 1.0;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      for (double& v : centroid[c]) v /= count[c];
    }
    for (const auto& s : test) {
      const auto& v = s.cells.at(j);
      int best = -1;
      double best_d = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        if (centroid[c].empty()) continue;
        const double dist = squared_distance(v, centroid[c]);
        if (best < 0 || dist < best_d) {
          best = static_cast<int>(c);
          best_d = dist;
        }
      }
      if (best == s.label) accuracy[static_cast<std::size_t>(s.label)][j] += 1.0;
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (test_count[c] == 0.0) continue;
    for (double& a : accuracy[c]) a /= test_count[c];
  }
  return accuracy;
}

namespace {

void mark_cells(const BoundingBox& box, const CellLayout& layout, double frame_width, double frame_height,
                std::vector<bool>& marked) {
  const int side = layout.cells_per_side();
  const double x0 = box.x_min / frame_width * side;
  const double x1 = box.x_max / frame_width * side;
  const double y0 = box.y_min / frame_height * side;
  const double y1 = box.y_max / frame_height * side;
  for (int r = 0; r < side; ++r) {
    if (!(y1 > r && y0 < r + 1)) continue;
    for (int c = 0; c < side; ++c) {
      if (x1 > c && x0 < c + 1) marked[static_cast<std::size_t>(r * side + c)] = true;
    }
  }
}

}  // namespace

std::vector<int> projected_cells(const Tube& tube, const CellLayout& layout, double frame_width, double frame_height,
                                 Projection mode) {
  std::vector<bool> marked(static_cast<std::size_t>(layout.cell_count()), false);
  if (tube.entries.empty()) return {};
  if (mode == Projection::kMeanBox) {
    BoundingBox mean{0.0, 0.0, 0.0, 0.0};
    for (const auto& e : tube.entries) {
      mean.x_min += e.box.x_min;
      mean.y_min += e.box.y_min;
      mean.x_max += e.box.x_max;
      mean.y_max += e.box.y_max;
    }
    const auto n = static_cast<double>(tube.entries.size());
    mean = {mean.x_min / n, mean.y_min / n, mean.x_max / n, mean.y_max / n};
    mark_cells(mean, layout, frame_width, frame_height, marked);
  } else {
    for (const auto& e : tube.entries) mark_cells(e.box, layout, frame_width, frame_height, marked);
  }
  std::vector<int> cells;
  for (std::size_t i = 0; i < marked.size(); ++i) {
    if (marked[i]) cells.push_back(static_cast<int>(i));
  }
  return cells;
}

FootprintVerdict footprint_verdict(const Tube& tube, int label, const FootprintMap& map, double frame_width,
                                   double frame_height, Projection mode) {
  if (label < 0 || label >= map.num_classes()) {
    throw InputError("footprint: tube label " + std::to_string(label) + " has no footprint map");
  }
  const auto& w = map.factors[static_cast<std::size_t>(label)];
  FootprintVerdict v;
  for (double f : w) v.map_mean += f;
  v.map_mean /= static_cast<double>(w.size());
  const auto cells = projected_cells(tube, map.layout, frame_width, frame_height, mode);
  if (cells.empty()) return v;
  for (int c : cells) v.projected += w[static_cast<std::size_t>(c)];
  v.projected /= static_cast<double>(cells.size());
  // Both averages of a uniform map are the same number up to summation
  // rounding; only a real shortfall counts as drift.
  v.keep = !(v.projected < v.map_mean * (1.0 - 1e-12));
  return v;
}

std::vector<ScoredTube> prune_drifted(std::vector<ScoredTube> tubes, const FootprintMap& map, double frame_width,
                                      double frame_height, Projection mode) {
  std::vector<ScoredTube> kept;
  for (auto& t : tubes) {
    if (footprint_verdict(t.tube, t.score.label, map, frame_width, frame_height, mode).keep) kept.push_back(std::move(t));
  }
  return kept;
}

}  // namespace tubekit
