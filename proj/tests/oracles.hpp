#pragma once

// Reference implementations used only by tests. Each one computes its
// quantity by brute force from the definition, independently of the
// library code it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include "tubekit/core.hpp"
#include "tubekit/footprint.hpp"
#include "tubekit/scoring.hpp"

namespace oracle {

using tubekit::BoundingBox;

/// Unit pixels [i,i+1) x [j,j+1) covered by an integer-cornered box.
inline std::set<std::pair<int, int>> pixels(const BoundingBox& b) {
  std::set<std::pair<int, int>> out;
  for (int i = static_cast<int>(b.x_min); i < static_cast<int>(b.x_max); ++i) {
    for (int j = static_cast<int>(b.y_min); j < static_cast<int>(b.y_max); ++j) out.insert({i, j});
  }
  return out;
}

/// IOU by counting pixels; boxes must have integer corners.
inline double grid_iou(const BoundingBox& a, const BoundingBox& b) {
  const auto pa = pixels(a), pb = pixels(b);
  std::size_t inter = 0;
  for (const auto& p : pa) inter += pb.count(p);
  const std::size_t uni = pa.size() + pb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Temporal IOU by enumerating frame sets.
inline double frame_set_iou(const tubekit::FrameInterval& a, const tubekit::FrameInterval& b) {
  std::set<int> fa, fb, all;
  for (int f = a.start; f < a.end; ++f) fa.insert(f);
  for (int f = b.start; f < b.end; ++f) fb.insert(f);
  std::size_t inter = 0;
  for (int f : fa) inter += fb.count(f);
  all.insert(fa.begin(), fa.end());
  all.insert(fb.begin(), fb.end());
  return all.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(all.size());
}

/// Spatio-temporal IOU from the frame-set and pixel oracles.
template <typename A, typename B>
double grid_st_iou(const A& a, const B& b) {
  std::map<int, BoundingBox> ba, bb;
  for (const auto& e : a.entries) ba[e.frame_index] = e.box;
  for (const auto& e : b.entries) bb[e.frame_index] = e.box;
  std::size_t inter = 0;
  double sum = 0.0;
  std::set<int> all;
  for (const auto& [f, box] : ba) {
    all.insert(f);
    if (auto it = bb.find(f); it != bb.end()) {
      ++inter;
      sum += grid_iou(box, it->second);
    }
  }
  for (const auto& [f, box] : bb) all.insert(f);
  if (inter == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(all.size()) * (sum / static_cast<double>(inter));
}

/// Rank order used by the NMS oracle: score, then larger area, then the
/// lexicographically smaller box, then input position.
inline bool outranks(const std::vector<tubekit::Detection>& d, std::size_t i, std::size_t j, int cls) {
  const auto& a = d[i];
  const auto& b = d[j];
  if (a.score(cls) != b.score(cls)) return a.score(cls) > b.score(cls);
  if (a.box.area() != b.box.area()) return a.box.area() > b.box.area();
  if (a.box != b.box) {
    return std::tie(a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max) <
           std::tie(b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max);
  }
  return i < j;
}

/// Exhaustive suppression: the kept set S is the unique subset in which a
/// detection belongs to S exactly when no higher-ranked member of S
/// overlaps it by more than the threshold. Returns every subset (as bit
/// masks) that satisfies the condition; a correct greedy NMS yields the
/// single one.
inline std::vector<unsigned> nms_fixed_points(const std::vector<tubekit::Detection>& d, int cls, double threshold) {
  const auto n = static_cast<unsigned>(d.size());
  std::vector<unsigned> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (unsigned i = 0; i < n && ok; ++i) {
      bool suppressed = false;
      for (unsigned j = 0; j < n; ++j) {
        if (j != i && (mask >> j & 1u) && outranks(d, j, i, cls) && grid_iou(d[j].box, d[i].box) > threshold) {
          suppressed = true;
        }
      }
      ok = ((mask >> i & 1u) != 0) == !suppressed;
    }
    if (ok) out.push_back(mask);
  }
  return out;
}

/// Recurrent scorer forward pass written out element by element.
inline std::vector<std::vector<double>> recurrence(const std::vector<std::vector<double>>& x,
                                                   const tubekit::RecurrentScorerWeights& w) {
  const int h = w.input_to_output.rows;
  std::vector<double> y(static_cast<std::size_t>(h), 0.0);
  std::vector<std::vector<double>> out;
  for (const auto& xt : x) {
    std::vector<double> next(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i) {
      double a = 0.0;
      for (int j = 0; j < w.input_to_output.cols; ++j) a += w.input_to_output(i, j) * xt[static_cast<std::size_t>(j)];
      double r = 0.0;
      for (int j = 0; j < h; ++j) r += w.hidden_to_hidden(i, j) * y[static_cast<std::size_t>(j)];
      const double z = a + r + w.bias[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(i)] = tubekit::activate(w.activation, z);
    }
    y = next;
    out.push_back(y);
  }
  return out;
}

/// Fisher vector from the textbook formulas: Gaussian densities, normalized
/// posteriors, mean and variance gradients, signed square root, L2.
inline std::vector<double> fisher(const std::vector<std::vector<double>>& xs, const tubekit::GaussianMixture& g) {
  const std::size_t k = g.weights.size(), d = g.means[0].size();
  const double n = static_cast<double>(xs.size());
  std::vector<double> mu_block(k * d, 0.0), var_block(k * d, 0.0);
  for (const auto& x : xs) {
    std::vector<double> p(k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double dens = g.weights[c];
      for (std::size_t i = 0; i < d; ++i) {
        const double v = g.variances[c][i];
        const double diff = x[i] - g.means[c][i];
        dens *= std::exp(-diff * diff / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
      }
      p[c] = dens;
      total += dens;
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double gamma = p[c] / total;
      for (std::size_t i = 0; i < d; ++i) {
        const double u = (x[i] - g.means[c][i]) / std::sqrt(g.variances[c][i]);
        mu_block[c * d + i] += gamma * u;
        var_block[c * d + i] += gamma * (u * u - 1.0);
      }
    }
  }
  std::vector<double> fv;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < d; ++i) fv.push_back(mu_block[c * d + i] / (n * std::sqrt(g.weights[c])));
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < d; ++i) fv.push_back(var_block[c * d + i] / (n * std::sqrt(2.0 * g.weights[c])));
  }
  double norm = 0.0;
  for (double& v : fv) {
    v = (v < 0 ? -1.0 : 1.0) * std::sqrt(std::abs(v));
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : fv) v /= norm;
  }
  return fv;
}

/// AP from the interpolated precision at each recall level m / num_gt:
/// the best precision over all cutoffs reaching that recall.
inline double enumerated_ap(const std::vector<bool>& ranked, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t m = 1; m <= num_gt; ++m) {
    double best = 0.0;
    for (std::size_t cut = 1; cut <= ranked.size(); ++cut) {
      const auto tp = static_cast<std::size_t>(std::count(ranked.begin(), ranked.begin() + static_cast<long>(cut), true));
      if (tp >= m) best = std::max(best, static_cast<double>(tp) / static_cast<double>(cut));
    }
    sum += best;
  }
  return sum / static_cast<double>(num_gt);
}

/// Normalized area under the ROC curve on [0, fpr_max] by sweeping every
/// distinct score as a threshold. FPR is relative to the false positives at
/// the loosest threshold; a curve without false positives keeps its final
/// true positive rate to fpr_max.
inline double swept_auc(const std::vector<std::pair<double, bool>>& outcomes, std::size_t num_gt, double fpr_max) {
  std::set<double, std::greater<>> thresholds;
  std::size_t total_fp = 0;
  for (const auto& [s, tp] : outcomes) {
    thresholds.insert(s);
    if (!tp) ++total_fp;
  }
  // Lowest and highest TPR reached at each FPR value.
  std::map<double, std::pair<double, double>> at;
  at[0.0] = {0.0, 0.0};
  for (double theta : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& [s, t] : outcomes) {
      if (s >= theta) (t ? tp : fp)++;
    }
    const double fpr = total_fp == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(total_fp);
    const double tpr = num_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(num_gt);
    auto [it, fresh] = at.try_emplace(fpr, tpr, tpr);
    if (!fresh) {
      it->second.first = std::min(it->second.first, tpr);
      it->second.second = std::max(it->second.second, tpr);
    }
  }
  double area = 0.0;
  for (auto it = at.begin(); std::next(it) != at.end(); ++it) {
    const auto nx = std::next(it);
    const double x0 = it->first, y0 = it->second.second;
    double x1 = nx->first, y1 = nx->second.first;
    if (x0 >= fpr_max) break;
    if (x1 > fpr_max) {
      y1 = y0 + (y1 - y0) * (fpr_max - x0) / (x1 - x0);
      x1 = fpr_max;
    }
    area += (x1 - x0) * (y0 + y1) / 2.0;
  }
  const auto last = std::prev(at.end());
  if (last->first < fpr_max) area += (fpr_max - last->first) * last->second.second;
  return area / fpr_max;
}

}  // namespace oracle
