#include "gencaps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gencaps {

namespace {

struct Contingency {
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  std::vector<std::vector<double>> counts;  // [row][col]
  std::vector<double> row_sums;
  std::vector<double> col_sums;
  double total = 0.0;
};

std::map<int, std::size_t> dense_index(std::span<const int> labels) {
  std::map<int, std::size_t> idx;
  for (int l : labels) idx.emplace(l, 0);
  std::size_t i = 0;
  for (auto& [label, pos] : idx) pos = i++;
  return idx;
}

Contingency contingency(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("partitions are over different universes");
  }
  const auto ti = dense_index(truth);
  const auto pi = dense_index(pred);
  Contingency c;
  for (const auto& [l, i] : ti) c.row_labels.push_back(l);
  for (const auto& [l, i] : pi) c.col_labels.push_back(l);
  c.counts.assign(ti.size(), std::vector<double>(pi.size(), 0.0));
  c.row_sums.assign(ti.size(), 0.0);
  c.col_sums.assign(pi.size(), 0.0);
  for (std::size_t e = 0; e < truth.size(); ++e) {
    const auto r = ti.at(truth[e]);
    const auto k = pi.at(pred[e]);
    c.counts[r][k] += 1.0;
    c.row_sums[r] += 1.0;
    c.col_sums[k] += 1.0;
  }
  c.total = static_cast<double>(truth.size());
  return c;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double variation_of_information(std::span<const int> truth, std::span<const int> pred) {
  const auto c = contingency(truth, pred);
  if (c.total == 0.0) return 0.0;
  double vi = 0.0;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    const double p = c.row_sums[i] / c.total;
    for (std::size_t j = 0; j < c.counts[i].size(); ++j) {
      const double r = c.counts[i][j] / c.total;
      if (r == 0.0) continue;
      const double q = c.col_sums[j] / c.total;
      vi -= r * (std::log(r / p) + std::log(r / q));
    }
  }
  return std::max(vi, 0.0);
}

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
  const auto c = contingency(truth, pred);
  if (c.total < 2.0) return 1.0;
  double index = 0.0;
  for (const auto& row : c.counts) {
    for (double n : row) index += choose2(n);
  }
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (double a : c.row_sums) sum_a += choose2(a);
  for (double b : c.col_sums) sum_b += choose2(b);
  const double expected = sum_a * sum_b / choose2(c.total);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> hungarian_min_cost(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("hungarian: cost must be n x n");
  // Potentials formulation with 1-based sentinel column 0.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double matching_weight(std::span<const int> truth, std::span<const int> pred) {
  const auto c = contingency(truth, pred);
  const std::size_t n = std::max(c.row_labels.size(), c.col_labels.size());
  if (n == 0) return 0.0;
  double max_w = 0.0;
  for (const auto& row : c.counts) {
    for (double w : row) max_w = std::max(max_w, w);
  }
  // Padded rows/columns carry weight 0.
  std::vector<double> cost(n * n, max_w);
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    for (std::size_t j = 0; j < c.counts[i].size(); ++j) cost[i * n + j] = max_w - c.counts[i][j];
  }
  const auto assign = hungarian_min_cost(cost, n);
  double w = 0.0;
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    if (assign[i] < c.col_labels.size()) w += c.counts[i][assign[i]];
  }
  return w;
}

std::pair<Labels, Labels> apply_gt_mask(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("partitions are over different universes");
  }
  std::pair<Labels, Labels> out;
  for (std::size_t e = 0; e < truth.size(); ++e) {
    if (truth[e] == 0) continue;
    out.first.push_back(truth[e]);
    out.second.push_back(pred[e]);
  }
  return out;
}

SegmentationScore segmentation_score(std::span<const int> truth, std::span<const int> pred,
                                     MaskConvention convention) {
  if (convention == MaskConvention::gt) {
    const auto [t, p] = apply_gt_mask(truth, pred);
    return {matching_weight(t, p), static_cast<double>(t.size())};
  }
  return {matching_weight(truth, pred), static_cast<double>(truth.size())};
}

double segmentation_accuracy(std::span<const int> truth, std::span<const int> pred,
                             MaskConvention convention) {
  return segmentation_score(truth, pred, convention).ratio();
}

int scene_accuracy(std::span<const int> truth, std::span<const int> pred,
                   std::span<const int> shape_class) {
  const auto c = contingency(truth, pred);
  auto class_of = [&](int label) -> int {
    if (label == 0) return -1;
    const auto k = static_cast<std::size_t>(label - 1);
    if (k >= shape_class.size()) throw std::invalid_argument("label outside the template library");
    return shape_class[k];
  };
  // Every nonempty predicted block must coincide with one true block of a
  // compatible class. Blocks are disjoint and cover the universe, so this
  // also makes the correspondence a bijection.
  for (std::size_t j = 0; j < c.col_labels.size(); ++j) {
    bool found = false;
    for (std::size_t i = 0; i < c.row_labels.size(); ++i) {
      if (c.counts[i][j] == 0.0) continue;
      found = c.counts[i][j] == c.col_sums[j] && c.counts[i][j] == c.row_sums[i] &&
              class_of(c.row_labels[i]) == class_of(c.col_labels[j]);
      break;
    }
    if (!found) return 0;
  }
  return 1;
}

SceneMetrics score_scene(std::span<const int> truth, std::span<const int> pred,
                         std::span<const int> shape_class, MaskConvention convention) {
  SceneMetrics m;
  if (convention == MaskConvention::gt) {
    const auto [t, p] = apply_gt_mask(truth, pred);
    m.vi = variation_of_information(t, p);
    m.ari = adjusted_rand_index(t, p);
    m.sa = {matching_weight(t, p), static_cast<double>(t.size())};
    m.scene_accuracy = scene_accuracy(t, p, shape_class);
  } else {
    m.vi = variation_of_information(truth, pred);
    m.ari = adjusted_rand_index(truth, pred);
    m.sa = segmentation_score(truth, pred, MaskConvention::full);
    m.scene_accuracy = scene_accuracy(truth, pred, shape_class);
  }
  return m;
}

DatasetSummary dataset_summary(std::span<const SceneMetrics> scenes, MaskConvention convention) {
  if (scenes.empty()) throw std::invalid_argument("dataset_summary: no scenes");
  DatasetSummary s;
  double weight = 0.0;
  double total = 0.0;
  for (const auto& m : scenes) {
    s.vi += m.vi;
    s.ari += m.ari;
    s.sa += m.sa.ratio();
    s.scene_accuracy += m.scene_accuracy;
    weight += m.sa.weight;
    total += m.sa.total;
  }
  const auto n = static_cast<double>(scenes.size());
  s.count = scenes.size();
  s.vi /= n;
  s.ari /= n;
  s.scene_accuracy /= n;
  s.sa = convention == MaskConvention::gt ? weight / total : s.sa / n;
  return s;
}

}  // namespace gencaps
