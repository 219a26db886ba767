#pragma once

// Partition comparison for scenes with missing objects.
//
// A partition is a label per element of a common universe; label 0 is the
// missing block V0 and every other label is one object block. For the
// canonical universe of a scene the elements are its M observed points
// followed by its N - M unobserved slots.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gencaps {

using Labels = std::vector<int>;

enum class MaskConvention {
  full,  // all N elements, SA divided by N
  gt,    // ground-truth observed elements only, SA divided by M
};

/// Variation of information with natural logarithms; 0 log 0 = 0.
double variation_of_information(std::span<const int> truth, std::span<const int> pred);

/// Hubert-Arabie adjusted Rand index. Returns 1 when the chance-corrected
/// denominator vanishes (for example one block against one block).
double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred);

/// Weight of the maximum matching between the blocks of the two partitions,
/// edge weight = |V_i intersect V^_j|.
double matching_weight(std::span<const int> truth, std::span<const int> pred);

struct SegmentationScore {
  double weight = 0.0;
  double total = 0.0;  // N, or M under the gt mask
  double ratio() const { return total > 0.0 ? weight / total : 1.0; }
};

SegmentationScore segmentation_score(std::span<const int> truth, std::span<const int> pred,
                                     MaskConvention convention);

double segmentation_accuracy(std::span<const int> truth, std::span<const int> pred,
                             MaskConvention convention);

/// 1 iff pred equals truth as a partition, where a predicted object block
/// may only stand for a true block of the same shape class and V0 only for
/// V0. `shape_class[k]` is the class of label k+1.
int scene_accuracy(std::span<const int> truth, std::span<const int> pred,
                   std::span<const int> shape_class);

/// Both partitions restricted to the elements where truth is nonzero.
std::pair<Labels, Labels> apply_gt_mask(std::span<const int> truth, std::span<const int> pred);

struct SceneMetrics {
  double vi = 0.0;
  double ari = 0.0;
  SegmentationScore sa;
  int scene_accuracy = 0;
};

SceneMetrics score_scene(std::span<const int> truth, std::span<const int> pred,
                         std::span<const int> shape_class, MaskConvention convention);

struct DatasetSummary {
  double sa = 0.0;
  double ari = 0.0;
  double vi = 0.0;
  double scene_accuracy = 0.0;
  std::size_t count = 0;
};

/// Arithmetic means, except SA under the gt mask which is the ratio of
/// summed matching weights to summed observed counts. Throws
/// std::invalid_argument for an empty list.
DatasetSummary dataset_summary(std::span<const SceneMetrics> scenes, MaskConvention convention);

/// Minimum-cost perfect assignment on a square cost matrix (row-major n x n).
/// Returns the column chosen for each row.
std::vector<std::size_t> hungarian_min_cost(std::span<const double> cost, std::size_t n);

}  // namespace gencaps
