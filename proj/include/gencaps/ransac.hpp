#pragma once

#include "gencaps/geometry.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gencaps {

enum class BasisPolicy {
  fixed,  // parts 0 and 1 of every template
  all,    // every ordered pair of distinct parts
};

struct RansacConfig {
  double tol = 0.1;
  BasisPolicy basis = BasisPolicy::fixed;
};

/// Pose mapping parts n1, n2 of `tmpl` exactly onto xi, xj.
Pose solve_pose_from_pair(const Template& tmpl, std::size_t n1, std::size_t n2, const Vec2& xi,
                          const Vec2& xj);

struct SubsetMatch {
  /// Scene point index per predicted part.
  std::vector<std::size_t> indices;
  double score = 0.0;  // sum of squared distances
};

/// Greedy nearest assignment of predicted parts to distinct scene points,
/// closest pairs first. Returns nullopt if any part has no free point
/// within `tol`.
std::optional<SubsetMatch> subset_match(std::span<const Vec2> predicted,
                                        std::span<const Vec2> points, double tol);

struct Hypothesis {
  std::size_t object = 0;  // template index (a slot once accepted)
  Pose pose;
  std::vector<std::size_t> matched;  // scene point per part
  double score = 0.0;
};

/// Every full-object match over all ordered point pairs and bases,
/// deduplicated by (shape, matched point set) keeping the lowest score, in
/// ascending (score, shape, sorted points) order. Hypotheses carry the
/// first template index of their shape class.
std::vector<Hypothesis> enumerate_hypotheses(std::span<const Vec2> points,
                                             const TemplateLibrary& lib, const RansacConfig& cfg);

struct Explanation {
  std::vector<Hypothesis> accepted;
  /// Object index per scene point, -1 when unexplained.
  std::vector<int> assignment;
  std::vector<bool> missing;

  /// Labels over the N-element universe (observed points then unobserved
  /// slots); 0 = missing, k+1 = object k.
  std::vector<int> partition_labels(std::size_t num_slots) const;
};

/// Greedy ascending-score acceptance without point reuse. Hypotheses of a
/// shape fill that shape's free template slots in index order; templates
/// left without a hypothesis are reported missing.
Explanation run_ransac(std::span<const Vec2> points, const TemplateLibrary& lib,
                       const RansacConfig& cfg = {});

}  // namespace gencaps
