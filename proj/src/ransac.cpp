#include "gencaps/ransac.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace gencaps {

Pose solve_pose_from_pair(const Template& tmpl, std::size_t n1, std::size_t n2, const Vec2& xi,
                          const Vec2& xj) {
  const Mat4 b = basis_matrix(tmpl, n1, n2);
  Vec4 rhs;
  rhs << xi, xj;
  Pose p;
  p.y = b.partialPivLu().solve(rhs);
  return p;
}

std::optional<SubsetMatch> subset_match(std::span<const Vec2> predicted,
                                        std::span<const Vec2> points, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("subset_match: tol must be positive");
  struct Candidate {
    double dist2;
    std::size_t part;
    std::size_t point;
  };
  const double tol2 = tol * tol;
  std::vector<Candidate> cands;
  for (std::size_t n = 0; n < predicted.size(); ++n) {
    for (std::size_t m = 0; m < points.size(); ++m) {
      const double d2 = (predicted[n] - points[m]).squaredNorm();
      if (d2 < tol2) cands.push_back({d2, n, m});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist2, a.part, a.point) < std::tie(b.dist2, b.part, b.point);
  });

  constexpr auto none = static_cast<std::size_t>(-1);
  SubsetMatch out;
  out.indices.assign(predicted.size(), none);
  std::vector<bool> taken(points.size(), false);
  std::size_t assigned = 0;
  for (const auto& c : cands) {
    if (out.indices[c.part] != none || taken[c.point]) continue;
    out.indices[c.part] = c.point;
    taken[c.point] = true;
    out.score += c.dist2;
    if (++assigned == predicted.size()) break;
  }
  if (assigned != predicted.size()) return std::nullopt;
  return out;
}

std::vector<Hypothesis> enumerate_hypotheses(std::span<const Vec2> points,
                                             const TemplateLibrary& lib, const RansacConfig& cfg) {
  // One representative template per shape class.
  std::vector<std::size_t> reps;
  for (std::size_t k = 0; k < lib.num_objects(); ++k) {
    if (lib.shape_class()[k] == static_cast<int>(k)) reps.push_back(k);
  }

  using Key = std::pair<std::size_t, std::vector<std::size_t>>;
  std::map<Key, Hypothesis> unique;
  for (const std::size_t k : reps) {
    const auto& tmpl = lib.at(k);
    if (tmpl.size() > points.size()) continue;
    std::vector<std::pair<std::size_t, std::size_t>> bases;
    if (cfg.basis == BasisPolicy::fixed) {
      bases.emplace_back(0, 1);
    } else {
      for (std::size_t a = 0; a < tmpl.size(); ++a) {
        for (std::size_t b = 0; b < tmpl.size(); ++b) {
          if (a != b) bases.emplace_back(a, b);
        }
      }
    }
    for (const auto& [n1, n2] : bases) {
      const Mat4 basis = basis_matrix(tmpl, n1, n2);
      const auto lu = basis.partialPivLu();
      for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) {
          if (i == j) continue;
          Vec4 rhs;
          rhs << points[i], points[j];
          Pose pose;
          pose.y = lu.solve(rhs);
          const auto predicted = tmpl.transform(pose);
          auto match = subset_match(predicted, points, cfg.tol);
          if (!match) continue;
          Key key{k, match->indices};
          std::sort(key.second.begin(), key.second.end());
          auto it = unique.find(key);
          if (it == unique.end() || match->score < it->second.score) {
            unique[key] = Hypothesis{k, pose, std::move(match->indices), match->score};
          }
        }
      }
    }
  }

  std::vector<std::pair<Key, Hypothesis>> sorted(unique.begin(), unique.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second.score != b.second.score) return a.second.score < b.second.score;
    return a.first < b.first;
  });
  std::vector<Hypothesis> out;
  out.reserve(sorted.size());
  for (auto& [key, h] : sorted) out.push_back(std::move(h));
  return out;
}

std::vector<int> Explanation::partition_labels(std::size_t num_slots) const {
  std::vector<int> labels(num_slots, 0);
  for (std::size_t m = 0; m < assignment.size(); ++m) labels[m] = assignment[m] + 1;
  return labels;
}

Explanation run_ransac(std::span<const Vec2> points, const TemplateLibrary& lib,
                       const RansacConfig& cfg) {
  if (points.empty()) throw std::invalid_argument("run_ransac: empty scene");
  Explanation out;
  out.assignment.assign(points.size(), -1);
  out.missing.assign(lib.num_objects(), true);

  for (auto& h : enumerate_hypotheses(points, lib, cfg)) {
    const bool clash = std::any_of(h.matched.begin(), h.matched.end(),
                                   [&](std::size_t m) { return out.assignment[m] >= 0; });
    if (clash) continue;
    const int shape = lib.shape_class()[h.object];
    std::optional<std::size_t> slot;
    for (std::size_t k = 0; k < lib.num_objects(); ++k) {
      if (out.missing[k] && lib.shape_class()[k] == shape) {
        slot = k;
        break;
      }
    }
    if (!slot) continue;
    h.object = *slot;
    out.missing[*slot] = false;
    for (std::size_t m : h.matched) out.assignment[m] = static_cast<int>(*slot);
    out.accepted.push_back(std::move(h));
  }
  return out;
}

}  // namespace gencaps
