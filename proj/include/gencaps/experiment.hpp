#pragma once

// Per-scene evaluation of one inference method over a dataset.
//
// evaluate_dataset dispatches scenes over OpenMP threads;
// evaluate_dataset_serial is the plain loop it must reproduce bit for bit.
// Every scene draws its inference seed from (master seed, scene id), so
// results do not depend on the schedule.

#include "gencaps/metrics.hpp"
#include "gencaps/ransac.hpp"
#include "gencaps/scenegen.hpp"
#include "gencaps/vi.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gencaps {

enum class Method { gcm_ds, gcm_gmm, ransac };

std::string_view to_string(Method m);
/// Accepts gcm-ds, gcm-gmm, ransac. Throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);
bool uses_lambda(Method m);

struct MethodSpec {
  Method method = Method::gcm_ds;
  double lambda_init = 500.0;
  int restarts = 5;
  VIConfig vi;  // prior kind, lambda_init, restarts and seed are overwritten
  RansacConfig ransac;
};

struct SceneOutcome {
  std::size_t scene_id = 0;
  Labels truth;
  Labels predicted;
  SceneMetrics full;
  SceneMetrics gt;
  /// Pose of every object the method reports as present.
  std::vector<ObjectPose> recovered;
  bool degenerate = false;
};

/// Ground-truth labels over the N-element universe of `scene`.
Labels truth_labels(const Scene& scene, const TemplateLibrary& lib);

SceneOutcome evaluate_scene(const Scene& scene, std::size_t scene_id, const TemplateLibrary& lib,
                            const MethodSpec& spec, std::uint64_t master_seed);

std::vector<SceneOutcome> evaluate_dataset(std::span<const Scene> scenes,
                                           const TemplateLibrary& lib, const MethodSpec& spec,
                                           std::uint64_t master_seed);

std::vector<SceneOutcome> evaluate_dataset_serial(std::span<const Scene> scenes,
                                                  const TemplateLibrary& lib,
                                                  const MethodSpec& spec,
                                                  std::uint64_t master_seed);

std::vector<SceneMetrics> collect(std::span<const SceneOutcome> outcomes, MaskConvention mask);

}  // namespace gencaps
