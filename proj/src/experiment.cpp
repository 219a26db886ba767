#include "gencaps/experiment.hpp"

#include <stdexcept>

namespace gencaps {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::gcm_ds: return "gcm-ds";
    case Method::gcm_gmm: return "gcm-gmm";
    case Method::ransac: return "ransac";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "gcm-ds") return Method::gcm_ds;
  if (name == "gcm-gmm") return Method::gcm_gmm;
  if (name == "ransac") return Method::ransac;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

bool uses_lambda(Method m) { return m != Method::ransac; }

Labels truth_labels(const Scene& scene, const TemplateLibrary& lib) {
  Labels labels(lib.num_slots(), 0);
  if (scene.size() > labels.size()) {
    throw std::invalid_argument("scene has more points than template slots");
  }
  std::copy(scene.labels.begin(), scene.labels.end(), labels.begin());
  return labels;
}

SceneOutcome evaluate_scene(const Scene& scene, std::size_t scene_id, const TemplateLibrary& lib,
                            const MethodSpec& spec, std::uint64_t master_seed) {
  SceneOutcome out;
  out.scene_id = scene_id;
  out.truth = truth_labels(scene, lib);

  if (spec.method == Method::ransac) {
    const auto ex = run_ransac(scene.points, lib, spec.ransac);
    out.predicted = ex.partition_labels(lib.num_slots());
    for (const auto& h : ex.accepted) out.recovered.push_back({h.object, h.pose});
  } else {
    VIConfig cfg = spec.vi;
    cfg.prior_kind = spec.method == Method::gcm_ds ? PriorKind::ds : PriorKind::gmm;
    cfg.lambda_init = spec.lambda_init;
    cfg.restarts = spec.restarts;
    cfg.seed = scene_seed(master_seed ^ 0x5eedf00dULL, scene_id);
    const auto res = run_vi(scene.points, lib, cfg);
    const auto part = extract_partition(res.r, scene.size(), lib);
    out.predicted = part.labels;
    out.degenerate = res.degenerate || part.degenerate;
    for (std::size_t k = 0; k < lib.num_objects(); ++k) {
      if (part.object_present[k]) out.recovered.push_back({k, Pose{res.posteriors[k].mu}});
    }
  }

  out.full = score_scene(out.truth, out.predicted, lib.shape_class(), MaskConvention::full);
  out.gt = score_scene(out.truth, out.predicted, lib.shape_class(), MaskConvention::gt);
  return out;
}

std::vector<SceneOutcome> evaluate_dataset_serial(std::span<const Scene> scenes,
                                                  const TemplateLibrary& lib,
                                                  const MethodSpec& spec,
                                                  std::uint64_t master_seed) {
  std::vector<SceneOutcome> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.push_back(evaluate_scene(scenes[i], i, lib, spec, master_seed));
  }
  return out;
}

std::vector<SceneOutcome> evaluate_dataset(std::span<const Scene> scenes,
                                           const TemplateLibrary& lib, const MethodSpec& spec,
                                           std::uint64_t master_seed) {
  const auto count = static_cast<std::ptrdiff_t>(scenes.size());
  std::vector<SceneOutcome> out(scenes.size());
  // Exceptions must not cross the parallel region.
  std::vector<std::string> errors(scenes.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      out[u] = evaluate_scene(scenes[u], u, lib, spec, master_seed);
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error("scene " + std::to_string(i) + ": " + errors[i]);
    }
  }
  return out;
}

std::vector<SceneMetrics> collect(std::span<const SceneOutcome> outcomes, MaskConvention mask) {
  std::vector<SceneMetrics> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(mask == MaskConvention::gt ? o.gt : o.full);
  return out;
}

}  // namespace gencaps
