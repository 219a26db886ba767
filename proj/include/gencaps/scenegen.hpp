#pragma once

#include "gencaps/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gencaps {

/// Generating pose of one present object, in the normalized scene frame.
struct ObjectPose {
  std::size_t object = 0;
  Pose pose;
  bool operator==(const ObjectPose&) const = default;
};

struct Scene {
  std::vector<Vec2> points;
  /// 1-based library index of the object that produced each point.
  std::vector<int> labels;
  /// One flag per flattened (object, part) slot; true when the slot is absent.
  std::vector<bool> missing_mask;
  std::vector<ObjectPose> poses;
  std::uint64_t seed = 0;
  double sigma = 0.0;

  std::size_t size() const { return points.size(); }
  bool operator==(const Scene&) const = default;
};

struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct GenConfig {
  TemplateLibrary library = TemplateLibrary::constellation();
  double presence_probability = 0.5;
  double sigma = 0.0;
  UniformRange translation{-3.0, 3.0};
  UniformRange scale{0.5, 1.5};
  UniformRange rotation{-3.14159265358979323846, 3.14159265358979323846};
  std::size_t draws = 512;
  bool shuffle_points = true;
  /// Half-width of the normalization frame; 0 uses half the larger side of
  /// each scene's bounding box.
  double frame_half_width = 0.0;

  /// Throws std::invalid_argument on an out-of-range field.
  void validate() const;
};

/// Seed of draw `index` under `master_seed` (counter-based splitting).
std::uint64_t scene_seed(std::uint64_t master_seed, std::uint64_t index);

/// One draw. Returns nullopt when no object was selected.
///
/// Each draw uses separate sub-streams for presence, template noise, pose
/// and point order, so changing sigma leaves the presence pattern and the
/// poses untouched.
std::optional<Scene> generate_scene(const GenConfig& cfg, std::uint64_t seed);

/// `cfg.draws` draws with empty scenes dropped, in draw order.
std::vector<Scene> generate_dataset(const GenConfig& cfg, std::uint64_t master_seed);

/// Same output as generate_dataset, serial loop. Kept as the reference.
std::vector<Scene> generate_dataset_serial(const GenConfig& cfg, std::uint64_t master_seed);

}  // namespace gencaps
