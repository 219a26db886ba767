#include "gencaps/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gencaps {

namespace {

enum class Stream : std::uint64_t { presence = 1, noise = 2, pose = 3, order = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, Stream s) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s))));
}

double uniform(std::mt19937_64& rng, const UniformRange& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

void GenConfig::validate() const {
  if (!(presence_probability >= 0.0 && presence_probability <= 1.0)) {
    throw std::invalid_argument("presence probability must lie in [0, 1]");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be finite and >= 0");
  }
  for (const auto* r : {&translation, &scale, &rotation}) {
    if (!(r->lo <= r->hi)) throw std::invalid_argument("sampling range has lo > hi");
  }
  if (scale.lo <= 0.0) throw std::invalid_argument("scale range must be positive");
  if (library.num_objects() == 0) throw std::invalid_argument("empty template library");
}

std::uint64_t scene_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) + index);
}

std::optional<Scene> generate_scene(const GenConfig& cfg, std::uint64_t seed) {
  const auto& lib = cfg.library;
  const std::size_t num_objects = lib.num_objects();

  auto presence_rng = substream(seed, Stream::presence);
  auto noise_rng = substream(seed, Stream::noise);
  auto pose_rng = substream(seed, Stream::pose);
  auto order_rng = substream(seed, Stream::order);

  std::vector<bool> present(num_objects);
  std::bernoulli_distribution coin(cfg.presence_probability);
  for (std::size_t k = 0; k < num_objects; ++k) present[k] = coin(presence_rng);
  if (std::none_of(present.begin(), present.end(), [](bool b) { return b; })) {
    return std::nullopt;
  }

  Scene scene;
  scene.seed = seed;
  scene.sigma = cfg.sigma;
  scene.missing_mask.assign(lib.num_slots(), true);

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<int> raw_labels;
  std::vector<Vec2> raw_points;
  for (std::size_t k = 0; k < num_objects; ++k) {
    // Noise and pose are drawn for every template, present or not, so the
    // streams stay aligned across presence patterns and sigma values.
    const auto& tmpl = lib.at(k);
    std::vector<Part> noisy(tmpl.parts());
    for (auto& p : noisy) {
      const double ex = noise(noise_rng);
      const double ey = noise(noise_rng);
      p.position += cfg.sigma * Vec2(ex, ey);
    }
    const double tx = uniform(pose_rng, cfg.translation);
    const double ty = uniform(pose_rng, cfg.translation);
    const double s = uniform(pose_rng, cfg.scale);
    const double theta = uniform(pose_rng, cfg.rotation);
    if (!present[k]) continue;

    const Pose pose = Pose::from_params(tx, ty, s, theta);
    scene.poses.push_back({k, pose});
    for (std::size_t n = 0; n < noisy.size(); ++n) {
      raw_points.push_back(apply_pose(noisy[n], pose));
      raw_labels.push_back(static_cast<int>(k) + 1);
      scene.missing_mask[lib.slot(k, n)] = false;
    }
  }

  // One isotropic map into [-1,1]^2: centre the bounding box, then divide by
  // half of its larger side.
  Vec2 lo = raw_points.front();
  Vec2 hi = raw_points.front();
  for (const auto& p : raw_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 centre = 0.5 * (lo + hi);
  double half = cfg.frame_half_width > 0.0 ? cfg.frame_half_width : 0.5 * (hi - lo).maxCoeff();
  if (!(half > 0.0)) half = 1.0;
  for (auto& p : raw_points) {
    p = ((p - centre) / half).cwiseMax(Vec2(-1, -1)).cwiseMin(Vec2(1, 1));
  }
  for (auto& op : scene.poses) {
    op.pose.y.head<2>() = (op.pose.y.head<2>() - centre) / half;
    op.pose.y.tail<2>() /= half;
  }

  std::vector<std::size_t> order(raw_points.size());
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle_points) {
    // Fisher-Yates by hand: std::shuffle's algorithm is library-specific.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(order_rng)]);
    }
  }
  scene.points.reserve(order.size());
  scene.labels.reserve(order.size());
  for (auto i : order) {
    scene.points.push_back(raw_points[i]);
    scene.labels.push_back(raw_labels[i]);
  }
  return scene;
}

std::vector<Scene> generate_dataset_serial(const GenConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  std::vector<Scene> out;
  for (std::size_t i = 0; i < cfg.draws; ++i) {
    if (auto s = generate_scene(cfg, scene_seed(master_seed, i))) out.push_back(std::move(*s));
  }
  return out;
}

std::vector<Scene> generate_dataset(const GenConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  const auto draws = static_cast<std::ptrdiff_t>(cfg.draws);
  std::vector<std::optional<Scene>> slots(cfg.draws);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < draws; ++i) {
    slots[i] = generate_scene(cfg, scene_seed(master_seed, static_cast<std::uint64_t>(i)));
  }
  std::vector<Scene> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace gencaps
