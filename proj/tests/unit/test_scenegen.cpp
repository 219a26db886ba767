#include "gencaps/dataset_io.hpp"
#include "gencaps/scenegen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

using namespace gencaps;

namespace {

GenConfig forced() {
  GenConfig cfg;
  cfg.presence_probability = 1.0;
  cfg.translation = {0.0, 0.0};
  cfg.scale = {1.0, 1.0};
  cfg.rotation = {0.0, 0.0};
  cfg.shuffle_points = false;
  return cfg;
}

std::vector<bool> presence(const Scene& s, std::size_t objects) {
  std::vector<bool> p(objects, false);
  for (const auto& op : s.poses) p[op.object] = true;
  return p;
}

}  // namespace

TEST_CASE("forced configuration gives every corner") {
  const auto cfg = forced();
  const auto scene = generate_scene(cfg, 1);
  REQUIRE(scene);
  CHECK(scene->size() == 11);
  CHECK(std::none_of(scene->missing_mask.begin(), scene->missing_mask.end(),
                     [](bool b) { return b; }));
  // Union of corners spans x in [-1,1] and y in [-1,4/3]; the larger side is
  // 7/3, so the map is (p - (0, 1/6)) / (7/6).
  std::size_t i = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    for (const auto& part : cfg.library.at(k).parts()) {
      const Vec2 want = (part.position - Vec2(0, 1.0 / 6.0)) / (7.0 / 6.0);
      CHECK((scene->points[i] - want).norm() < 1e-12);
      CHECK(scene->labels[i] == static_cast<int>(k) + 1);
      ++i;
    }
  }
}

TEST_CASE("presence probability 0 gives no scene") {
  auto cfg = forced();
  cfg.presence_probability = 0.0;
  CHECK_FALSE(generate_scene(cfg, 3));
  cfg.draws = 20;
  CHECK(generate_dataset(cfg, 3).empty());
}

TEST_CASE("non-empty count over 512 draws") {
  GenConfig cfg;
  const auto n = generate_dataset(cfg, 7).size();
  CHECK(n >= 440);
  CHECK(n <= 470);
  // Any seed stays inside the 4-sigma binomial band around 448.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto k = static_cast<double>(generate_dataset(cfg, seed).size());
    CHECK(std::abs(k - 448.0) <= 4.0 * std::sqrt(512.0 * 7.0 / 64.0));
  }
}

TEST_CASE("determinism and serial reference") {
  GenConfig cfg;
  cfg.sigma = 0.1;
  cfg.draws = 64;
  const auto a = generate_dataset(cfg, 11);
  const auto b = generate_dataset(cfg, 11);
  CHECK(a == b);
  CHECK(a == generate_dataset_serial(cfg, 11));
  std::ostringstream sa, sb;
  write_dataset(sa, a);
  write_dataset(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("sigma keeps presence and poses") {
  GenConfig clean;
  clean.draws = 100;
  GenConfig noisy = clean;
  noisy.sigma = 0.25;
  const auto a = generate_dataset(clean, 5);
  const auto b = generate_dataset(noisy, 5);
  REQUIRE(a.size() == b.size());
  bool any_moved = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].seed == b[i].seed);
    CHECK(presence(a[i], 3) == presence(b[i], 3));
    CHECK(a[i].labels == b[i].labels);
    any_moved = any_moved || a[i].points != b[i].points;
  }
  CHECK(any_moved);
}

TEST_CASE("noise-free scenes are exact similarity images") {
  GenConfig cfg;
  cfg.draws = 100;
  for (const auto& scene : generate_dataset(cfg, 7)) {
    // Every present object's parts sit exactly at the stored pose image.
    std::multiset<std::pair<double, double>> expected;
    double worst = 0.0;
    for (const auto& op : scene.poses) {
      for (const auto& v : cfg.library.at(op.object).transform(op.pose)) {
        double best = 1e9;
        for (const auto& p : scene.points) best = std::min(best, (p - v).norm());
        worst = std::max(worst, best);
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("points lie in the unit box and masks agree with labels") {
  GenConfig cfg;
  cfg.sigma = 0.25;
  cfg.draws = 200;
  for (const auto& scene : generate_dataset(cfg, 9)) {
    for (const auto& p : scene.points) {
      CHECK(p.cwiseAbs().maxCoeff() <= 1.0);
    }
    const auto observed = std::count(scene.missing_mask.begin(), scene.missing_mask.end(), false);
    CHECK(static_cast<std::size_t>(observed) == scene.size());
    CHECK(scene.labels.size() == scene.size());
  }
}

TEST_CASE("config validation") {
  GenConfig cfg;
  cfg.sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GenConfig{};
  cfg.presence_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GenConfig{};
  cfg.scale = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("dataset file round trip") {
  GenConfig cfg;
  cfg.sigma = 0.1;
  cfg.draws = 40;
  const auto data = generate_dataset(cfg, 13);
  for (const auto& s : data) CHECK(scene_from_line(scene_to_line(s)) == s);

  const auto path = std::filesystem::temp_directory_path() / "gencaps_roundtrip.jsonl";
  write_dataset_file(path, data);
  CHECK(read_dataset_file(path) == data);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(scene_from_line("{\"seed\": 1}"), DatasetFormatError);
  CHECK_THROWS_AS(scene_from_line("not json"), DatasetFormatError);
  std::istringstream empty("");
  CHECK(read_dataset(empty).empty());
}
