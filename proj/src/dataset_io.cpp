#include "gencaps/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace gencaps {

using nlohmann::json;

std::string scene_to_line(const Scene& scene) {
  json j;
  j["seed"] = scene.seed;
  json pts = json::array();
  for (const auto& p : scene.points) pts.push_back({p.x(), p.y()});
  j["points"] = std::move(pts);
  j["labels"] = scene.labels;
  json mask = json::array();
  for (bool b : scene.missing_mask) mask.push_back(b ? 1 : 0);
  j["missing_mask"] = std::move(mask);
  json poses = json::array();
  for (const auto& op : scene.poses) {
    poses.push_back({{"object", op.object},
                     {"y", {op.pose.y(0), op.pose.y(1), op.pose.y(2), op.pose.y(3)}}});
  }
  j["poses"] = std::move(poses);
  j["sigma"] = scene.sigma;
  return j.dump();
}

Scene scene_from_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    Scene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("points")) {
      if (p.size() != 2) throw DatasetFormatError("point must have 2 coordinates");
      s.points.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    s.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& b : j.at("missing_mask")) s.missing_mask.push_back(b.get<int>() != 0);
    for (const auto& op : j.at("poses")) {
      ObjectPose o;
      o.object = op.at("object").get<std::size_t>();
      const auto& y = op.at("y");
      if (y.size() != kPoseDim) throw DatasetFormatError("pose must have 4 entries");
      for (int i = 0; i < kPoseDim; ++i) o.pose.y(i) = y[i].get<double>();
      s.poses.push_back(o);
    }
    s.sigma = j.at("sigma").get<double>();
    if (s.labels.size() != s.points.size()) {
      throw DatasetFormatError("labels and points differ in length");
    }
    return s;
  } catch (const json::exception& e) {
    throw DatasetFormatError(std::string("malformed scene record: ") + e.what());
  }
}

void write_dataset(std::ostream& os, const std::vector<Scene>& scenes) {
  for (const auto& s : scenes) os << scene_to_line(s) << '\n';
}

std::vector<Scene> read_dataset(std::istream& is) {
  std::vector<Scene> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(scene_from_line(line));
  }
  return out;
}

void write_dataset_file(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(os, scenes);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Scene> read_dataset_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace gencaps
