#pragma once

// Line-delimited JSON dataset files: one scene per line with the keys
// seed, points, labels, missing_mask, poses and sigma. Doubles are written
// with round-trip precision so read(write(x)) == x exactly.

#include "gencaps/scenegen.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gencaps {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string scene_to_line(const Scene& scene);
Scene scene_from_line(const std::string& line);

void write_dataset(std::ostream& os, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset(std::istream& is);

void write_dataset_file(const std::filesystem::path& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset_file(const std::filesystem::path& path);

}  // namespace gencaps
