#pragma once

// Static SVG reconstruction plots. Output bytes depend only on the inputs.

#include "gencaps/metrics.hpp"
#include "gencaps/scenegen.hpp"

#include <string>
#include <vector>

namespace gencaps {

struct PlotData {
  std::string title;
  /// Scene points in the normalized frame.
  std::vector<Vec2> points;
  /// Ground-truth label per point (1-based object, 0 = none).
  std::vector<int> truth;
  /// Predicted label per point (0 = unexplained).
  std::vector<int> predicted;
  /// Reconstructed objects; drawn as closed template outlines.
  std::vector<ObjectPose> recovered;
};

/// Points are filled with the predicted object's colour and ringed with the
/// true object's colour; recovered templates are dashed outlines with a
/// marker on every predicted vertex.
std::string render_svg(const PlotData& data, const TemplateLibrary& lib, int size_px = 480);

}  // namespace gencaps
