#pragma once

// Template and pose algebra for 2D similarity transforms.
//
// A pose is the 4-vector y = (t_x, t_y, s*cos(theta), s*sin(theta)); part n
// of template k lands at F_kn * y where
//
//     F_kn = [ 1 0 p_x  p_y ]
//            [ 0 1 p_y -p_x ]
//
// which is a clockwise rotation by theta, a scale by s and a translation.

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gencaps {

/// Dimension of the pose vector. Kept as a named constant so an affine
/// extension only needs a new predictor layout.
inline constexpr int kPoseDim = 4;

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Matrix<double, kPoseDim, 1>;
using Mat4 = Eigen::Matrix<double, kPoseDim, kPoseDim>;
using PartPredictor = Eigen::Matrix<double, 2, kPoseDim>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Part {
  Vec2 position = Vec2::Zero();
};

struct Pose {
  Vec4 y = Vec4::Zero();

  static Pose from_params(double tx, double ty, double scale, double theta);
  bool operator==(const Pose&) const = default;
};

struct PoseParams {
  Vec2 translation = Vec2::Zero();
  double scale = 0.0;
  double theta = 0.0;  // radians in (-pi, pi]
};

PartPredictor part_predictor(const Part& part);

Vec2 apply_pose(const Part& part, const Pose& pose);

/// Recovers translation, scale and angle. Throws GeometryError when the
/// scale is below 1e-12 since the angle is undefined there.
PoseParams pose_params(const Pose& pose);

/// Immutable named shape. Predictor matrices are built once here.
class Template {
 public:
  Template(std::string name, std::vector<Part> parts);

  const std::string& name() const { return name_; }
  std::size_t size() const { return parts_.size(); }
  const std::vector<Part>& parts() const { return parts_; }
  const Part& part(std::size_t n) const { return parts_.at(n); }
  const PartPredictor& predictor(std::size_t n) const { return predictors_.at(n); }

  /// Image of every part under `pose`, in part order.
  std::vector<Vec2> transform(const Pose& pose) const;

  /// True if both templates have identical part lists (up to 1e-12).
  bool same_shape(const Template& other) const;

  static Template square();
  static Template triangle();

 private:
  std::string name_;
  std::vector<Part> parts_;
  std::vector<PartPredictor, Eigen::aligned_allocator<PartPredictor>> predictors_;
};

/// 4x4 matrix stacking F_{k,n1} over F_{k,n2}. Throws GeometryError when
/// n1 == n2 or the condition number exceeds 1e12.
Mat4 basis_matrix(const Template& tmpl, std::size_t n1, std::size_t n2);

/// Slot of a flattened (template, part) pair.
struct SlotIndex {
  std::size_t object = 0;
  std::size_t part = 0;
};

class TemplateLibrary {
 public:
  TemplateLibrary() = default;
  explicit TemplateLibrary(std::vector<Template> templates);

  std::size_t num_objects() const { return templates_.size(); }
  /// Total part count N over all templates.
  std::size_t num_slots() const { return slots_.size(); }
  const Template& at(std::size_t k) const { return templates_.at(k); }
  const std::vector<Template>& templates() const { return templates_; }

  /// Column index of part n of object k in the flattened layout.
  std::size_t slot(std::size_t k, std::size_t n) const { return offsets_.at(k) + n; }
  std::size_t offset(std::size_t k) const { return offsets_.at(k); }
  SlotIndex slot_of(std::size_t column) const { return slots_.at(column); }
  const PartPredictor& predictor(std::size_t column) const;

  /// Shape-class id per object: objects with identical templates share an id.
  const std::vector<int>& shape_class() const { return shape_class_; }

  /// Two squares of side 2 and one isosceles triangle (base 2, height 2),
  /// each centred at the origin.
  static TemplateLibrary constellation();

 private:
  std::vector<Template> templates_;
  std::vector<std::size_t> offsets_;
  std::vector<SlotIndex> slots_;
  std::vector<int> shape_class_;
};

}  // namespace gencaps
