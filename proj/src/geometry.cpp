#include "gencaps/geometry.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <utility>

namespace gencaps {

namespace {

constexpr double kMinScale = 1e-12;
constexpr double kMaxBasisCondition = 1e12;

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

}  // namespace

Pose Pose::from_params(double tx, double ty, double scale, double theta) {
  Pose p;
  p.y << tx, ty, scale * std::cos(theta), scale * std::sin(theta);
  return p;
}

PartPredictor part_predictor(const Part& part) {
  const double px = part.position.x();
  const double py = part.position.y();
  PartPredictor f;
  f << 1.0, 0.0, px, py,
       0.0, 1.0, py, -px;
  return f;
}

Vec2 apply_pose(const Part& part, const Pose& pose) { return part_predictor(part) * pose.y; }

PoseParams pose_params(const Pose& pose) {
  const double c = pose.y(2);
  const double s = pose.y(3);
  const double scale = std::hypot(c, s);
  if (!(scale >= kMinScale)) {
    throw GeometryError("pose_params: scale " + std::to_string(scale) + " is degenerate");
  }
  PoseParams out;
  out.translation = Vec2(pose.y(0), pose.y(1));
  out.scale = scale;
  out.theta = std::atan2(s, c);
  // atan2 returns [-pi, pi]; fold -pi onto pi so the range is half-open.
  if (out.theta <= -std::numbers::pi) out.theta = std::numbers::pi;
  return out;
}

Template::Template(std::string name, std::vector<Part> parts)
    : name_(std::move(name)), parts_(std::move(parts)) {
  if (parts_.size() < 2) {
    throw GeometryError("template '" + name_ + "' needs at least 2 parts");
  }
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (!finite(parts_[i].position)) {
      throw GeometryError("template '" + name_ + "' has a non-finite part");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if ((parts_[i].position - parts_[j].position).norm() == 0.0) {
        throw GeometryError("template '" + name_ + "' has coincident parts");
      }
    }
  }
  predictors_.reserve(parts_.size());
  for (const auto& p : parts_) predictors_.push_back(part_predictor(p));
}

std::vector<Vec2> Template::transform(const Pose& pose) const {
  std::vector<Vec2> out;
  out.reserve(parts_.size());
  for (const auto& f : predictors_) out.push_back(f * pose.y);
  return out;
}

bool Template::same_shape(const Template& other) const {
  if (other.size() != size()) return false;
  for (std::size_t n = 0; n < size(); ++n) {
    if ((parts_[n].position - other.parts_[n].position).norm() > 1e-12) return false;
  }
  return true;
}

Template Template::square() {
  return Template("square", {Part{Vec2(1, 1)}, Part{Vec2(1, -1)}, Part{Vec2(-1, -1)},
                             Part{Vec2(-1, 1)}});
}

Template Template::triangle() {
  // Vertices (-1,0), (1,0), (0,2) shifted so the centroid (0, 2/3) is at the origin.
  constexpr double cy = 2.0 / 3.0;
  return Template("triangle",
                  {Part{Vec2(-1, -cy)}, Part{Vec2(1, -cy)}, Part{Vec2(0, 2.0 - cy)}});
}

Mat4 basis_matrix(const Template& tmpl, std::size_t n1, std::size_t n2) {
  if (n1 == n2) throw GeometryError("basis_matrix: basis parts must differ");
  Mat4 b;
  b.topRows<2>() = tmpl.predictor(n1);
  b.bottomRows<2>() = tmpl.predictor(n2);
  const Eigen::JacobiSVD<Mat4> svd(b);
  const auto& sv = svd.singularValues();
  const double smin = sv(kPoseDim - 1);
  if (!(smin > 0.0) || sv(0) / smin > kMaxBasisCondition) {
    throw GeometryError("basis_matrix: singular basis for template '" + tmpl.name() + "'");
  }
  return b;
}

TemplateLibrary::TemplateLibrary(std::vector<Template> templates)
    : templates_(std::move(templates)) {
  std::size_t offset = 0;
  for (std::size_t k = 0; k < templates_.size(); ++k) {
    offsets_.push_back(offset);
    for (std::size_t n = 0; n < templates_[k].size(); ++n) slots_.push_back({k, n});
    offset += templates_[k].size();
  }
  shape_class_.resize(templates_.size());
  for (std::size_t k = 0; k < templates_.size(); ++k) {
    shape_class_[k] = static_cast<int>(k);
    for (std::size_t j = 0; j < k; ++j) {
      if (templates_[k].same_shape(templates_[j])) {
        shape_class_[k] = shape_class_[j];
        break;
      }
    }
  }
}

const PartPredictor& TemplateLibrary::predictor(std::size_t column) const {
  const auto s = slot_of(column);
  return templates_[s.object].predictor(s.part);
}

TemplateLibrary TemplateLibrary::constellation() {
  return TemplateLibrary({Template::square(), Template::square(), Template::triangle()});
}

}  // namespace gencaps
