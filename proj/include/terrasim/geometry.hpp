#pragma once

// Analytic collision primitives and vertical line queries against them.

#include <Eigen/Dense>

#include <optional>
#include <variant>

namespace terrasim {

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct Capsule {
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
};

/// Solid cylinder with flat caps; axis is a unit vector.
struct Cylinder {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
  double radius = 0.0;
  double half_length = 0.0;
};

struct Shape {
  std::variant<Sphere, Capsule, Box, Cylinder> geometry;
  int body = 0;
};

struct Aabb2 {
  double x_min, x_max, y_min, y_max;
};

/// Footprint of the shape projected onto the x-y plane.
Aabb2 footprint(const Shape& shape);

/// Lowest z at which the vertical line through (x, y) enters the shape.
std::optional<double> lowest_intersection(const Shape& shape, double x, double y);

}  // namespace terrasim
