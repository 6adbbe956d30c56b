#include "terrasim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace terrasim {
namespace {

std::optional<double> sphere_low(const Eigen::Vector3d& c, double r, double x, double y) {
  const double dx = x - c.x();
  const double dy = y - c.y();
  const double d2 = dx * dx + dy * dy;
  if (d2 > r * r) return std::nullopt;
  return c.z() - std::sqrt(r * r - d2);
}

std::optional<double> capsule_low(const Capsule& cap, double x, double y) {
  std::optional<double> best = sphere_low(cap.a, cap.radius, x, y);
  if (auto lb = sphere_low(cap.b, cap.radius, x, y); lb && (!best || *lb < *best)) best = lb;

  const Eigen::Vector3d axis = cap.b - cap.a;
  const double len = axis.norm();
  if (len < 1e-12) return best;
  const Eigen::Vector3d u = axis / len;

  // Points (x, y, z) at distance r from the infinite axis:
  // z^2 (1 - uz^2) + 2 z (wz - (w.u) uz) + |w|^2 - (w.u)^2 - r^2 = 0 with w = P0 - a.
  const Eigen::Vector3d w(x - cap.a.x(), y - cap.a.y(), -cap.a.z());
  const double wu = w.dot(u);
  const double qa = 1.0 - u.z() * u.z();
  const double qb = 2.0 * (w.z() - wu * u.z());
  const double qc = w.squaredNorm() - wu * wu - cap.radius * cap.radius;
  if (qa < 1e-14) return best;  // vertical axis: end caps cover the lowest point
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return best;
  const double z = (-qb - std::sqrt(disc)) / (2.0 * qa);
  const double t = (w.dot(u) + z * u.z());
  if (t >= 0.0 && t <= len && (!best || z < *best)) best = z;
  return best;
}

std::optional<double> box_low(const Box& box, double x, double y) {
  // Slab test for the line p(z) = (x, y, z) in box coordinates.
  const Eigen::Vector3d origin = box.rotation.transpose() * (Eigen::Vector3d(x, y, 0.0) - box.center);
  const Eigen::Vector3d dir = box.rotation.transpose() * Eigen::Vector3d::UnitZ();
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double e = box.half_extents(i);
    if (std::abs(dir(i)) < 1e-15) {
      if (std::abs(origin(i)) > e) return std::nullopt;
      continue;
    }
    double t1 = (-e - origin(i)) / dir(i);
    double t2 = (e - origin(i)) / dir(i);
    if (t1 > t2) std::swap(t1, t2);
    t_lo = std::max(t_lo, t1);
    t_hi = std::min(t_hi, t2);
    if (t_lo > t_hi) return std::nullopt;
  }
  return t_lo;
}

std::optional<double> cylinder_low(const Cylinder& cyl, double x, double y) {
  const Eigen::Vector3d u = cyl.axis.normalized();
  const Eigen::Vector3d w(x - cyl.center.x(), y - cyl.center.y(), -cyl.center.z());
  std::optional<double> best;
  auto keep = [&best](double z) {
    if (!best || z < *best) best = z;
  };

  // Lateral surface, same quadric as the capsule body.
  const double wu = w.dot(u);
  const double qa = 1.0 - u.z() * u.z();
  const double qb = 2.0 * (w.z() - wu * u.z());
  const double qc = w.squaredNorm() - wu * wu - cyl.radius * cyl.radius;
  if (qa > 1e-14) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double z = (-qb - std::sqrt(disc)) / (2.0 * qa);
      const double t = wu + z * u.z();
      if (std::abs(t) <= cyl.half_length) keep(z);
    }
  }

  // Cap disks.
  if (std::abs(u.z()) > 1e-14) {
    for (double side : {-1.0, 1.0}) {
      const double z = (side * cyl.half_length - wu) / u.z();
      const Eigen::Vector3d p = w + Eigen::Vector3d(0.0, 0.0, z);
      const double along = p.dot(u);
      if ((p - along * u).squaredNorm() <= cyl.radius * cyl.radius) keep(z);
    }
  }
  return best;
}

}  // namespace

Aabb2 footprint(const Shape& shape) {
  return std::visit(
      [](const auto& g) -> Aabb2 {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return {g.center.x() - g.radius, g.center.x() + g.radius, g.center.y() - g.radius,
                  g.center.y() + g.radius};
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return {std::min(g.a.x(), g.b.x()) - g.radius, std::max(g.a.x(), g.b.x()) + g.radius,
                  std::min(g.a.y(), g.b.y()) - g.radius, std::max(g.a.y(), g.b.y()) + g.radius};
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          const Eigen::Vector3d u = g.axis.normalized();
          const double ex = std::abs(u.x()) * g.half_length + g.radius * std::sqrt(std::max(0.0, 1.0 - u.x() * u.x()));
          const double ey = std::abs(u.y()) * g.half_length + g.radius * std::sqrt(std::max(0.0, 1.0 - u.y() * u.y()));
          return {g.center.x() - ex, g.center.x() + ex, g.center.y() - ey, g.center.y() + ey};
        } else {
          const Eigen::Vector3d ext = g.rotation.cwiseAbs() * g.half_extents;
          return {g.center.x() - ext.x(), g.center.x() + ext.x(), g.center.y() - ext.y(),
                  g.center.y() + ext.y()};
        }
      },
      shape.geometry);
}

std::optional<double> lowest_intersection(const Shape& shape, double x, double y) {
  return std::visit(
      [x, y](const auto& g) -> std::optional<double> {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return sphere_low(g.center, g.radius, x, y);
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return capsule_low(g, x, y);
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          return cylinder_low(g, x, y);
        } else {
          return box_low(g, x, y);
        }
      },
      shape.geometry);
}

}  // namespace terrasim
