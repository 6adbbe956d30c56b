#pragma once

// Soil Contact Model: a sparse vertical-deflection heightfield with
// pressure-sinkage, shear, damping and lateral soil flow.

#include "terrasim/contact.hpp"
#include "terrasim/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

namespace terrasim {

struct SoilParams {
  double K_c = 25.0;        // N/m^(1+n)
  double K_phi = 5e4;       // N/m^(2+n)
  double n_exp = 0.6;
  double cohesion = 25.0;   // Pa
  double phi = 28.0 * M_PI / 180.0;  // rad
  double k_shear = 0.04;    // m
  double K_elastic = 2.5e6; // Pa/m
  double R_damp = 5e3;      // Pa s/m
  double eps_v = 1e-4;      // m/s, slip direction regularizer
  bool reset_shear_on_separation = false;

  void validate() const;
};

struct BulldozeParams {
  bool enabled = true;
  double erosion_angle = 25.0 * M_PI / 180.0;  // rad
  double flow_factor = 1.0;
  int iterations = 2;
  int rings = 3;

  void validate() const;
};

struct SoilNode {
  double z0 = 0.0;
  double sinkage_total = 0.0;
  double sinkage_plastic = 0.0;
  double sinkage_elastic = 0.0;
  double deposit = 0.0;  // signed height moved in or out by soil flow
  double shear_j = 0.0;
  double pressure = 0.0;
  double shear_stress = 0.0;
  bool in_contact = false;

  /// Height of the unloaded surface.
  double rest_surface() const { return z0 + deposit - sinkage_plastic; }
  /// Current surface including elastic deflection.
  double surface() const { return z0 + deposit - sinkage_total; }
};

struct ContactPatch {
  std::vector<std::pair<int, int>> nodes;
  double area = 0.0;
  double perimeter = 0.0;
  double width = 0.0;
};

struct RayHit {
  double depth = 0.0;      // surface_z minus the lowest intersection
  double z = 0.0;          // lowest intersection height
  int body = -1;
  Vec3 point = Vec3::Zero();
};

/// Vertical line through (x, y) against a set of posed primitives; reports a
/// hit only when some shape dips below surface_z.
std::optional<RayHit> raycast_vertical(double x, double y, double surface_z,
                                       const std::vector<Shape>& shapes);

ContactPatch patch_geometry(const std::vector<std::pair<int, int>>& nodes, double spacing);

/// (K_c / b + K_phi) z^n. Throws std::domain_error for b <= 0.
double bekker_pressure(double z, double b, const SoilParams& soil);
double bekker_pressure_slope(double z, double b, const SoilParams& soil);

double shear_strength(double p, const SoilParams& soil);
/// (c + p tan(phi)) (1 - exp(-j / k)).
double janosi_shear(double j, double p, const SoilParams& soil);

/// Elastic/plastic split for a node loaded to total sinkage (measured from
/// z0 + deposit). Sets sinkage fields and the static pressure; returns true
/// while the soil is yielding.
bool update_plasticity(SoilNode& node, double sinkage, double b, const SoilParams& soil);

struct NodeResponse {
  double normal_force = 0.0;          // N, along +z
  Vec2 tangential_force = Vec2::Zero();  // N, horizontal
  double vertical_stiffness = 0.0;    // dF/d(depth), N/m
  double vertical_damping = 0.0;      // dF/d(sink rate), N s/m
  Eigen::Matrix2d tangential_damping = Eigen::Matrix2d::Zero();
  double plastic_increment = 0.0;     // m
};

/// Full node update for a node pressed `depth` below its rest surface.
NodeResponse node_reaction(SoilNode& node, double depth, double sink_rate, const Vec2& slip,
                           double b, double spacing, const SoilParams& soil, double h);

struct ScmGridConfig {
  double spacing = 0.02;   // m
  double length_x = 2.0;   // m
  double length_y = 1.0;   // m
  double center_x = 0.0;
  double center_y = 0.0;
  double reference_z = 0.0;

  void validate() const;
};

/// A body as seen by the terrain: posed collision shapes and its twist.
struct ScmBody {
  int id = 0;
  std::vector<Shape> shapes;
  Vec3 origin = Vec3::Zero();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

struct BodyWrench {
  int body = 0;
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();  // about the body origin
  /// Linearization of the wrench with respect to the body twist
  /// [v; omega]: wrench(v) ~ wrench - damping * (twist - twist_0).
  Mat6 damping = Mat6::Zero();
  int nodes = 0;
  double patch_width = 0.0;
};

struct ScmStepStats {
  int contact_nodes = 0;
  double plastic_volume = 0.0;
  double eroded_volume = 0.0;
  double volume_before_erosion = 0.0;
  double volume_after_erosion = 0.0;
};

class ScmTerrain {
 public:
  ScmTerrain(ScmGridConfig grid, SoilParams soil, BulldozeParams bulldoze);

  /// One terrain update: ray casting, patches, node reactions, plastic flow
  /// and erosion. Returns one wrench per input body, in input order.
  std::vector<BodyWrench> update(const std::vector<ScmBody>& bodies, double h);

  /// Erosion sweeps over nodes within `rings` of the seed cells.
  void erode(const std::vector<std::pair<int, int>>& seeds);

  std::size_t node_count() const { return nodes_.size(); }
  const SoilNode* find(int i, int j) const;
  SoilNode& node_at(int i, int j);  // allocates on demand
  bool in_extent(int i, int j) const;
  std::pair<int, int> cell_of(double x, double y) const;
  Eigen::Vector2d position(int i, int j) const;
  double surface_height(double x, double y) const;

  /// Signed displaced volume sum (z0 - z) * spacing^2 over all nodes.
  double displaced_volume() const;
  /// Volume of material currently removed or added by soil flow alone.
  double deposit_volume() const;

  const ScmGridConfig& grid() const { return grid_; }
  const SoilParams& soil() const { return soil_; }
  const BulldozeParams& bulldoze() const { return bulldoze_; }
  const ScmStepStats& last_stats() const { return stats_; }

  /// CSV: i,j,x,y,z0,sinkage_plastic,sinkage_elastic,shear_j,pressure,deposit,z
  void write_heightmap(std::ostream& out) const;

  /// Nodes in deterministic (allocation) order.
  const std::vector<SoilNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<int, int>>& node_cells() const { return cells_; }

 private:
  static std::int64_t key(int i, int j) {
    return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
  }
  int index_of(int i, int j) const;

  ScmGridConfig grid_;
  SoilParams soil_;
  BulldozeParams bulldoze_;
  int nx_ = 0;
  int ny_ = 0;
  std::unordered_map<std::int64_t, int> lookup_;
  std::vector<SoilNode> nodes_;
  std::vector<std::pair<int, int>> cells_;
  std::vector<int> previous_contacts_;
  ScmStepStats stats_;
};

}  // namespace terrasim
