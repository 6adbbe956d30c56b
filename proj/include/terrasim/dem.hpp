#pragma once

// Discrete-element granular bed: sphere clumps with a history-dependent
// spring-dashpot contact, spatial-hash broad phase and explicit integration.

#include "terrasim/contact.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace terrasim {

struct DemMaterial {
  double E = 1e8;     // Pa
  double nu = 0.3;
  double cor = 0.1;
  double mu = 0.67;
  double c_rr = 0.05;

  void validate() const;
  static DemMaterial wheel() { return {1e9, 0.3, 0.4, 0.6, 0.02}; }
  static DemMaterial terrain() { return {1e8, 0.3, 0.1, 0.67, 0.05}; }
};

struct PairOverride {
  std::optional<double> mu;
  std::optional<double> cor;
};

enum class DampingModel {
  /// gamma = -ln e / sqrt(pi^2 + ln^2 e), exact for a linear oscillator that
  /// may pull on separation.
  kLogDecrement,
  /// Damping ratio calibrated so the non-adhesive (force-clamped) oscillator
  /// rebounds with exactly e.
  kClampedCalibrated,
};

struct PairParams {
  double k_n = 0.0;  // N/m
  double d_n = 0.0;  // N s/m
  double k_t = 0.0;  // N/m
  double d_t = 0.0;  // N s/m
  double mu = 0.0;
  double cor = 1.0;
  double c_rr = 0.0;
};

/// Throws ConfigError for e < 0.01 or non-positive R_eff / m_eff.
PairParams derive_pair_params(const DemMaterial& a, const DemMaterial& b, double R_eff,
                              double m_eff, const PairOverride& overrides = {},
                              DampingModel model = DampingModel::kLogDecrement);

double damping_ratio_log_decrement(double cor);
/// Rebound ratio of the unit linear oscillator with damping ratio zeta whose
/// force is clamped at zero (contact ends once the force vanishes).
double clamped_restitution(double zeta);
double damping_ratio_clamped(double cor);

struct ClumpTemplate {
  std::vector<Vec3> sphere_offsets;  // body frame, m
  std::vector<double> sphere_radii;  // m
  double mass = 0.0;                 // kg
  Vec3 inertia = Vec3::Zero();       // principal moments, kg m^2
  double volume = 0.0;               // m^3
  double bounding_radius = 0.0;      // m

  void validate() const;

  static ClumpTemplate single_sphere(double radius, double density);
  /// Three equal spheres at the corners of an equilateral triangle of side
  /// side_ratio * r in the body x-y plane. The radius is chosen so the union
  /// has `unscaled_volume` before scaling by `scale`.
  static ClumpTemplate triangle(double unscaled_volume, double scale, double density,
                                double side_ratio = 1.2);
};

/// Volume and principal inertia (unit density) of a union of spheres, by
/// midpoint quadrature on a regular grid with `cells` cells per axis.
std::pair<double, Mat3> sphere_union_moments(const std::vector<Vec3>& centers,
                                             const std::vector<double>& radii, int cells);

struct ClumpInstance {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  int template_id = 0;
  int material = 0;
  int id = -1;  // stable identifier, assigned by the world when negative
};

struct ContactHistory {
  std::uint64_t pair_key = 0;
  Vec3 xi = Vec3::Zero();
  int age = 0;
};

struct NormalContact {
  Vec3 force = Vec3::Zero();
  double overlap = 0.0;
  Vec3 normal = Vec3::UnitZ();
};

/// Force on sphere i from sphere j; the normal points from j to i and v_ij is
/// the velocity of i relative to j at the contact.
NormalContact dem_normal_force(const Vec3& x_i, const Vec3& x_j, double r_i, double r_j,
                               const Vec3& v_ij, double k_n, double d_n);

struct TangentialContact {
  Vec3 force = Vec3::Zero();
  bool slip = false;
};

TangentialContact dem_tangential_force(ContactHistory& history, const Vec3& v_t, double f_n,
                                       double k_t, double d_t, double mu, const Vec3& normal,
                                       double h, double eps_v = 1e-4);

Vec3 rolling_resistance_torque(double f_n, double R_eff, const Vec3& omega_rel, double c_rr);

/// HCP lattice with nearest-neighbour distance 2r inside [0, extents].
std::vector<Vec3> hcp_sample(const Vec3& extents, double radius);

struct SpherePair {
  int a = 0;
  int b = 0;
  bool operator==(const SpherePair& o) const { return a == o.a && b == o.b; }
  bool operator<(const SpherePair& o) const { return a != o.a ? a < o.a : b < o.b; }
};

/// Pairs (a < b) with different owners whose surfaces are closer than skin.
/// Sorted. cell_size must be at least 2 max(radius) + skin.
std::vector<SpherePair> broadphase_pairs(const std::vector<Vec3>& centers,
                                         const std::vector<double>& radii,
                                         const std::vector<int>& owner, double cell_size,
                                         double skin);

/// O(N^2) reference: every overlapping pair with different owners.
std::vector<SpherePair> brute_force_overlaps(const std::vector<Vec3>& centers,
                                             const std::vector<double>& radii,
                                             const std::vector<int>& owner);

struct DemWorldConfig {
  Vec3 domain = Vec3(1.0, 0.2, 0.5);  // m, slope frame
  double gravity = 9.8;               // m/s^2
  double slope = 24.0 * M_PI / 180.0; // rad, gravity tilted toward +x
  double h = 5e-6;                    // s
  double v_max = 20.0;                // m/s
  double v_error = 35.0;              // m/s
  int broadphase_period = 40;
  double cell_size = 0.0;             // m, 0 picks the smallest valid size
  bool floor = true;
  bool walls = true;
  double eps_v = 1e-4;
  DampingModel damping = DampingModel::kClampedCalibrated;
  int threads = 1;

  void validate() const;
  Vec3 gravity_vector() const;
};

/// Analytic cylinder driven by an external integrator.
struct DemWheel {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  double radius = 0.2;
  double half_length = 0.06;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double mass = 6.0;
  int material = 1;
};

struct WheelWrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();  // about the wheel centre
  int contacts = 0;
};

struct DemStepStats {
  int pair_contacts = 0;
  int boundary_contacts = 0;
  int deleted = 0;
  int clamped = 0;
  bool refreshed = false;
  /// Sum of all grain-grain pair forces; zero up to round-off.
  Vec3 internal_force_sum = Vec3::Zero();
};

struct DemEnergy {
  double kinetic = 0.0;
  double potential = 0.0;
  double elastic = 0.0;
  double total() const { return kinetic + potential + elastic; }
};

class DemWorld {
 public:
  /// Materials are indexed by ClumpInstance::material; boundaries use
  /// `boundary_material`.
  DemWorld(DemWorldConfig cfg, std::vector<ClumpTemplate> templates,
           std::vector<DemMaterial> materials, int boundary_material = 1);

  void set_pair_override(int material_a, int material_b, const PairOverride& o);
  int add_clump(ClumpInstance c);

  /// One explicit step. Forces are evaluated at the current state, the wheel
  /// (if any) is treated as a moving boundary and receives the returned
  /// reaction. Throws UnstableSimulation when a speed exceeds v_error.
  WheelWrench step(const DemWheel* wheel = nullptr);

  const std::vector<ClumpInstance>& clumps() const { return clumps_; }
  std::vector<ClumpInstance>& mutable_clumps() { return clumps_; }
  const std::vector<ClumpTemplate>& templates() const { return templates_; }
  const DemWorldConfig& config() const { return cfg_; }
  const DemStepStats& last_stats() const { return stats_; }
  double time() const { return time_; }
  long step_count() const { return steps_; }
  std::size_t sphere_count() const;

  /// Pair parameters used between two clump spheres or a sphere and a boundary.
  PairParams pair_params(int material_a, int material_b, double R_eff, double m_eff) const;

  DemEnergy energy() const;
  Vec3 total_momentum() const;
  double kinetic_energy() const;
  double total_mass() const;
  double solid_volume() const;
  /// Highest sphere top within |x - x0| <= half_window.
  double surface_height(double x0, double half_window) const;
  /// Max overlap / radius over all grain pairs (exhaustive check).
  double max_relative_overlap() const;

  /// Particle CSV: id,template,x,y,z,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz
  void write_particles(std::ostream& out) const;
  /// Replaces the clump list with the contents of a particle CSV.
  void read_particles(std::istream& in);

  /// Tilts gravity; used to settle a bed level before inclining it.
  void set_slope(double radians) { cfg_.slope = radians; }

  /// Forces a broad-phase rebuild on the next step.
  void invalidate_broadphase() { refresh_needed_ = true; }

 private:
  struct Candidate {
    int a = 0, b = 0;  // global sphere indices
    std::uint64_t key = 0;
    ContactHistory history;
    bool touching = false;
  };
  struct PairOutput {
    Vec3 force = Vec3::Zero();     // on sphere a
    Vec3 point = Vec3::Zero();
    Vec3 rolling = Vec3::Zero();   // torque on clump a
    bool touching = false;
  };
  static constexpr int kBoundarySlots = 6;  // 5 planes + wheel

  void rebuild_spheres();
  void rebuild_damping_table();
  void refresh_broadphase();
  std::uint64_t sphere_key(int sphere) const;
  void delete_escaped();
  Vec3 sphere_velocity(int sphere, const Vec3& point) const;
  const PairParams& template_pair(int sa, int sb) const;

  DemWorldConfig cfg_;
  std::vector<ClumpTemplate> templates_;
  std::vector<DemMaterial> materials_;
  int boundary_material_;
  std::map<std::pair<int, int>, PairOverride> overrides_;
  std::vector<double> zeta_;  // damping ratio per material pair

  std::vector<ClumpInstance> clumps_;
  int next_id_ = 0;

  // per-sphere derived data (global sphere index)
  std::vector<int> sphere_owner_;
  std::vector<int> sphere_local_;
  std::vector<int> clump_first_sphere_;
  std::vector<Vec3> sphere_pos_;
  std::vector<double> sphere_radius_;
  std::vector<Vec3> pos_at_refresh_;
  std::vector<std::array<ContactHistory, kBoundarySlots>> boundary_history_;

  std::vector<Candidate> candidates_;
  std::vector<PairOutput> pair_out_;
  double skin_ = 0.0;
  double cell_size_ = 0.0;
  double max_radius_ = 0.0;
  bool refresh_needed_ = true;
  long steps_since_refresh_ = 0;

  std::vector<Vec3> force_;
  std::vector<Vec3> torque_;
  double time_ = 0.0;
  long steps_ = 0;
  DemStepStats stats_;
};

struct SettleReport {
  double time = 0.0;
  double kinetic_energy = 0.0;
  bool converged = false;
  double packing_fraction = 0.0;
  std::vector<double> surface_profile;  // surface height in bins along x
};

/// Steps until kinetic energy falls below the threshold (checked every
/// check_every steps) or max_time elapses.
SettleReport settle_bed(DemWorld& world, double max_time, double ke_threshold,
                        int check_every = 200);

struct BedSpec {
  Vec3 extents = Vec3(1.0, 0.2, 0.08);  // m, region filled before settling
  double scale = 0.02;
  double template_volume = 4.2520508;   // m^3 before scaling
  double density = 2600.0;              // kg/m^3
  std::uint64_t seed = 1;
};

/// Clumps on an HCP lattice of their bounding spheres with random
/// orientations, seeded.
std::vector<ClumpInstance> generate_bed(const BedSpec& spec, const ClumpTemplate& tmpl,
                                        int template_id);

}  // namespace terrasim
