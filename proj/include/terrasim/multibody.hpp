#pragma once

// Generalized-coordinate body models and the semi-implicit Euler stepper.
//
// Every model lives in 3-D world coordinates; the planar models simply keep
// their motion in the x-z plane (y = 0) and rotate about the world y axis.

#include "terrasim/contact.hpp"
#include "terrasim/geometry.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace terrasim {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A contact sphere attached to a body: its centre, the Jacobians of the
/// centre velocity and of the owning body's angular velocity, and its radius.
struct ContactSphere {
  Vec3 center = Vec3::Zero();
  Mat3X center_jacobian;
  Mat3X angular_jacobian;
  double radius = 0.0;
  int body = 0;
};

struct BodyPose {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

class BodyModel {
 public:
  virtual ~BodyModel() = default;

  virtual int dof() const = 0;
  virtual int actuator_count() const = 0;
  virtual std::string name() const = 0;

  virtual MatX mass_matrix(const VecX& q) const = 0;
  /// H(q, v) = C(q, v) v + G(q) for the given gravity vector.
  virtual VecX bias(const VecX& q, const VecX& v, const Vec3& gravity) const = 0;
  /// d(C(q, v) v) / dv. Default: central differences of bias().
  virtual MatX bias_velocity_jacobian(const VecX& q, const VecX& v) const;
  virtual MatX actuation_map(const VecX& q) const = 0;
  virtual double potential_energy(const VecX& q, const Vec3& gravity) const = 0;

  virtual int contact_count() const = 0;
  virtual ContactSphere contact_sphere(const VecX& q, int index) const = 0;

  virtual int body_count() const = 0;
  virtual BodyPose body_pose(const VecX& q, int body) const = 0;
  /// 6 x n map from v to [origin linear velocity; angular velocity].
  virtual Mat6X body_jacobian(const VecX& q, int body) const = 0;
  virtual std::vector<Shape> collision_shapes(const VecX& q) const = 0;

  double kinetic_energy(const VecX& q, const VecX& v) const {
    return 0.5 * v.dot(mass_matrix(q) * v);
  }
};

/// Free particle with q = (x, y, z); actuators are the three force components.
class PointMass final : public BodyModel {
 public:
  explicit PointMass(double mass, double radius = 0.0);

  int dof() const override { return 3; }
  int actuator_count() const override { return 3; }
  std::string name() const override { return "point-mass"; }
  MatX mass_matrix(const VecX& q) const override;
  VecX bias(const VecX& q, const VecX& v, const Vec3& gravity) const override;
  MatX bias_velocity_jacobian(const VecX& q, const VecX& v) const override;
  MatX actuation_map(const VecX& q) const override;
  double potential_energy(const VecX& q, const Vec3& gravity) const override;
  int contact_count() const override { return 1; }
  ContactSphere contact_sphere(const VecX& q, int index) const override;
  int body_count() const override { return 1; }
  BodyPose body_pose(const VecX& q, int body) const override;
  Mat6X body_jacobian(const VecX& q, int body) const override;
  std::vector<Shape> collision_shapes(const VecX& q) const override;

  double mass() const { return mass_; }

 private:
  double mass_;
  double radius_;
};

enum class JointAxis { kPitch, kFixed };

struct PlanarChainParams {
  int links = 5;
  double link_length = 0.15;  // m
  double link_mass = 0.6;     // kg
  double link_radius = 0.03;  // m, half-thickness of the capsule
  std::vector<JointAxis> joints;  // links - 1 entries; empty means all pitch
};

/// Floating-base chain in the x-z plane. Coordinates are
/// (x, z, theta) of link 0's centre and heading, followed by one relative
/// angle per pitch joint. Positive angles rotate about +y.
class PlanarChain final : public BodyModel {
 public:
  explicit PlanarChain(PlanarChainParams params);

  int dof() const override { return 3 + static_cast<int>(active_joints_.size()); }
  int actuator_count() const override { return static_cast<int>(active_joints_.size()); }
  std::string name() const override { return "planar-chain"; }
  MatX mass_matrix(const VecX& q) const override;
  VecX bias(const VecX& q, const VecX& v, const Vec3& gravity) const override;
  MatX bias_velocity_jacobian(const VecX& q, const VecX& v) const override;
  MatX actuation_map(const VecX& q) const override;
  double potential_energy(const VecX& q, const Vec3& gravity) const override;
  int contact_count() const override { return 2 * params_.links + 1; }
  ContactSphere contact_sphere(const VecX& q, int index) const override;
  int body_count() const override { return params_.links; }
  BodyPose body_pose(const VecX& q, int body) const override;
  Mat6X body_jacobian(const VecX& q, int body) const override;
  std::vector<Shape> collision_shapes(const VecX& q) const override;

  const PlanarChainParams& params() const { return params_; }
  double link_inertia() const { return link_inertia_; }
  double total_mass() const { return params_.link_mass * params_.links; }
  Vec3 center_of_mass(const VecX& q) const;
  /// Configuration with link 0 centred at (x, z), heading 0, straight joints.
  VecX straight_configuration(double x, double z) const;

 private:
  struct PointKinematics {
    Vec3 position;
    Mat3X jacobian;
    Vec3 accel_bias;  // Jdot * v
  };

  std::vector<double> absolute_angles(const VecX& q) const;
  // For each link k, the rows of v that drive its absolute angle.
  Eigen::RowVectorXd angle_row(int link) const;
  PointKinematics point_on_link(const VecX& q, const VecX* v, int link, double s) const;

  PlanarChainParams params_;
  std::vector<int> active_joints_;   // joint index -> coordinate offset
  std::vector<int> coordinate_of_joint_;  // -1 for fixed joints
  double link_inertia_;
};

/// Planar rigid wheel rolling in the x-z plane, q = (x, z, theta).
struct WheelParams {
  double radius = 0.20;  // m
  double width = 0.12;   // m
  double mass = 6.0;     // kg
};

class RollingWheel final : public BodyModel {
 public:
  explicit RollingWheel(WheelParams params);

  int dof() const override { return 3; }
  int actuator_count() const override { return 1; }
  std::string name() const override { return "rolling-wheel"; }
  MatX mass_matrix(const VecX& q) const override;
  VecX bias(const VecX& q, const VecX& v, const Vec3& gravity) const override;
  MatX bias_velocity_jacobian(const VecX& q, const VecX& v) const override;
  MatX actuation_map(const VecX& q) const override;
  double potential_energy(const VecX& q, const Vec3& gravity) const override;
  int contact_count() const override { return 1; }
  ContactSphere contact_sphere(const VecX& q, int index) const override;
  int body_count() const override { return 1; }
  BodyPose body_pose(const VecX& q, int body) const override;
  Mat6X body_jacobian(const VecX& q, int body) const override;
  std::vector<Shape> collision_shapes(const VecX& q) const override;

  const WheelParams& params() const { return params_; }
  /// Principal moments (I_xx, I_yy, I_zz); I_yy is the spin axis.
  Vec3 principal_inertia() const { return inertia_; }

 private:
  WheelParams params_;
  Vec3 inertia_;
};

std::unique_ptr<PlanarChain> make_planar_chain(int n_links, double link_length, double link_mass,
                                               const std::vector<JointAxis>& joints = {},
                                               double link_radius = 0.03);
std::unique_ptr<RollingWheel> make_rolling_wheel(double radius, double width, double mass);

// ---------------------------------------------------------------------------
// Rigid terrain queries used by the stepper.

struct SurfaceQuery {
  double distance = 0.0;  // signed distance of the point above the surface
  Vec3 normal = Vec3::UnitZ();
};

class RigidTerrain {
 public:
  virtual ~RigidTerrain() = default;
  virtual SurfaceQuery query(const Vec3& point) const = 0;
};

class PlaneTerrain final : public RigidTerrain {
 public:
  PlaneTerrain(const Vec3& point, const Vec3& normal);
  SurfaceQuery query(const Vec3& point) const override;

 private:
  Vec3 point_;
  Vec3 normal_;
};

using ContactLaw = std::variant<PenaltyMaterial, SmoothedContactParams>;

// ---------------------------------------------------------------------------
// Stepper.

struct GeneralizedState {
  VecX q;
  VecX v;
  std::vector<ContactState> contacts;
  double t = 0.0;

  static GeneralizedState at_rest(const BodyModel& model, const VecX& q);
};

struct StepperConfig {
  double h = 1e-3;
  int fp_max_iters = 10;
  double fp_tol = 1e-10;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  void validate() const;
};

/// Generalized load Q(v) = force - damping * (v - v_k) applied over one step.
/// The damping term lets explicit terrain couplings be treated implicitly.
struct ExternalLoad {
  VecX force;
  MatX damping;
};

/// Coordinates whose velocity is imposed for the step.
struct PrescribedVelocity {
  std::vector<int> index;
  std::vector<double> velocity;
};

struct StepDiagnostics {
  int iterations = 0;
  bool converged = true;
  double last_update = 0.0;
  std::vector<ContactResult> contacts;
  double normal_force_total = 0.0;
  double contact_power = 0.0;
  int active_contacts = 0;
  /// Generalized force needed to hold the prescribed velocities.
  VecX prescribed_force;
};

struct StepResult {
  GeneralizedState state;
  StepDiagnostics diagnostics;
};

struct StepInputs {
  const RigidTerrain* terrain = nullptr;
  const ContactLaw* law = nullptr;
  const ExternalLoad* external = nullptr;
  const PrescribedVelocity* prescribed = nullptr;
};

StepResult step_semi_implicit(const GeneralizedState& state, const VecX& tau,
                              const BodyModel& model, const StepInputs& inputs,
                              const StepperConfig& cfg);

struct GapJacobian {
  double gap = 0.0;
  VecX gradient;  // W = dg/dq
  Mat3X jacobian; // velocity of the contact material point
  Vec3 normal = Vec3::UnitZ();
};

GapJacobian gap_and_jacobian(const BodyModel& model, const VecX& q, int contact_index,
                             const RigidTerrain& terrain);

struct ContactVelocity {
  double u_n = 0.0;
  Vec2 u_t = Vec2::Zero();
};

ContactVelocity contact_kinematics(const BodyModel& model, const VecX& q, const VecX& v,
                                   int contact_index, const ContactFrame& frame,
                                   const RigidTerrain& terrain);

struct EnergyBreakdown {
  double kinetic = 0.0;
  double potential = 0.0;
  double contact_elastic = 0.0;
  double total() const { return kinetic + potential + contact_elastic; }
};

EnergyBreakdown total_mechanical_energy(const GeneralizedState& state, const BodyModel& model,
                                        const ContactLaw& law, const RigidTerrain& terrain,
                                        const Vec3& gravity);

/// Skew-symmetric cross-product matrix.
Mat3 skew(const Vec3& a);

}  // namespace terrasim
