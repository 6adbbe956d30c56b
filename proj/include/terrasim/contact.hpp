#pragma once

// Point-contact force laws shared by every terrain tier.
//
// All quantities are SI. Tangential quantities live in the plane spanned by
// the two tangent columns of a ContactFrame and are stored as 2-vectors.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace terrasim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; `line` is 1-based (0 when not tied to a line).
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line)
      : ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a simulation state blows up (non-finite or beyond hard caps).
class UnstableSimulation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Orthonormal contact triad stored column-wise as R = [n t1 t2].
struct ContactFrame {
  Mat3 rotation = Mat3::Identity();

  Vec3 normal() const { return rotation.col(0); }
  Vec3 tangent1() const { return rotation.col(1); }
  Vec3 tangent2() const { return rotation.col(2); }
};

struct PenaltyMaterial {
  double k_n = 1e4;     // N/m
  double d_n = 1e2;     // N s/m
  double k_t = 1e4;     // N/m
  double d_t = 1e1;     // N s/m
  double mu = 0.5;
  double eps_v = 1e-4;  // m/s
  double alpha = 100.0; // 1/s, shear decay during slip / separation
  bool freeze_shear_in_slip = false;

  void validate() const;
};

/// Smoothed spring-damper law with velocity-weakening friction.
struct SmoothedContactParams {
  double k = 1e4;       // N/m
  double b = 1e3;       // N s/m
  double w = 1e-3;      // m
  double mu_s = 0.5;
  double mu_d = 0.3;
  double v_crit = 1e-3; // m/s
  double eps_v = 1e-4;  // m/s, direction regularizer

  void validate() const;
};

enum class Regime { kSeparated, kStick, kSlip };

struct ContactState {
  double gap = 0.0;
  double penetration = 0.0;
  double penetration_rate = 0.0;
  Vec2 shear = Vec2::Zero();
  bool active = false;

  /// Builds a state from a signed gap and its rate, keeping the shear.
  static ContactState from_gap(double gap, double gap_rate, const Vec2& shear);
};

struct ContactResult {
  double f_normal = 0.0;
  Vec2 f_tangent = Vec2::Zero();
  Vec3 world_force = Vec3::Zero();
  Regime regime = Regime::kSeparated;
  double power = 0.0;
};

struct TangentialForce {
  Vec2 force = Vec2::Zero();
  Regime regime = Regime::kStick;
};

ContactFrame build_contact_frame(const Vec3& normal);

double normal_force_penalty(const ContactState& state, const PenaltyMaterial& mat);

TangentialForce tangential_force(const ContactState& state, const Vec2& u_t,
                                 double f_n, const PenaltyMaterial& mat);

/// Advances the tangential spring state by one step of length h.
/// Throws ConfigError when h * alpha >= 1.
Vec2 update_shear_state(const ContactState& state, const Vec2& u_t, Regime regime,
                        double h, const PenaltyMaterial& mat);

Vec3 assemble_world_force(const ContactFrame& frame, double f_n, const Vec2& f_t);

/// Cubic smoothstep 3x^2 - 2x^3 on x = d / w, clamped to [0, 1].
double smoothstep(double d, double w);
double smoothstep_derivative(double d, double w);

double normal_force_smoothed(double d, double d_rate, const SmoothedContactParams& p);

double mu_effective(double u_t, const SmoothedContactParams& p);
double mu_effective_derivative(double u_t, const SmoothedContactParams& p);

/// Tangential force of the smoothed law: magnitude mu_eff(|u|) f_n, direction
/// -u / sqrt(|u|^2 + eps_v^2).
Vec2 tangential_force_smoothed(const Vec2& u_t, double f_n, const SmoothedContactParams& p);

/// Elastic energy stored by the smoothed normal spring at penetration d.
double smoothed_spring_energy(double d, const SmoothedContactParams& p);

double contact_power(const ContactResult& result, double u_n, const Vec2& u_t);

/// Full penalty evaluation: normal law, friction, world assembly and power.
ContactResult resolve_penalty(const ContactFrame& frame, const ContactState& state,
                              double u_n, const Vec2& u_t, const PenaltyMaterial& mat);

ContactResult resolve_smoothed(const ContactFrame& frame, double penetration,
                               double penetration_rate, const Vec2& u_t,
                               const SmoothedContactParams& p);

}  // namespace terrasim
