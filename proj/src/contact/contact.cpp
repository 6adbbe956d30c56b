#include "terrasim/contact.hpp"

#include <algorithm>
#include <cmath>

namespace terrasim {

void PenaltyMaterial::validate() const {
  if (k_n < 0 || d_n < 0 || k_t < 0 || d_t < 0 || mu < 0 || alpha < 0) {
    throw ConfigError("penalty material: parameters must be non-negative");
  }
  if (mu > 2.0) {
    throw ConfigError("penalty material: friction coefficient above 2");
  }
  if (!(eps_v > 0)) {
    throw ConfigError("penalty material: eps_v must be positive");
  }
}

void SmoothedContactParams::validate() const {
  if (!(w > 0)) throw ConfigError("smoothed contact: width w must be positive");
  if (!(v_crit > 0)) throw ConfigError("smoothed contact: v_crit must be positive");
  if (!(eps_v > 0)) throw ConfigError("smoothed contact: eps_v must be positive");
  if (mu_d > mu_s) throw ConfigError("smoothed contact: mu_d exceeds mu_s");
  if (k < 0 || b < 0 || mu_d < 0) {
    throw ConfigError("smoothed contact: parameters must be non-negative");
  }
}

ContactState ContactState::from_gap(double gap, double gap_rate, const Vec2& shear) {
  ContactState s;
  s.gap = gap;
  s.penetration = std::max(0.0, -gap);
  s.penetration_rate = -gap_rate;
  s.shear = shear;
  s.active = s.penetration > 0.0;
  return s;
}

ContactFrame build_contact_frame(const Vec3& normal) {
  const double len = normal.norm();
  if (!(len > 1e-12)) {
    throw DegenerateInput("build_contact_frame: zero-length normal");
  }
  const Vec3 n = normal / len;

  // Seed with the world axis least aligned with n.
  int axis = 0;
  const Vec3 a = n.cwiseAbs();
  if (a.y() < a(axis)) axis = 1;
  if (a.z() < a(axis)) axis = 2;
  Vec3 seed = Vec3::Zero();
  seed(axis) = 1.0;

  // n = +z yields t1 = +x, t2 = +y.
  Vec3 t2 = n.cross(seed).normalized();
  Vec3 t1 = t2.cross(n);
  t1.normalize();

  ContactFrame f;
  f.rotation.col(0) = n;
  f.rotation.col(1) = t1;
  f.rotation.col(2) = t2;
  return f;
}

double normal_force_penalty(const ContactState& state, const PenaltyMaterial& mat) {
  if (!(state.penetration > 0.0)) return 0.0;
  return std::max(0.0, mat.k_n * state.penetration + mat.d_n * state.penetration_rate);
}

TangentialForce tangential_force(const ContactState& state, const Vec2& u_t, double f_n,
                                 const PenaltyMaterial& mat) {
  const Vec2 proposed = -mat.k_t * state.shear - mat.d_t * u_t;
  const double cap = mat.mu * f_n;
  if (proposed.norm() <= cap) return {proposed, Regime::kStick};
  const double speed = std::max(u_t.norm(), mat.eps_v);
  return {-cap * u_t / speed, Regime::kSlip};
}

Vec2 update_shear_state(const ContactState& state, const Vec2& u_t, Regime regime, double h,
                        const PenaltyMaterial& mat) {
  if (!(h > 0)) throw ConfigError("update_shear_state: step must be positive");
  if (h * mat.alpha >= 1.0) {
    throw ConfigError("update_shear_state: h * alpha >= 1 overshoots the shear decay");
  }
  if (state.active && regime == Regime::kStick) return state.shear + h * u_t;
  if (state.active && regime == Regime::kSlip && mat.freeze_shear_in_slip) return state.shear;
  return (1.0 - h * mat.alpha) * state.shear;
}

Vec3 assemble_world_force(const ContactFrame& frame, double f_n, const Vec2& f_t) {
  return frame.normal() * f_n + frame.tangent1() * f_t.x() + frame.tangent2() * f_t.y();
}

double smoothstep(double d, double w) {
  if (d <= 0.0) return 0.0;
  if (d >= w) return 1.0;
  const double x = d / w;
  return x * x * (3.0 - 2.0 * x);
}

double smoothstep_derivative(double d, double w) {
  if (d <= 0.0 || d >= w) return 0.0;
  const double x = d / w;
  return 6.0 * x * (1.0 - x) / w;
}

double normal_force_smoothed(double d, double d_rate, const SmoothedContactParams& p) {
  const double s = smoothstep(d, p.w);
  if (s == 0.0) return 0.0;
  return s * std::max(0.0, p.k * d + p.b * d_rate);
}

double mu_effective(double u_t, const SmoothedContactParams& p) {
  return p.mu_d + (p.mu_s - p.mu_d) * std::exp(-u_t / p.v_crit);
}

double mu_effective_derivative(double u_t, const SmoothedContactParams& p) {
  return -(p.mu_s - p.mu_d) / p.v_crit * std::exp(-u_t / p.v_crit);
}

Vec2 tangential_force_smoothed(const Vec2& u_t, double f_n, const SmoothedContactParams& p) {
  const double speed = u_t.norm();
  if (f_n <= 0.0 || speed == 0.0) return Vec2::Zero();
  const double reg = std::sqrt(speed * speed + p.eps_v * p.eps_v);
  return -mu_effective(speed, p) * f_n * u_t / reg;
}

double smoothed_spring_energy(double d, const SmoothedContactParams& p) {
  if (d <= 0.0) return 0.0;
  const double w = p.w;
  if (d >= w) return 0.5 * p.k * d * d - 0.15 * p.k * w * w;
  // Integral of k x (3x^2/w^2 - 2x^3/w^3) from 0 to d.
  const double d4 = d * d * d * d;
  return p.k * (0.75 * d4 / (w * w) - 0.4 * d4 * d / (w * w * w));
}

double contact_power(const ContactResult& result, double u_n, const Vec2& u_t) {
  return result.f_normal * u_n + result.f_tangent.dot(u_t);
}

ContactResult resolve_penalty(const ContactFrame& frame, const ContactState& state, double u_n,
                              const Vec2& u_t, const PenaltyMaterial& mat) {
  ContactResult r;
  if (!state.active) return r;
  r.f_normal = normal_force_penalty(state, mat);
  const TangentialForce tf = tangential_force(state, u_t, r.f_normal, mat);
  r.f_tangent = tf.force;
  r.regime = tf.regime;
  r.world_force = assemble_world_force(frame, r.f_normal, r.f_tangent);
  r.power = contact_power(r, u_n, u_t);
  return r;
}

ContactResult resolve_smoothed(const ContactFrame& frame, double penetration,
                               double penetration_rate, const Vec2& u_t,
                               const SmoothedContactParams& p) {
  ContactResult r;
  if (!(penetration > 0.0)) return r;
  r.f_normal = normal_force_smoothed(penetration, penetration_rate, p);
  r.f_tangent = tangential_force_smoothed(u_t, r.f_normal, p);
  r.regime = u_t.norm() < p.v_crit ? Regime::kStick : Regime::kSlip;
  r.world_force = assemble_world_force(frame, r.f_normal, r.f_tangent);
  r.power = contact_power(r, -penetration_rate, u_t);
  return r;
}

}  // namespace terrasim
