#include "terrasim/multibody.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace terrasim {
namespace {

struct ContactPoint {
  double gap = 0.0;
  Vec3 normal = Vec3::UnitZ();
  Mat3X jacobian;
};

ContactPoint locate(const BodyModel& model, const VecX& q, int index, const RigidTerrain& terrain) {
  const ContactSphere s = model.contact_sphere(q, index);
  const SurfaceQuery sq = terrain.query(s.center);
  ContactPoint cp;
  cp.gap = sq.distance - s.radius;
  cp.normal = sq.normal;
  // Material point sits at centre - r n; its velocity picks up r n x omega.
  cp.jacobian = s.center_jacobian + s.radius * skew(sq.normal) * s.angular_jacobian;
  return cp;
}

struct LocalResponse {
  ContactResult result;
  ContactState state;
  Mat3 derivative = Mat3::Zero();  // d f_local / d u_local, frame order (n, t1, t2)
};

LocalResponse respond(const PenaltyMaterial& mat, const ContactFrame& frame, double gap,
                      double u_n, const Vec2& u_t, const Vec2& shear, double h) {
  LocalResponse out;
  out.state = ContactState::from_gap(gap, u_n, shear);
  out.result = resolve_penalty(frame, out.state, u_n, u_t, mat);
  if (!out.state.active) return out;

  const double f_n = out.result.f_normal;
  double dfn_dun = 0.0;
  if (f_n > 0.0) dfn_dun = -(mat.d_n + h * mat.k_n);
  out.derivative(0, 0) = dfn_dun;
  if (out.result.regime == Regime::kStick) {
    out.derivative.block<2, 2>(1, 1) = -mat.d_t * Eigen::Matrix2d::Identity();
  } else {
    const double speed = u_t.norm();
    const double denom = std::max(speed, mat.eps_v);
    const Vec2 dir = u_t / denom;
    Eigen::Matrix2d dt = Eigen::Matrix2d::Identity();
    if (speed > mat.eps_v) dt -= dir * dir.transpose();
    out.derivative.block<2, 2>(1, 1) = -mat.mu * f_n / denom * dt;
    out.derivative.block<2, 1>(1, 0) = -mat.mu * dir * dfn_dun;
  }
  return out;
}

LocalResponse respond(const SmoothedContactParams& p, const ContactFrame& frame, double gap,
                      double u_n, const Vec2& u_t, const Vec2& shear, double h) {
  LocalResponse out;
  out.state = ContactState::from_gap(gap, u_n, shear);
  const double d = out.state.penetration;
  const double d_rate = out.state.penetration_rate;
  out.result = resolve_smoothed(frame, d, d_rate, u_t, p);
  if (!(d > 0.0)) return out;

  const double f_n = out.result.f_normal;
  const double raw = p.k * d + p.b * d_rate;
  double dfn_dun = 0.0;
  if (raw > 0.0) {
    const double s = smoothstep(d, p.w);
    const double dfn_dd = smoothstep_derivative(d, p.w) * raw + s * p.k;
    const double dfn_drate = s * p.b;
    dfn_dun = -(dfn_drate + h * dfn_dd);
  }
  out.derivative(0, 0) = dfn_dun;
  if (f_n > 0.0) {
    const double speed = u_t.norm();
    const double reg = std::sqrt(speed * speed + p.eps_v * p.eps_v);
    const double mu = mu_effective(speed, p);
    Eigen::Matrix2d dt = mu / reg * (Eigen::Matrix2d::Identity() - u_t * u_t.transpose() / (reg * reg));
    if (speed > 0.0) dt += mu_effective_derivative(speed, p) * u_t * u_t.transpose() / (speed * reg);
    out.derivative.block<2, 2>(1, 1) = -f_n * dt;
    out.derivative.block<2, 1>(1, 0) = -mu * u_t / reg * dfn_dun;
  }
  return out;
}

struct Evaluation {
  VecX residual;
  MatX tangent;
  std::vector<LocalResponse> responses;
  std::vector<Vec2> tangential_velocity;
};

Evaluation evaluate(const GeneralizedState& state, const VecX& generalized_tau,
                    const BodyModel& model, const StepInputs& inputs, const StepperConfig& cfg,
                    const VecX& v) {
  const double h = cfg.h;
  const VecX q = state.q + h * v;
  const MatX m = model.mass_matrix(q);

  VecX force = generalized_tau - model.bias(q, v, cfg.gravity);
  MatX tangent = m + h * model.bias_velocity_jacobian(q, v);

  if (inputs.external != nullptr) {
    const ExternalLoad& ext = *inputs.external;
    force += ext.force;
    if (ext.damping.size() > 0) {
      force -= ext.damping * (v - state.v);
      tangent += h * ext.damping;
    }
  }

  Evaluation ev;
  if (inputs.terrain != nullptr && inputs.law != nullptr) {
    const int nc = model.contact_count();
    ev.responses.resize(nc);
    ev.tangential_velocity.resize(nc);
    for (int i = 0; i < nc; ++i) {
      const ContactPoint cp = locate(model, q, i, *inputs.terrain);
      const ContactFrame frame = build_contact_frame(cp.normal);
      const Vec3 u = cp.jacobian * v;
      const double u_n = frame.normal().dot(u);
      const Vec2 u_t(frame.tangent1().dot(u), frame.tangent2().dot(u));
      const Vec2 shear = i < static_cast<int>(state.contacts.size()) ? state.contacts[i].shear
                                                                     : Vec2::Zero();
      LocalResponse lr = std::visit(
          [&](const auto& law) { return respond(law, frame, cp.gap, u_n, u_t, shear, h); },
          *inputs.law);
      if (lr.state.active) {
        force += cp.jacobian.transpose() * lr.result.world_force;
        const Mat3 world_derivative = frame.rotation * lr.derivative * frame.rotation.transpose();
        tangent -= h * cp.jacobian.transpose() * world_derivative * cp.jacobian;
      }
      ev.responses[i] = std::move(lr);
      ev.tangential_velocity[i] = u_t;
    }
  }

  ev.residual = m * (v - state.v) - h * force;
  ev.tangent = std::move(tangent);
  return ev;
}

}  // namespace

void StepperConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("stepper: h must be positive");
  if (fp_max_iters < 1) throw ConfigError("stepper: fp_max_iters must be at least 1");
  if (!(fp_tol > 0.0)) throw ConfigError("stepper: fp_tol must be positive");
  if (!gravity.allFinite()) throw ConfigError("stepper: gravity must be finite");
}

GeneralizedState GeneralizedState::at_rest(const BodyModel& model, const VecX& q) {
  if (q.size() != model.dof()) throw ModelError("state: q has the wrong dimension");
  GeneralizedState s;
  s.q = q;
  s.v = VecX::Zero(model.dof());
  s.contacts.assign(model.contact_count(), ContactState{});
  return s;
}

StepResult step_semi_implicit(const GeneralizedState& state, const VecX& tau,
                              const BodyModel& model, const StepInputs& inputs,
                              const StepperConfig& cfg) {
  const int n = model.dof();
  if (state.q.size() != n || state.v.size() != n) {
    throw ModelError("step: state dimension does not match the model");
  }
  if (tau.size() != model.actuator_count()) {
    throw ModelError("step: actuator vector has the wrong dimension");
  }
  if (!state.q.allFinite() || !state.v.allFinite()) {
    throw UnstableSimulation("step: non-finite state");
  }

  const VecX generalized_tau = model.actuation_map(state.q) * tau;

  std::vector<char> fixed(n, 0);
  VecX v = state.v;
  if (inputs.prescribed != nullptr) {
    const auto& pv = *inputs.prescribed;
    for (std::size_t k = 0; k < pv.index.size(); ++k) {
      const int idx = pv.index[k];
      if (idx < 0 || idx >= n) throw ModelError("step: prescribed index out of range");
      fixed[idx] = 1;
      v(idx) = pv.velocity[k];
    }
  }
  std::vector<int> free_idx;
  for (int i = 0; i < n; ++i) {
    if (!fixed[i]) free_idx.push_back(i);
  }
  const int nf = static_cast<int>(free_idx.size());

  StepResult out;
  StepDiagnostics& diag = out.diagnostics;
  diag.converged = false;

  auto free_residual = [&](const Evaluation& e) {
    VecX r(nf);
    for (int i = 0; i < nf; ++i) r(i) = e.residual(free_idx[i]);
    return r;
  };

  // Newton iterations with a backtracking line search on the residual norm.
  // The regularized friction direction is sigmoid-shaped around zero slip, so
  // full Newton steps can oscillate between stick and slip.
  Evaluation ev = evaluate(state, generalized_tau, model, inputs, cfg, v);
  for (int it = 0; it < cfg.fp_max_iters && nf > 0; ++it) {
    const VecX r = free_residual(ev);
    MatX a(nf, nf);
    for (int i = 0; i < nf; ++i) {
      for (int j = 0; j < nf; ++j) a(i, j) = ev.tangent(free_idx[i], free_idx[j]);
    }
    const VecX dv = a.partialPivLu().solve(r);
    if (!dv.allFinite()) throw UnstableSimulation("step: singular iteration matrix");
    const double r0 = r.norm();

    double alpha = 1.0;
    VecX v_try = v;
    Evaluation ev_try;
    for (int ls = 0; ls < 12; ++ls) {
      v_try = v;
      for (int i = 0; i < nf; ++i) v_try(free_idx[i]) -= alpha * dv(i);
      ev_try = evaluate(state, generalized_tau, model, inputs, cfg, v_try);
      if (free_residual(ev_try).norm() <= (1.0 - 1e-4 * alpha) * r0) break;
      alpha *= 0.5;
    }
    v = v_try;
    ev = std::move(ev_try);
    diag.iterations = it + 1;
    diag.last_update = alpha * dv.cwiseAbs().maxCoeff();
    if (!v.allFinite()) throw UnstableSimulation("step: velocity became non-finite");
    if (diag.last_update <= cfg.fp_tol) {
      diag.converged = true;
      break;
    }
  }
  if (nf == 0) diag.converged = true;

  GeneralizedState& next = out.state;
  next.q = state.q + cfg.h * v;
  next.v = v;
  next.t = state.t + cfg.h;
  next.contacts.assign(model.contact_count(), ContactState{});

  diag.prescribed_force = VecX::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (fixed[i]) diag.prescribed_force(i) = ev.residual(i) / cfg.h;
  }

  diag.contacts.reserve(ev.responses.size());
  for (std::size_t i = 0; i < ev.responses.size(); ++i) {
    const LocalResponse& lr = ev.responses[i];
    ContactState cs = lr.state;
    if (const auto* mat = std::get_if<PenaltyMaterial>(inputs.law)) {
      cs.shear = update_shear_state(lr.state, ev.tangential_velocity[i], lr.result.regime, cfg.h, *mat);
    } else {
      cs.shear = Vec2::Zero();
    }
    next.contacts[i] = cs;
    diag.normal_force_total += lr.result.f_normal;
    diag.contact_power += lr.result.power;
    if (lr.result.f_normal > 0.0) ++diag.active_contacts;
    diag.contacts.push_back(lr.result);
  }
  return out;
}

GapJacobian gap_and_jacobian(const BodyModel& model, const VecX& q, int contact_index,
                             const RigidTerrain& terrain) {
  if (contact_index < 0 || contact_index >= model.contact_count()) {
    throw std::out_of_range("gap_and_jacobian: contact index");
  }
  const ContactSphere s = model.contact_sphere(q, contact_index);
  const ContactPoint cp = locate(model, q, contact_index, terrain);
  GapJacobian gj;
  gj.gap = cp.gap;
  gj.normal = cp.normal;
  gj.jacobian = cp.jacobian;
  gj.gradient = s.center_jacobian.transpose() * cp.normal;
  return gj;
}

ContactVelocity contact_kinematics(const BodyModel& model, const VecX& q, const VecX& v,
                                   int contact_index, const ContactFrame& frame,
                                   const RigidTerrain& terrain) {
  const ContactPoint cp = locate(model, q, contact_index, terrain);
  const Vec3 u = cp.jacobian * v;
  ContactVelocity cv;
  cv.u_n = frame.normal().dot(u);
  cv.u_t = Vec2(frame.tangent1().dot(u), frame.tangent2().dot(u));
  return cv;
}

EnergyBreakdown total_mechanical_energy(const GeneralizedState& state, const BodyModel& model,
                                        const ContactLaw& law, const RigidTerrain& terrain,
                                        const Vec3& gravity) {
  EnergyBreakdown e;
  e.kinetic = model.kinetic_energy(state.q, state.v);
  e.potential = model.potential_energy(state.q, gravity);
  for (int i = 0; i < model.contact_count(); ++i) {
    const ContactPoint cp = locate(model, state.q, i, terrain);
    const double d = std::max(0.0, -cp.gap);
    if (const auto* mat = std::get_if<PenaltyMaterial>(&law)) {
      e.contact_elastic += 0.5 * mat->k_n * d * d;
      if (i < static_cast<int>(state.contacts.size())) {
        e.contact_elastic += 0.5 * mat->k_t * state.contacts[i].shear.squaredNorm();
      }
    } else {
      e.contact_elastic += smoothed_spring_energy(d, std::get<SmoothedContactParams>(law));
    }
  }
  return e;
}

PlaneTerrain::PlaneTerrain(const Vec3& point, const Vec3& normal) : point_(point) {
  const double len = normal.norm();
  if (!(len > 1e-12)) throw DegenerateInput("plane terrain: zero normal");
  normal_ = normal / len;
}

SurfaceQuery PlaneTerrain::query(const Vec3& point) const {
  SurfaceQuery sq;
  sq.distance = normal_.dot(point - point_);
  sq.normal = normal_;
  return sq;
}

}  // namespace terrasim
