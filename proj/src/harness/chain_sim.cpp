#include "terrasim/chain_sim.hpp"

#include <cmath>
#include <string>

namespace terrasim {

void ChainSimSpec::validate() const {
  if (chain.links < 2) throw ConfigError("chain needs at least two links");
  if (!(h > 0.0)) throw ConfigError("timestep must be > 0");
  if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
  if (!(settle >= 0.0)) throw ConfigError("settle time must be >= 0");
  if (!(kp >= 0.0) || !(kd >= 0.0)) throw ConfigError("PD gains must be >= 0");
  if (!(drop_height >= 0.0)) throw ConfigError("drop height must be >= 0");
  if (tier == Tier::kDem) throw ConfigError("the chain does not run on DEM terrain");
  if (gait_enabled) {
    gait.validate();
    const int joints = trajectory ? trajectory->joints() : gait.n_joints;
    if (joints != chain.links - 1)
      throw ConfigError("gait joint count " + std::to_string(joints) + " does not match " +
                        std::to_string(chain.links - 1) + " chain joints");
  }
  ground.validate();
  if (tier == Tier::kScm) {
    grid.validate();
    soil.validate();
    bulldoze.validate();
  }
}

long ChainSimSpec::steps() const { return std::lround(duration / h); }

VecX chain_joint_targets(const ChainSimSpec& spec, double t, VecX* rates) {
  const int n = spec.chain.links - 1;
  VecX q = VecX::Zero(n);
  if (rates) *rates = VecX::Zero(n);
  if (!spec.gait_enabled || t < spec.settle) return q;
  const double tg = t - spec.settle;
  if (spec.trajectory) {
    q = spec.trajectory->sample(tg);
    if (rates) {
      const double e = 0.5 * spec.h;
      *rates = (spec.trajectory->sample(tg + e) - spec.trajectory->sample(std::max(0.0, tg - e))) /
               (tg + e - std::max(0.0, tg - e));
    }
    return q;
  }
  q = gait_sample(spec.gait, tg);
  if (rates) *rates = gait_velocity(spec.gait, tg);
  return q;
}

namespace {

ScmBody link_body(const PlanarChain& chain, const VecX& q, const VecX& v, int k,
                  const std::vector<Shape>& shapes) {
  ScmBody b;
  b.id = k;
  b.shapes = {shapes[k]};
  b.origin = chain.body_pose(q, k).origin;
  const Vec6 tw = chain.body_jacobian(q, k) * v;
  b.linear_velocity = tw.head<3>();
  b.angular_velocity = tw.tail<3>();
  return b;
}

}  // namespace

ChainSimResult simulate_chain(const ChainSimSpec& spec,
                              const std::function<void(const ChainStepRecord&)>& on_step,
                              std::unique_ptr<ScmTerrain>* terrain_out) {
  spec.validate();
  PlanarChain chain(spec.chain);
  const int n = chain.dof();
  const int joints = chain.actuator_count();
  const double ground_z = spec.tier == Tier::kScm ? spec.grid.reference_z : 0.0;
  GeneralizedState s = GeneralizedState::at_rest(
      chain, chain.straight_configuration(spec.start_x,
                                          ground_z + spec.chain.link_radius + spec.drop_height));

  PlaneTerrain plane(Vec3(0.0, 0.0, ground_z), Vec3::UnitZ());
  const ContactLaw law = spec.ground;
  std::unique_ptr<ScmTerrain> scm;
  if (spec.tier == Tier::kScm) scm = std::make_unique<ScmTerrain>(spec.grid, spec.soil, spec.bulldoze);

  StepperConfig stepper;
  stepper.h = spec.h;
  stepper.gravity = spec.gravity;
  ExternalLoad load{VecX::Zero(n), MatX::Zero(n, n)};
  StepInputs in;
  in.external = &load;
  if (!scm) {
    in.terrain = &plane;
    in.law = &law;
  }
  const VecX tau = VecX::Zero(joints);

  ChainSimResult res;
  std::vector<LinkWrench> wrenches(spec.chain.links);
  std::vector<BodyWrench> scm_wrench;
  std::vector<Vec6> twist0(spec.chain.links);
  const long steps = spec.steps();
  for (long k = 0; k < steps; ++k) {
    const double t = k * spec.h;
    VecX rate;
    const VecX target = chain_joint_targets(spec, t + spec.h, &rate);
    load.force.setZero();
    load.damping.setZero();
    for (int j = 0; j < joints; ++j) {
      const int c = 3 + j;
      load.force[c] = spec.kp * (target[j] - s.q[c] - spec.h * s.v[c]) +
                      spec.kd * (rate[j] - s.v[c]);
      load.damping(c, c) = spec.kp * spec.h + spec.kd;
    }
    if (scm) {
      const std::vector<Shape> shapes = chain.collision_shapes(s.q);
      std::vector<ScmBody> bodies;
      bodies.reserve(spec.chain.links);
      for (int b = 0; b < spec.chain.links; ++b) bodies.push_back(link_body(chain, s.q, s.v, b, shapes));
      scm_wrench = scm->update(bodies, spec.h);
      for (int b = 0; b < spec.chain.links; ++b) {
        const Mat6X J = chain.body_jacobian(s.q, b);
        twist0[b] = J * s.v;
        Vec6 w;
        w << scm_wrench[b].force, scm_wrench[b].torque;
        load.force += J.transpose() * w;
        load.damping += J.transpose() * scm_wrench[b].damping * J;
      }
    }

    const StepResult r = step_semi_implicit(s, tau, chain, in, stepper);
    if (!r.diagnostics.converged) ++res.nonconverged;
    s = r.state;
    if (!s.q.allFinite() || !s.v.allFinite())
      throw UnstableSimulation("chain state became non-finite at step " + std::to_string(k + 1) +
                               " (" + (scm ? "scm" : "rigid") + " tier, body chain)");

    double power = 0.0;
    for (auto& w : wrenches) w = LinkWrench{};
    if (scm) {
      for (int b = 0; b < spec.chain.links; ++b) {
        const Vec6 tw = chain.body_jacobian(s.q, b) * s.v;
        Vec6 w;
        w << scm_wrench[b].force, scm_wrench[b].torque;
        w -= scm_wrench[b].damping * (tw - twist0[b]);
        wrenches[b].force = w.head<3>();
        wrenches[b].torque = w.tail<3>();
        wrenches[b].power = w.dot(tw);
        power += wrenches[b].power;
      }
    } else {
      for (int i = 0; i < chain.contact_count(); ++i) {
        const ContactResult& c = r.diagnostics.contacts[i];
        const ContactSphere sph = chain.contact_sphere(s.q, i);
        const BodyPose pose = chain.body_pose(s.q, sph.body);
        const SurfaceQuery sq = plane.query(sph.center);
        const Vec3 point = sph.center - sph.radius * sq.normal;
        wrenches[sph.body].force += c.world_force;
        wrenches[sph.body].torque += (point - pose.origin).cross(c.world_force);
        wrenches[sph.body].power += c.power;
        power += c.power;
      }
    }

    if (on_step) {
      ChainStepRecord rec;
      rec.step = k + 1;
      rec.t = s.t;
      rec.q = &s.q;
      rec.v = &s.v;
      rec.com = chain.center_of_mass(s.q);
      rec.wrenches = &wrenches;
      rec.contact_power = power;
      rec.converged = r.diagnostics.converged;
      rec.terrain = scm.get();
      on_step(rec);
    }
  }
  res.final_state = s;
  res.steps = steps;
  if (scm) res.scm_nodes = scm->node_count();
  if (terrain_out) *terrain_out = std::move(scm);
  return res;
}

}  // namespace terrasim
