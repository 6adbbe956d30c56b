#include "terrasim/tumbling.hpp"

#include <algorithm>
#include <cmath>

namespace terrasim {

namespace {

struct WheelLoop {
  const TumbleConfig& cfg;
  RollingWheel wheel;
  PlaneTerrain floor{Vec3::Zero(), Vec3::UnitZ()};
  ContactLaw law;
  StepperConfig stepper;
  PrescribedVelocity spin;

  WheelLoop(const TumbleConfig& c, double h, const Vec3& gravity)
      : cfg(c), wheel(c.wheel), law(c.ground) {
    stepper.h = h;
    stepper.gravity = gravity;
    spin.index = {2};
    spin.velocity = {c.omega};
  }

  GeneralizedState initial(double z) const {
    VecX q(3);
    q << cfg.start_x, z, 0.0;
    GeneralizedState s = GeneralizedState::at_rest(wheel, q);
    s.v[2] = cfg.omega;
    return s;
  }

  Vec6 twist(const GeneralizedState& s) const { return wheel.body_jacobian(s.q, 0) * s.v; }
};

WheelLogRow make_row(const GeneralizedState& s, const Vec3& y_offset, const Vec6& twist,
                     const Vec3& force, const Vec3& torque, int contacts) {
  WheelLogRow r;
  r.t = s.t;
  r.position = Vec3(s.q[0], 0.0, s.q[1]) + y_offset;
  r.roll = s.q[2];
  r.velocity = twist.head<3>();
  r.omega = s.v[2];
  r.force = force;
  r.torque = torque;
  r.contacts = contacts;
  return r;
}

// Ground reaction on the wheel from the stepper's contact results, with the
// torque about the centre (contact point one radius below it).
void add_floor_wrench(const StepDiagnostics& d, double radius, Vec3& force, Vec3& torque) {
  for (const ContactResult& c : d.contacts) {
    force += c.world_force;
    torque += Vec3(0.0, 0.0, -radius).cross(c.world_force);
  }
}

long frame_stride(double fps, double h) {
  return std::max(1L, std::lround(1.0 / (fps * h)));
}

}  // namespace

double wheel_rest_height(const DemWorld& world, const WheelParams& wheel, double x) {
  double z = wheel.radius;
  const double y_mid = 0.5 * world.config().domain.y();
  const double half = 0.5 * wheel.width;
  for (const ClumpInstance& c : world.clumps()) {
    const ClumpTemplate& t = world.templates()[c.template_id];
    const Mat3 R = c.orientation.toRotationMatrix();
    for (std::size_t k = 0; k < t.sphere_radii.size(); ++k) {
      const Vec3 p = c.position + R * t.sphere_offsets[k];
      const double r = t.sphere_radii[k];
      if (std::abs(p.y() - y_mid) > half + r) continue;
      const double reach = wheel.radius + r;
      const double dx = p.x() - x;
      if (std::abs(dx) >= reach) continue;
      z = std::max(z, p.z() + std::sqrt(reach * reach - dx * dx));
    }
  }
  return z;
}

TumbleResult run_tumbling(DemWorld& world, const TumbleConfig& cfg, const TumbleCallbacks& cb) {
  WheelLoop loop(cfg, world.config().h, world.config().gravity_vector());
  GeneralizedState s = loop.initial(wheel_rest_height(world, cfg.wheel, cfg.start_x));
  const Vec3 y_offset(0.0, 0.5 * world.config().domain.y(), 0.0);
  const long steps = std::lround(cfg.t_end / world.config().h);
  const long stride = frame_stride(cfg.output_fps, world.config().h);

  TumbleResult res;
  res.frames.push_back(make_row(s, y_offset, loop.twist(s), Vec3::Zero(), Vec3::Zero(), 0));
  double slip_acc = 0.0;
  DemWheel dw;
  dw.radius = cfg.wheel.radius;
  dw.half_length = 0.5 * cfg.wheel.width;
  dw.mass = cfg.wheel.mass;
  dw.material = cfg.wheel_material;
  ExternalLoad load{VecX::Zero(3), MatX::Zero(3, 3)};
  StepInputs in;
  in.terrain = &loop.floor;
  in.law = &loop.law;
  in.external = &load;
  in.prescribed = &loop.spin;
  const VecX tau = VecX::Zero(loop.wheel.actuator_count());
  for (long k = 0; k < steps; ++k) {
    const Vec6 tw = loop.twist(s);
    dw.center = Vec3(s.q[0], 0.0, s.q[1]) + y_offset;
    dw.linear_velocity = tw.head<3>();
    dw.angular_velocity = tw.tail<3>();
    const WheelWrench w = world.step(&dw);
    Vec6 wrench;
    wrench << w.force, w.torque;
    load.force = loop.wheel.body_jacobian(s.q, 0).transpose() * wrench;
    const StepResult r = step_semi_implicit(s, tau, loop.wheel, in, loop.stepper);
    if (!r.diagnostics.converged) ++res.nonconverged;
    s = r.state;
    const Vec6 tw1 = loop.twist(s);
    slip_acc += 1.0 - tw1[0] / (cfg.omega * cfg.wheel.radius);
    if (cb.on_step) cb.on_step(k, s);
    if ((k + 1) % stride == 0) {
      Vec3 f = w.force, t = w.torque;
      add_floor_wrench(r.diagnostics, cfg.wheel.radius, f, t);
      res.frames.push_back(make_row(s, y_offset, tw1, f, t, w.contacts + r.diagnostics.active_contacts));
      if (cb.on_frame) cb.on_frame(world, static_cast<int>(res.frames.size()) - 1);
    }
  }
  res.steps = steps;
  res.descent_distance = s.q[0] - cfg.start_x;
  res.mean_slip_ratio = steps > 0 ? slip_acc / steps : 0.0;
  return res;
}

TumbleResult run_tumbling_rigid(const TumbleConfig& cfg, double h, const Vec3& gravity,
                                const TumbleCallbacks& cb) {
  WheelLoop loop(cfg, h, gravity);
  GeneralizedState s = loop.initial(cfg.wheel.radius);
  const long steps = std::lround(cfg.t_end / h);
  const long stride = frame_stride(cfg.output_fps, h);
  StepInputs in;
  in.terrain = &loop.floor;
  in.law = &loop.law;
  in.prescribed = &loop.spin;
  const VecX tau = VecX::Zero(loop.wheel.actuator_count());
  TumbleResult res;
  res.frames.push_back(make_row(s, Vec3::Zero(), loop.twist(s), Vec3::Zero(), Vec3::Zero(), 0));
  double slip_acc = 0.0;
  for (long k = 0; k < steps; ++k) {
    const StepResult r = step_semi_implicit(s, tau, loop.wheel, in, loop.stepper);
    if (!r.diagnostics.converged) ++res.nonconverged;
    s = r.state;
    const Vec6 tw = loop.twist(s);
    slip_acc += 1.0 - tw[0] / (cfg.omega * cfg.wheel.radius);
    if (cb.on_step) cb.on_step(k, s);
    if ((k + 1) % stride == 0) {
      Vec3 f = Vec3::Zero(), t = Vec3::Zero();
      add_floor_wrench(r.diagnostics, cfg.wheel.radius, f, t);
      res.frames.push_back(make_row(s, Vec3::Zero(), tw, f, t, r.diagnostics.active_contacts));
    }
  }
  res.steps = steps;
  res.descent_distance = s.q[0] - cfg.start_x;
  res.mean_slip_ratio = steps > 0 ? slip_acc / steps : 0.0;
  return res;
}

}  // namespace terrasim
