#include "terrasim/multibody.hpp"

#include <cmath>

namespace terrasim {
namespace {

Vec3 heading(double theta) { return Vec3(std::cos(theta), 0.0, -std::sin(theta)); }
Vec3 heading_rate(double theta) { return Vec3(-std::sin(theta), 0.0, -std::cos(theta)); }

Mat3 rotation_y(double theta) {
  Mat3 r;
  r << std::cos(theta), 0.0, std::sin(theta),
       0.0, 1.0, 0.0,
       -std::sin(theta), 0.0, std::cos(theta);
  return r;
}

}  // namespace

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return s;
}

MatX BodyModel::bias_velocity_jacobian(const VecX& q, const VecX& v) const {
  const int n = dof();
  MatX d(n, n);
  const double eps = 1e-7;
  for (int j = 0; j < n; ++j) {
    VecX vp = v, vm = v;
    vp(j) += eps;
    vm(j) -= eps;
    d.col(j) = (bias(q, vp, Vec3::Zero()) - bias(q, vm, Vec3::Zero())) / (2.0 * eps);
  }
  return d;
}

// ---------------------------------------------------------------------------

PointMass::PointMass(double mass, double radius) : mass_(mass), radius_(radius) {
  if (!(mass > 0.0)) throw ModelError("point mass: mass must be positive");
  if (radius < 0.0) throw ModelError("point mass: radius must be non-negative");
}

MatX PointMass::mass_matrix(const VecX&) const { return mass_ * MatX::Identity(3, 3); }

VecX PointMass::bias(const VecX&, const VecX&, const Vec3& gravity) const {
  return -mass_ * gravity;
}

MatX PointMass::bias_velocity_jacobian(const VecX&, const VecX&) const {
  return MatX::Zero(3, 3);
}

MatX PointMass::actuation_map(const VecX&) const { return MatX::Identity(3, 3); }

double PointMass::potential_energy(const VecX& q, const Vec3& gravity) const {
  return -mass_ * gravity.dot(q.head<3>());
}

ContactSphere PointMass::contact_sphere(const VecX& q, int index) const {
  if (index != 0) throw std::out_of_range("point mass has a single contact");
  ContactSphere c;
  c.center = q.head<3>();
  c.center_jacobian = Mat3X::Identity(3, 3);
  c.angular_jacobian = Mat3X::Zero(3, 3);
  c.radius = radius_;
  return c;
}

BodyPose PointMass::body_pose(const VecX& q, int) const {
  BodyPose p;
  p.origin = q.head<3>();
  return p;
}

Mat6X PointMass::body_jacobian(const VecX&, int) const {
  Mat6X j = Mat6X::Zero(6, 3);
  j.topRows<3>().setIdentity();
  return j;
}

std::vector<Shape> PointMass::collision_shapes(const VecX& q) const {
  if (radius_ <= 0.0) return {};
  return {Shape{Sphere{q.head<3>(), radius_}, 0}};
}

// ---------------------------------------------------------------------------

PlanarChain::PlanarChain(PlanarChainParams params) : params_(std::move(params)) {
  if (params_.links < 1) throw ModelError("planar chain: need at least one link");
  if (!(params_.link_length > 0.0) || !(params_.link_mass > 0.0) || !(params_.link_radius > 0.0)) {
    throw ModelError("planar chain: dimensions and mass must be positive");
  }
  if (params_.joints.empty()) {
    params_.joints.assign(params_.links - 1, JointAxis::kPitch);
  }
  if (static_cast<int>(params_.joints.size()) != params_.links - 1) {
    throw ModelError("planar chain: joint pattern must have links - 1 entries");
  }
  coordinate_of_joint_.assign(params_.joints.size(), -1);
  for (std::size_t j = 0; j < params_.joints.size(); ++j) {
    if (params_.joints[j] == JointAxis::kPitch) {
      coordinate_of_joint_[j] = 3 + static_cast<int>(active_joints_.size());
      active_joints_.push_back(static_cast<int>(j));
    }
  }
  const double L = params_.link_length;
  const double r = params_.link_radius;
  link_inertia_ = params_.link_mass * (L * L + 4.0 * r * r) / 12.0;
}

std::vector<double> PlanarChain::absolute_angles(const VecX& q) const {
  std::vector<double> th(params_.links);
  th[0] = q(2);
  for (int k = 1; k < params_.links; ++k) {
    const int c = coordinate_of_joint_[k - 1];
    th[k] = th[k - 1] + (c >= 0 ? q(c) : 0.0);
  }
  return th;
}

Eigen::RowVectorXd PlanarChain::angle_row(int link) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dof());
  row(2) = 1.0;
  for (int j = 0; j < link; ++j) {
    if (coordinate_of_joint_[j] >= 0) row(coordinate_of_joint_[j]) = 1.0;
  }
  return row;
}

PlanarChain::PointKinematics PlanarChain::point_on_link(const VecX& q, const VecX* v, int link,
                                                        double s) const {
  const double L = params_.link_length;
  const auto th = absolute_angles(q);
  PointKinematics pk;
  pk.position = Vec3(q(0), 0.0, q(1));
  pk.jacobian = Mat3X::Zero(3, dof());
  pk.jacobian(0, 0) = 1.0;
  pk.jacobian(2, 1) = 1.0;
  pk.accel_bias = Vec3::Zero();

  for (int m = 0; m <= link; ++m) {
    double coef;
    if (link == 0) {
      coef = s;
    } else if (m == 0) {
      coef = 0.5 * L;
    } else if (m < link) {
      coef = L;
    } else {
      coef = 0.5 * L + s;
    }
    pk.position += coef * heading(th[m]);
    const Eigen::RowVectorXd row = angle_row(m);
    pk.jacobian += coef * heading_rate(th[m]) * row;
    if (v != nullptr) {
      const double rate = row.dot(*v);
      pk.accel_bias -= coef * heading(th[m]) * rate * rate;
    }
  }
  return pk;
}

MatX PlanarChain::mass_matrix(const VecX& q) const {
  const int n = dof();
  MatX m = MatX::Zero(n, n);
  for (int k = 0; k < params_.links; ++k) {
    const auto pk = point_on_link(q, nullptr, k, 0.0);
    m += params_.link_mass * pk.jacobian.transpose() * pk.jacobian;
    const Eigen::RowVectorXd row = angle_row(k);
    m += link_inertia_ * row.transpose() * row;
  }
  return m;
}

VecX PlanarChain::bias(const VecX& q, const VecX& v, const Vec3& gravity) const {
  VecX h = VecX::Zero(dof());
  for (int k = 0; k < params_.links; ++k) {
    const auto pk = point_on_link(q, &v, k, 0.0);
    h += params_.link_mass * pk.jacobian.transpose() * (pk.accel_bias - gravity);
  }
  return h;
}

MatX PlanarChain::bias_velocity_jacobian(const VecX& q, const VecX& v) const {
  const int n = dof();
  const double L = params_.link_length;
  const auto th = absolute_angles(q);
  MatX d = MatX::Zero(n, n);
  for (int k = 0; k < params_.links; ++k) {
    const auto pk = point_on_link(q, nullptr, k, 0.0);
    // d(Jdot v)/dv = -sum_m coef_m e(theta_m) 2 rate_m row_m
    Mat3X dacc = Mat3X::Zero(3, n);
    for (int m = 0; m <= k; ++m) {
      double coef;
      if (k == 0) {
        coef = 0.0;
      } else if (m == 0 || m == k) {
        coef = 0.5 * L;
      } else {
        coef = L;
      }
      const Eigen::RowVectorXd row = angle_row(m);
      dacc -= coef * heading(th[m]) * (2.0 * row.dot(v)) * row;
    }
    d += params_.link_mass * pk.jacobian.transpose() * dacc;
  }
  return d;
}

MatX PlanarChain::actuation_map(const VecX&) const {
  const int na = actuator_count();
  MatX b = MatX::Zero(dof(), na);
  b.bottomRows(na).setIdentity();
  return b;
}

double PlanarChain::potential_energy(const VecX& q, const Vec3& gravity) const {
  double u = 0.0;
  for (int k = 0; k < params_.links; ++k) {
    u -= params_.link_mass * gravity.dot(point_on_link(q, nullptr, k, 0.0).position);
  }
  return u;
}

ContactSphere PlanarChain::contact_sphere(const VecX& q, int index) const {
  const int n = params_.links;
  if (index < 0 || index >= contact_count()) throw std::out_of_range("chain contact index");
  const double L = params_.link_length;
  int link;
  double s;
  if (index < n) {
    link = index;  // link midpoints
    s = 0.0;
  } else if (index < 2 * n) {
    link = index - n;  // tail end of each link
    s = -0.5 * L;
  } else {
    link = n - 1;  // head end of the last link
    s = 0.5 * L;
  }
  const auto pk = point_on_link(q, nullptr, link, s);
  ContactSphere c;
  c.center = pk.position;
  c.center_jacobian = pk.jacobian;
  c.angular_jacobian = Vec3::UnitY() * angle_row(link);
  c.radius = params_.link_radius;
  c.body = link;
  return c;
}

BodyPose PlanarChain::body_pose(const VecX& q, int body) const {
  BodyPose p;
  p.origin = point_on_link(q, nullptr, body, 0.0).position;
  p.rotation = rotation_y(absolute_angles(q)[body]);
  return p;
}

Mat6X PlanarChain::body_jacobian(const VecX& q, int body) const {
  Mat6X j(6, dof());
  j.topRows<3>() = point_on_link(q, nullptr, body, 0.0).jacobian;
  j.bottomRows<3>() = Vec3::UnitY() * angle_row(body);
  return j;
}

std::vector<Shape> PlanarChain::collision_shapes(const VecX& q) const {
  std::vector<Shape> shapes;
  const auto th = absolute_angles(q);
  const double half = 0.5 * params_.link_length;
  for (int k = 0; k < params_.links; ++k) {
    const Vec3 c = point_on_link(q, nullptr, k, 0.0).position;
    const Vec3 e = heading(th[k]);
    shapes.push_back(Shape{Capsule{c - half * e, c + half * e, params_.link_radius}, k});
  }
  return shapes;
}

Vec3 PlanarChain::center_of_mass(const VecX& q) const {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < params_.links; ++k) c += point_on_link(q, nullptr, k, 0.0).position;
  return c / params_.links;
}

VecX PlanarChain::straight_configuration(double x, double z) const {
  VecX q = VecX::Zero(dof());
  q(0) = x;
  q(1) = z;
  return q;
}

// ---------------------------------------------------------------------------

RollingWheel::RollingWheel(WheelParams params) : params_(params) {
  if (!(params_.radius > 0.0) || !(params_.width > 0.0) || !(params_.mass >= 0.0)) {
    throw ModelError("rolling wheel: dimensions must be positive");
  }
  const double m = params_.mass;
  const double r = params_.radius;
  const double w = params_.width;
  const double side = m * (0.4 * r * r + w * w / 12.0);
  inertia_ = Vec3(side, 0.75 * m * r * r, side);
}

MatX RollingWheel::mass_matrix(const VecX&) const {
  MatX m = MatX::Zero(3, 3);
  m(0, 0) = params_.mass;
  m(1, 1) = params_.mass;
  m(2, 2) = inertia_.y();
  return m;
}

VecX RollingWheel::bias(const VecX&, const VecX&, const Vec3& gravity) const {
  return Eigen::Vector3d(-params_.mass * gravity.x(), -params_.mass * gravity.z(), 0.0);
}

MatX RollingWheel::bias_velocity_jacobian(const VecX&, const VecX&) const {
  return MatX::Zero(3, 3);
}

MatX RollingWheel::actuation_map(const VecX&) const {
  MatX b = MatX::Zero(3, 1);
  b(2, 0) = 1.0;
  return b;
}

double RollingWheel::potential_energy(const VecX& q, const Vec3& gravity) const {
  return -params_.mass * (gravity.x() * q(0) + gravity.z() * q(1));
}

ContactSphere RollingWheel::contact_sphere(const VecX& q, int index) const {
  if (index != 0) throw std::out_of_range("wheel has a single contact");
  ContactSphere c;
  c.center = Vec3(q(0), 0.0, q(1));
  c.center_jacobian = Mat3X::Zero(3, 3);
  c.center_jacobian(0, 0) = 1.0;
  c.center_jacobian(2, 1) = 1.0;
  c.angular_jacobian = Mat3X::Zero(3, 3);
  c.angular_jacobian(1, 2) = 1.0;
  c.radius = params_.radius;
  return c;
}

BodyPose RollingWheel::body_pose(const VecX& q, int) const {
  BodyPose p;
  p.origin = Vec3(q(0), 0.0, q(1));
  p.rotation = rotation_y(q(2));
  return p;
}

Mat6X RollingWheel::body_jacobian(const VecX&, int) const {
  Mat6X j = Mat6X::Zero(6, 3);
  j(0, 0) = 1.0;
  j(2, 1) = 1.0;
  j(4, 2) = 1.0;
  return j;
}

std::vector<Shape> RollingWheel::collision_shapes(const VecX& q) const {
  return {Shape{Cylinder{Vec3(q(0), 0.0, q(1)), Vec3::UnitY(), params_.radius, 0.5 * params_.width}, 0}};
}

std::unique_ptr<PlanarChain> make_planar_chain(int n_links, double link_length, double link_mass,
                                               const std::vector<JointAxis>& joints,
                                               double link_radius) {
  PlanarChainParams p;
  p.links = n_links;
  p.link_length = link_length;
  p.link_mass = link_mass;
  p.link_radius = link_radius;
  p.joints = joints;
  return std::make_unique<PlanarChain>(std::move(p));
}

std::unique_ptr<RollingWheel> make_rolling_wheel(double radius, double width, double mass) {
  return std::make_unique<RollingWheel>(WheelParams{radius, width, mass});
}

}  // namespace terrasim
