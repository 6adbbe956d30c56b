#include "terrasim/dem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace terrasim {

namespace {

struct LocalResponse {
  Vec3 force = Vec3::Zero();  // on the first body
  double f_n = 0.0;
  bool slip = false;
};

// Normal spring-dashpot plus history friction for an overlap `delta` along
// `n` (pointing toward the first body) with relative velocity v_rel.
LocalResponse respond(double delta, const Vec3& n, const Vec3& v_rel, const PairParams& p,
                      ContactHistory& hist, double h, double eps_v) {
  LocalResponse out;
  const double v_n = n.dot(v_rel);
  // A contact that began inside this step has only dissipated d_n * delta,
  // so the approach rate seen by the dashpot is limited to delta / h.
  const double rate = std::max(v_n, -delta / h);
  out.f_n = std::max(0.0, p.k_n * delta - p.d_n * rate);
  const Vec3 v_t = v_rel - v_n * n;
  const TangentialContact t = dem_tangential_force(hist, v_t, out.f_n, p.k_t, p.d_t, p.mu, n, h, eps_v);
  out.force = out.f_n * n + t.force;
  out.slip = t.slip;
  return out;
}

Mat3 world_inertia_inverse(const Mat3& R, const Vec3& principal) {
  return R * principal.cwiseInverse().asDiagonal() * R.transpose();
}

}  // namespace

void DemMaterial::validate() const {
  if (!(E > 0.0)) throw ConfigError("dem material: E must be positive");
  if (nu < 0.0 || nu >= 0.5) throw ConfigError("dem material: nu must lie in [0, 0.5)");
  if (!(cor > 0.0) || cor > 1.0) throw ConfigError("dem material: cor must lie in (0, 1]");
  if (mu < 0.0) throw ConfigError("dem material: mu must be non-negative");
  if (c_rr < 0.0) throw ConfigError("dem material: c_rr must be non-negative");
}

double damping_ratio_log_decrement(double cor) {
  const double l = std::log(cor);
  return -l / std::sqrt(M_PI * M_PI + l * l);
}

double clamped_restitution(double zeta) {
  // unit mass, unit stiffness, unit approach speed
  auto rhs = [zeta](const Eigen::Vector2d& s) {
    return Eigen::Vector2d(s[1], -s[0] - 2.0 * zeta * s[1]);
  };
  auto force = [zeta](const Eigen::Vector2d& s) { return s[0] + 2.0 * zeta * s[1]; };
  auto rk4 = [&](const Eigen::Vector2d& s, double dt) {
    const Eigen::Vector2d k1 = rhs(s);
    const Eigen::Vector2d k2 = rhs(s + 0.5 * dt * k1);
    const Eigen::Vector2d k3 = rhs(s + 0.5 * dt * k2);
    const Eigen::Vector2d k4 = rhs(s + dt * k3);
    return Eigen::Vector2d(s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
  };
  const double dt = 1e-3 / (1.0 + zeta);
  Eigen::Vector2d s(0.0, 1.0);
  for (int i = 0; i < 10000000; ++i) {
    const Eigen::Vector2d next = rk4(s, dt);
    if (force(next) <= 0.0 || next[0] <= 0.0) {
      // refine the crossing inside this step by bisection on the sub-step
      double lo = 0.0, hi = dt;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::Vector2d m = rk4(s, mid);
        if (force(m) <= 0.0 || m[0] <= 0.0) hi = mid; else lo = mid;
      }
      return -rk4(s, hi)[1];
    }
    s = next;
  }
  return 0.0;
}

double damping_ratio_clamped(double cor) {
  if (cor >= 1.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (clamped_restitution(hi) > cor) hi *= 2.0;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (clamped_restitution(mid) > cor) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

PairParams derive_pair_params(const DemMaterial& a, const DemMaterial& b, double R_eff,
                              double m_eff, const PairOverride& overrides, DampingModel model) {
  if (!(R_eff > 0.0) || !(m_eff > 0.0)) throw ConfigError("dem pair: R_eff and m_eff must be positive");
  const double e = overrides.cor.value_or(std::min(a.cor, b.cor));
  if (e < 0.01 || e > 1.0) throw ConfigError("dem pair: restitution must lie in [0.01, 1]");
  const double e_star = 1.0 / ((1.0 - a.nu * a.nu) / a.E + (1.0 - b.nu * b.nu) / b.E);
  PairParams p;
  p.cor = e;
  p.k_n = e_star * R_eff;
  const double gamma = model == DampingModel::kLogDecrement ? damping_ratio_log_decrement(e)
                                                            : damping_ratio_clamped(e);
  p.d_n = 2.0 * gamma * std::sqrt(m_eff * p.k_n);
  p.k_t = 2.0 / 7.0 * p.k_n;
  p.d_t = p.d_n;
  p.mu = overrides.mu.value_or(std::min(a.mu, b.mu));
  p.c_rr = 0.5 * (a.c_rr + b.c_rr);
  return p;
}

std::pair<double, Mat3> sphere_union_moments(const std::vector<Vec3>& centers,
                                             const std::vector<double>& radii, int cells) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = -lo;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    lo = lo.cwiseMin(centers[k] - Vec3::Constant(radii[k]));
    hi = hi.cwiseMax(centers[k] + Vec3::Constant(radii[k]));
  }
  const Vec3 step = (hi - lo) / cells;
  const double dv = step.prod();
  double volume = 0.0;
  Vec3 first = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      for (int k = 0; k < cells; ++k) {
        const Vec3 p = lo + Vec3((i + 0.5) * step.x(), (j + 0.5) * step.y(), (k + 0.5) * step.z());
        bool inside = false;
        for (std::size_t s = 0; s < centers.size() && !inside; ++s) {
          inside = (p - centers[s]).squaredNorm() <= radii[s] * radii[s];
        }
        if (!inside) continue;
        volume += dv;
        first += dv * p;
        second += dv * p * p.transpose();
      }
    }
  }
  const Vec3 c = first / volume;
  const Mat3 cov = second - volume * c * c.transpose();
  const Mat3 inertia = cov.trace() * Mat3::Identity() - cov;
  return {volume, inertia};
}

void ClumpTemplate::validate() const {
  if (sphere_offsets.empty() || sphere_offsets.size() != sphere_radii.size()) {
    throw ConfigError("clump template: needs at least one sphere and matching radii");
  }
  for (double r : sphere_radii) {
    if (!(r > 0.0)) throw ConfigError("clump template: radii must be positive");
  }
  if (!(mass > 0.0) || !(inertia.minCoeff() > 0.0)) {
    throw ConfigError("clump template: mass and inertia must be positive");
  }
}

ClumpTemplate ClumpTemplate::single_sphere(double radius, double density) {
  ClumpTemplate t;
  t.sphere_offsets = {Vec3::Zero()};
  t.sphere_radii = {radius};
  t.volume = 4.0 / 3.0 * M_PI * radius * radius * radius;
  t.mass = density * t.volume;
  t.inertia = Vec3::Constant(0.4 * t.mass * radius * radius);
  t.bounding_radius = radius;
  return t;
}

ClumpTemplate ClumpTemplate::triangle(double unscaled_volume, double scale, double density,
                                      double side_ratio) {
  // unit-radius layout, centroid at the origin
  const double d = side_ratio / std::sqrt(3.0);
  std::vector<Vec3> unit;
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * M_PI * k / 3.0;
    unit.emplace_back(d * std::cos(a), d * std::sin(a), 0.0);
  }
  const auto [unit_volume, unit_inertia] = sphere_union_moments(unit, {1.0, 1.0, 1.0}, 160);
  const double r = std::cbrt(unscaled_volume / unit_volume) * scale;

  ClumpTemplate t;
  for (const Vec3& u : unit) {
    t.sphere_offsets.push_back(u * r);
    t.sphere_radii.push_back(r);
  }
  t.volume = unscaled_volume * scale * scale * scale;
  t.mass = density * t.volume;
  t.inertia = unit_inertia.diagonal() / unit_volume * t.mass * r * r;
  t.bounding_radius = (d + 1.0) * r;
  return t;
}

NormalContact dem_normal_force(const Vec3& x_i, const Vec3& x_j, double r_i, double r_j,
                               const Vec3& v_ij, double k_n, double d_n) {
  const Vec3 d = x_i - x_j;
  const double dist = d.norm();
  if (dist < 1e-12) throw DegenerateInput("dem: coincident sphere centres");
  NormalContact out;
  out.normal = d / dist;
  out.overlap = r_i + r_j - dist;
  if (out.overlap <= 0.0) {
    out.overlap = std::max(out.overlap, 0.0);
    return out;
  }
  const double f = std::max(0.0, k_n * out.overlap - d_n * out.normal.dot(v_ij));
  out.force = f * out.normal;
  return out;
}

TangentialContact dem_tangential_force(ContactHistory& history, const Vec3& v_t, double f_n,
                                       double k_t, double d_t, double mu, const Vec3& normal,
                                       double h, double eps_v) {
  history.xi -= normal * normal.dot(history.xi);
  history.xi += h * v_t;
  ++history.age;
  TangentialContact out;
  out.force = -k_t * history.xi - d_t * v_t;
  const double cap = mu * f_n;
  if (out.force.norm() <= cap) return out;
  out.slip = true;
  out.force = -cap * v_t / (v_t.norm() + eps_v);
  const double xi_norm = history.xi.norm();
  if (k_t > 0.0 && xi_norm > 0.0) history.xi *= cap / (k_t * xi_norm);
  return out;
}

Vec3 rolling_resistance_torque(double f_n, double R_eff, const Vec3& omega_rel, double c_rr) {
  const double w = omega_rel.norm();
  if (w <= 1e-8) return Vec3::Zero();
  return -c_rr * f_n * R_eff * omega_rel / w;
}

std::vector<Vec3> hcp_sample(const Vec3& extents, double radius) {
  std::vector<Vec3> out;
  if (!(radius > 0.0)) return out;
  const double r = radius;
  const double dz = 2.0 * std::sqrt(6.0) / 3.0 * r;
  const double dy = std::sqrt(3.0) * r;
  const int nk = static_cast<int>(std::floor(extents.z() / dz)) + 1;
  const int nj = static_cast<int>(std::floor(extents.y() / dy)) + 1;
  const int ni = static_cast<int>(std::floor(extents.x() / (2 * r))) + 1;
  const double tol = 1e-12;
  for (int k = 0; k < nk; ++k) {
    for (int j = 0; j < nj; ++j) {
      for (int i = 0; i < ni; ++i) {
        const Vec3 p(r + r * (2 * i + ((j + k) % 2)), r + dy * (j + (k % 2) / 3.0), r + dz * k);
        if (p.x() + r <= extents.x() + tol && p.y() + r <= extents.y() + tol &&
            p.z() + r <= extents.z() + tol) {
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

std::vector<SpherePair> broadphase_pairs(const std::vector<Vec3>& centers,
                                         const std::vector<double>& radii,
                                         const std::vector<int>& owner, double cell_size,
                                         double skin) {
  auto cell_of = [cell_size](const Vec3& p) {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / cell_size)),
                           static_cast<int>(std::floor(p.y() / cell_size)),
                           static_cast<int>(std::floor(p.z() / cell_size)));
  };
  auto key = [](int x, int y, int z) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x) & 0x1FFFFF) << 42) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y) & 0x1FFFFF) << 21) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(z) & 0x1FFFFF);
  };
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(centers.size());
  std::vector<Eigen::Vector3i> cells(centers.size());
  for (std::size_t s = 0; s < centers.size(); ++s) {
    cells[s] = cell_of(centers[s]);
    grid[key(cells[s].x(), cells[s].y(), cells[s].z())].push_back(static_cast<int>(s));
  }
  std::vector<SpherePair> out;
  for (std::size_t a = 0; a < centers.size(); ++a) {
    const Eigen::Vector3i& c = cells[a];
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(key(c.x() + dx, c.y() + dy, c.z() + dz));
          if (it == grid.end()) continue;
          for (int b : it->second) {
            if (b <= static_cast<int>(a) || owner[a] == owner[b]) continue;
            const double reach = radii[a] + radii[b] + skin;
            if ((centers[a] - centers[b]).squaredNorm() < reach * reach) {
              out.push_back({static_cast<int>(a), b});
            }
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SpherePair> brute_force_overlaps(const std::vector<Vec3>& centers,
                                             const std::vector<double>& radii,
                                             const std::vector<int>& owner) {
  std::vector<SpherePair> out;
  for (std::size_t a = 0; a < centers.size(); ++a) {
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      if (owner[a] == owner[b]) continue;
      if ((centers[a] - centers[b]).norm() < radii[a] + radii[b]) {
        out.push_back({static_cast<int>(a), static_cast<int>(b)});
      }
    }
  }
  return out;
}

void DemWorldConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("dem: timestep must be positive");
  if (!(v_max > 0.0) || !(v_max < v_error)) throw ConfigError("dem: need 0 < v_max < v_error");
  if (broadphase_period < 1) throw ConfigError("dem: broadphase_period must be >= 1");
  if (domain.minCoeff() <= 0.0) throw ConfigError("dem: domain extents must be positive");
  if (cell_size < 0.0) throw ConfigError("dem: cell_size must be non-negative");
  if (threads < 1) throw ConfigError("dem: threads must be >= 1");
  if (!(eps_v > 0.0)) throw ConfigError("dem: eps_v must be positive");
}

Vec3 DemWorldConfig::gravity_vector() const {
  return gravity * Vec3(std::sin(slope), 0.0, -std::cos(slope));
}

DemWorld::DemWorld(DemWorldConfig cfg, std::vector<ClumpTemplate> templates,
                   std::vector<DemMaterial> materials, int boundary_material)
    : cfg_(cfg), templates_(std::move(templates)), materials_(std::move(materials)),
      boundary_material_(boundary_material) {
  cfg_.validate();
  if (templates_.empty()) throw ConfigError("dem: at least one clump template is required");
  for (const auto& t : templates_) {
    t.validate();
    for (double r : t.sphere_radii) max_radius_ = std::max(max_radius_, r);
  }
  for (const auto& m : materials_) m.validate();
  if (boundary_material_ < 0 || boundary_material_ >= static_cast<int>(materials_.size())) {
    throw ConfigError("dem: boundary material index out of range");
  }
  skin_ = 2.0 * cfg_.v_max * cfg_.h * cfg_.broadphase_period;
  if (cfg_.cell_size > 0.0) {
    if (cfg_.cell_size < 2.0 * max_radius_) {
      throw ConfigError("dem: cell_size must be at least twice the largest sphere radius");
    }
    cell_size_ = cfg_.cell_size;
    skin_ = std::min(skin_, cell_size_ - 2.0 * max_radius_);
  } else {
    cell_size_ = 2.0 * max_radius_ + skin_;
  }
  rebuild_damping_table();
}

void DemWorld::set_pair_override(int material_a, int material_b, const PairOverride& o) {
  overrides_[{std::min(material_a, material_b), std::max(material_a, material_b)}] = o;
  rebuild_damping_table();
}

int DemWorld::add_clump(ClumpInstance c) {
  if (c.template_id < 0 || c.template_id >= static_cast<int>(templates_.size())) {
    throw ConfigError("dem: unknown clump template");
  }
  if (c.material < 0 || c.material >= static_cast<int>(materials_.size())) {
    throw ConfigError("dem: unknown material");
  }
  if (c.id < 0) c.id = next_id_;
  next_id_ = std::max(next_id_, c.id + 1);
  c.orientation.normalize();
  clumps_.push_back(c);
  rebuild_spheres();
  return c.id;
}

std::size_t DemWorld::sphere_count() const { return sphere_owner_.size(); }

std::uint64_t DemWorld::sphere_key(int sphere) const {
  return (static_cast<std::uint64_t>(clumps_[sphere_owner_[sphere]].id) << 4) |
         static_cast<std::uint64_t>(sphere_local_[sphere]);
}

void DemWorld::rebuild_spheres() {
  // carry boundary histories across the re-indexing
  std::unordered_map<std::uint64_t, std::array<ContactHistory, kBoundarySlots>> saved;
  for (const auto& h : boundary_history_) saved[h[0].pair_key] = h;
  sphere_owner_.clear();
  sphere_local_.clear();
  sphere_radius_.clear();
  clump_first_sphere_.clear();
  for (std::size_t c = 0; c < clumps_.size(); ++c) {
    const ClumpTemplate& t = templates_[clumps_[c].template_id];
    clump_first_sphere_.push_back(static_cast<int>(sphere_owner_.size()));
    for (std::size_t k = 0; k < t.sphere_radii.size(); ++k) {
      sphere_owner_.push_back(static_cast<int>(c));
      sphere_local_.push_back(static_cast<int>(k));
      sphere_radius_.push_back(t.sphere_radii[k]);
    }
  }
  const std::size_t n = sphere_owner_.size();
  sphere_pos_.assign(n, Vec3::Zero());
  boundary_history_.assign(n, {});
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint64_t k = sphere_key(static_cast<int>(s));
    const auto it = saved.find(k);
    if (it != saved.end()) boundary_history_[s] = it->second;
    for (auto& h : boundary_history_[s]) h.pair_key = k;
  }
  refresh_needed_ = true;
}

void DemWorld::rebuild_damping_table() {
  const int nm = static_cast<int>(materials_.size());
  zeta_.assign(nm * nm, 0.0);
  std::map<double, double> by_cor;
  for (int a = 0; a < nm; ++a) {
    for (int b = 0; b < nm; ++b) {
      const auto it = overrides_.find({std::min(a, b), std::max(a, b)});
      const PairOverride o = it == overrides_.end() ? PairOverride{} : it->second;
      const double e = o.cor.value_or(std::min(materials_[a].cor, materials_[b].cor));
      if (e < 0.01 || e > 1.0) throw ConfigError("dem pair: restitution must lie in [0.01, 1]");
      auto z = by_cor.find(e);
      if (z == by_cor.end()) {
        const double zeta = cfg_.damping == DampingModel::kLogDecrement ? damping_ratio_log_decrement(e)
                                                                        : damping_ratio_clamped(e);
        z = by_cor.emplace(e, zeta).first;
      }
      zeta_[a * nm + b] = z->second;
    }
  }
}

PairParams DemWorld::pair_params(int material_a, int material_b, double R_eff, double m_eff) const {
  const auto it = overrides_.find({std::min(material_a, material_b), std::max(material_a, material_b)});
  const PairOverride o = it == overrides_.end() ? PairOverride{} : it->second;
  PairParams p = derive_pair_params(materials_[material_a], materials_[material_b], R_eff, m_eff, o,
                                    DampingModel::kLogDecrement);
  const double zeta = zeta_[material_a * static_cast<int>(materials_.size()) + material_b];
  p.d_n = 2.0 * zeta * std::sqrt(m_eff * p.k_n);
  p.d_t = p.d_n;
  return p;
}

Vec3 DemWorld::sphere_velocity(int sphere, const Vec3& point) const {
  const ClumpInstance& c = clumps_[sphere_owner_[sphere]];
  return c.linear_velocity + c.angular_velocity.cross(point - c.position);
}

void DemWorld::refresh_broadphase() {
  std::unordered_map<std::uint64_t, ContactHistory> old;
  for (const Candidate& c : candidates_) {
    if (c.touching) old.emplace(c.key, c.history);
  }
  std::vector<int> owner(sphere_owner_.begin(), sphere_owner_.end());
  const auto pairs = broadphase_pairs(sphere_pos_, sphere_radius_, owner, cell_size_, skin_);
  candidates_.clear();
  candidates_.reserve(pairs.size());
  for (const SpherePair& p : pairs) {
    Candidate c;
    c.a = p.a;
    c.b = p.b;
    const std::uint64_t ka = sphere_key(p.a), kb = sphere_key(p.b);
    c.key = (std::min(ka, kb) << 32) | std::max(ka, kb);
    const auto it = old.find(c.key);
    if (it != old.end()) {
      c.history = it->second;
      c.touching = true;
    }
    c.history.pair_key = c.key;
    candidates_.push_back(c);
  }
  pair_out_.assign(candidates_.size(), PairOutput{});
  pos_at_refresh_ = sphere_pos_;
  steps_since_refresh_ = 0;
  refresh_needed_ = false;
  stats_.refreshed = true;
}

WheelWrench DemWorld::step(const DemWheel* wheel) {
  stats_ = DemStepStats{};
  const int nc = static_cast<int>(clumps_.size());
  const int ns = static_cast<int>(sphere_owner_.size());
  const double h = cfg_.h;

  std::vector<Mat3> rot(nc);
  for (int c = 0; c < nc; ++c) rot[c] = clumps_[c].orientation.toRotationMatrix();
  double max_move_sq = 0.0;
  for (int s = 0; s < ns; ++s) {
    const ClumpInstance& c = clumps_[sphere_owner_[s]];
    sphere_pos_[s] = c.position + rot[sphere_owner_[s]] * templates_[c.template_id].sphere_offsets[sphere_local_[s]];
    if (!refresh_needed_) {
      max_move_sq = std::max(max_move_sq, (sphere_pos_[s] - pos_at_refresh_[s]).squaredNorm());
    }
  }
  if (refresh_needed_ || steps_since_refresh_ >= cfg_.broadphase_period ||
      4.0 * max_move_sq >= skin_ * skin_) {
    refresh_broadphase();
  }
  ++steps_since_refresh_;

  const Vec3 g = cfg_.gravity_vector();
  force_.assign(nc, Vec3::Zero());
  torque_.assign(nc, Vec3::Zero());
  for (int c = 0; c < nc; ++c) force_[c] = templates_[clumps_[c].template_id].mass * g;

  // grain-grain pairs; each candidate owns its history so the loop is
  // race-free and the sequential accumulation below fixes the order
  const int np = static_cast<int>(candidates_.size());
#pragma omp parallel for schedule(static) num_threads(cfg_.threads) if (cfg_.threads > 1)
  for (int k = 0; k < np; ++k) {
    Candidate& cand = candidates_[k];
    PairOutput& out = pair_out_[k];
    out = PairOutput{};
    const Vec3 d = sphere_pos_[cand.a] - sphere_pos_[cand.b];
    const double ra = sphere_radius_[cand.a], rb = sphere_radius_[cand.b];
    const double dist = d.norm();
    const double delta = ra + rb - dist;
    if (delta <= 0.0 || dist < 1e-12) {
      cand.touching = false;
      cand.history.xi.setZero();
      cand.history.age = 0;
      continue;
    }
    const Vec3 n = d / dist;
    const Vec3 point = sphere_pos_[cand.a] - (ra - 0.5 * delta) * n;
    const ClumpInstance& ca = clumps_[sphere_owner_[cand.a]];
    const ClumpInstance& cb = clumps_[sphere_owner_[cand.b]];
    const double ma = templates_[ca.template_id].mass, mb = templates_[cb.template_id].mass;
    const double r_eff = ra * rb / (ra + rb);
    const PairParams p = pair_params(ca.material, cb.material, r_eff, ma * mb / (ma + mb));
    const Vec3 v_rel = sphere_velocity(cand.a, point) - sphere_velocity(cand.b, point);
    const LocalResponse r = respond(delta, n, v_rel, p, cand.history, h, cfg_.eps_v);
    out.force = r.force;
    out.point = point;
    out.rolling = rolling_resistance_torque(r.f_n, r_eff, ca.angular_velocity - cb.angular_velocity, p.c_rr);
    out.touching = true;
    cand.touching = true;
  }
  std::vector<Vec3> internal(nc, Vec3::Zero());
  for (int k = 0; k < np; ++k) {
    const PairOutput& out = pair_out_[k];
    if (!out.touching) continue;
    ++stats_.pair_contacts;
    const int a = sphere_owner_[candidates_[k].a];
    const int b = sphere_owner_[candidates_[k].b];
    internal[a] += out.force;
    internal[b] -= out.force;
    torque_[a] += (out.point - clumps_[a].position).cross(out.force) + out.rolling;
    torque_[b] -= (out.point - clumps_[b].position).cross(out.force) + out.rolling;
  }
  for (int c = 0; c < nc; ++c) {
    force_[c] += internal[c];
    stats_.internal_force_sum += internal[c];
  }

  // static planes: floor z = 0 and the four side walls
  struct Plane {
    Vec3 normal;
    double offset;  // normal . x >= offset inside
  };
  std::vector<std::pair<int, Plane>> planes;
  if (cfg_.floor) planes.push_back({0, {Vec3::UnitZ(), 0.0}});
  if (cfg_.walls) {
    planes.push_back({1, {Vec3::UnitX(), 0.0}});
    planes.push_back({2, {-Vec3::UnitX(), -cfg_.domain.x()}});
    planes.push_back({3, {Vec3::UnitY(), 0.0}});
    planes.push_back({4, {-Vec3::UnitY(), -cfg_.domain.y()}});
  }
  WheelWrench wrench;
  for (int s = 0; s < ns; ++s) {
    const int c = sphere_owner_[s];
    const ClumpInstance& cl = clumps_[c];
    const double r = sphere_radius_[s];
    const double m = templates_[cl.template_id].mass;
    for (const auto& [slot, pl] : planes) {
      ContactHistory& hist = boundary_history_[s][slot];
      const double delta = r - (pl.normal.dot(sphere_pos_[s]) - pl.offset);
      if (delta <= 0.0) {
        hist.xi.setZero();
        hist.age = 0;
        continue;
      }
      ++stats_.boundary_contacts;
      const Vec3 point = sphere_pos_[s] - (r - 0.5 * delta) * pl.normal;
      const PairParams p = pair_params(cl.material, boundary_material_, r, m);
      const LocalResponse resp = respond(delta, pl.normal, sphere_velocity(s, point), p, hist, h, cfg_.eps_v);
      force_[c] += resp.force;
      torque_[c] += (point - cl.position).cross(resp.force) +
                    rolling_resistance_torque(resp.f_n, r, cl.angular_velocity, p.c_rr);
    }
    if (wheel == nullptr) continue;
    ContactHistory& hist = boundary_history_[s][5];
    // closest point on the solid cylinder
    const Vec3 rel = sphere_pos_[s] - wheel->center;
    const double along = rel.dot(wheel->axis);
    const Vec3 radial = rel - along * wheel->axis;
    const double rho = radial.norm();
    Vec3 n;
    double delta;
    if (std::abs(along) <= wheel->half_length && rho <= wheel->radius) {
      // centre inside the wheel: push out through the nearest face
      const double to_rim = wheel->radius - rho;
      const double to_cap = wheel->half_length - std::abs(along);
      if (to_rim <= to_cap && rho > 1e-12) {
        n = radial / rho;
        delta = r + to_rim;
      } else {
        n = (along >= 0 ? 1.0 : -1.0) * wheel->axis;
        delta = r + to_cap;
      }
    } else {
      const double a_c = std::clamp(along, -wheel->half_length, wheel->half_length);
      const Vec3 radial_c = rho > wheel->radius ? Vec3(radial * (wheel->radius / rho)) : radial;
      const Vec3 closest = wheel->center + a_c * wheel->axis + radial_c;
      const Vec3 d = sphere_pos_[s] - closest;
      const double dist = d.norm();
      delta = r - dist;
      n = dist > 1e-12 ? Vec3(d / dist) : Vec3(radial / std::max(rho, 1e-12));
    }
    if (delta <= 0.0) {
      hist.xi.setZero();
      hist.age = 0;
      continue;
    }
    ++wrench.contacts;
    const Vec3 point = sphere_pos_[s] - (r - 0.5 * delta) * n;
    const Vec3 v_wheel = wheel->linear_velocity + wheel->angular_velocity.cross(point - wheel->center);
    const double r_eff = r * wheel->radius / (r + wheel->radius);
    const PairParams p = pair_params(cl.material, wheel->material, r_eff, m * wheel->mass / (m + wheel->mass));
    const LocalResponse resp = respond(delta, n, sphere_velocity(s, point) - v_wheel, p, hist, h, cfg_.eps_v);
    const Vec3 roll = rolling_resistance_torque(resp.f_n, r_eff, cl.angular_velocity - wheel->angular_velocity, p.c_rr);
    force_[c] += resp.force;
    torque_[c] += (point - cl.position).cross(resp.force) + roll;
    wrench.force -= resp.force;
    wrench.torque -= (point - wheel->center).cross(resp.force) + roll;
  }

  // symplectic Euler with speed caps
  for (int c = 0; c < nc; ++c) {
    ClumpInstance& cl = clumps_[c];
    const ClumpTemplate& t = templates_[cl.template_id];
    cl.linear_velocity += h / t.mass * force_[c];
    const double speed = cl.linear_velocity.norm();
    if (!std::isfinite(speed) || speed > cfg_.v_error) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "dem: clump %d speed %.6g m/s exceeds v_error at step %ld",
                    cl.id, speed, steps_);
      throw UnstableSimulation(msg);
    }
    if (speed > cfg_.v_max) {
      cl.linear_velocity *= cfg_.v_max / speed;
      ++stats_.clamped;
    }
    const Mat3& R = rot[c];
    const Mat3 inertia = R * t.inertia.asDiagonal() * R.transpose();
    const Vec3 w = cl.angular_velocity;
    cl.angular_velocity += h * world_inertia_inverse(R, t.inertia) * (torque_[c] - w.cross(inertia * w));
    cl.position += h * cl.linear_velocity;
    const Vec3& om = cl.angular_velocity;
    const Eigen::Quaterniond dq(0.0, om.x(), om.y(), om.z());
    Eigen::Quaterniond q = cl.orientation;
    q.coeffs() += 0.5 * h * (dq * cl.orientation).coeffs();
    q.normalize();
    cl.orientation = q;
  }
  delete_escaped();
  time_ += h;
  ++steps_;
  return wrench;
}

void DemWorld::delete_escaped() {
  const Vec3& L = cfg_.domain;
  std::vector<ClumpInstance> kept;
  kept.reserve(clumps_.size());
  for (const ClumpInstance& c : clumps_) {
    const double m = templates_[c.template_id].bounding_radius;
    const Vec3& p = c.position;
    const bool inside = p.x() > -m && p.x() < L.x() + m && p.y() > -m && p.y() < L.y() + m &&
                        p.z() > -m && p.z() < L.z() + m;
    if (inside) kept.push_back(c);
  }
  if (kept.size() == clumps_.size()) return;
  stats_.deleted = static_cast<int>(clumps_.size() - kept.size());
  clumps_ = std::move(kept);
  rebuild_spheres();
}

double DemWorld::kinetic_energy() const {
  double ke = 0.0;
  for (const ClumpInstance& c : clumps_) {
    const ClumpTemplate& t = templates_[c.template_id];
    const Mat3 R = c.orientation.toRotationMatrix();
    const Vec3 wb = R.transpose() * c.angular_velocity;
    ke += 0.5 * t.mass * c.linear_velocity.squaredNorm() + 0.5 * wb.dot(t.inertia.cwiseProduct(wb));
  }
  return ke;
}

Vec3 DemWorld::total_momentum() const {
  Vec3 p = Vec3::Zero();
  for (const ClumpInstance& c : clumps_) p += templates_[c.template_id].mass * c.linear_velocity;
  return p;
}

double DemWorld::total_mass() const {
  double m = 0.0;
  for (const ClumpInstance& c : clumps_) m += templates_[c.template_id].mass;
  return m;
}

double DemWorld::solid_volume() const {
  double v = 0.0;
  for (const ClumpInstance& c : clumps_) v += templates_[c.template_id].volume;
  return v;
}

namespace {

struct SphereSnapshot {
  std::vector<Vec3> pos;
  std::vector<double> radius;
  std::vector<int> owner;
};

SphereSnapshot snapshot(const std::vector<ClumpInstance>& clumps,
                        const std::vector<ClumpTemplate>& templates) {
  SphereSnapshot s;
  for (std::size_t c = 0; c < clumps.size(); ++c) {
    const ClumpTemplate& t = templates[clumps[c].template_id];
    const Mat3 R = clumps[c].orientation.toRotationMatrix();
    for (std::size_t k = 0; k < t.sphere_radii.size(); ++k) {
      s.pos.push_back(clumps[c].position + R * t.sphere_offsets[k]);
      s.radius.push_back(t.sphere_radii[k]);
      s.owner.push_back(static_cast<int>(c));
    }
  }
  return s;
}

}  // namespace

DemEnergy DemWorld::energy() const {
  DemEnergy e;
  e.kinetic = kinetic_energy();
  const Vec3 g = cfg_.gravity_vector();
  for (const ClumpInstance& c : clumps_) e.potential -= templates_[c.template_id].mass * g.dot(c.position);

  const SphereSnapshot s = snapshot(clumps_, templates_);
  std::unordered_map<std::uint64_t, const ContactHistory*> hist;
  for (const Candidate& c : candidates_) hist.emplace(c.key, &c.history);
  for (const SpherePair& p : brute_force_overlaps(s.pos, s.radius, s.owner)) {
    const double delta = s.radius[p.a] + s.radius[p.b] - (s.pos[p.a] - s.pos[p.b]).norm();
    const ClumpInstance& ca = clumps_[s.owner[p.a]];
    const ClumpInstance& cb = clumps_[s.owner[p.b]];
    const double ma = templates_[ca.template_id].mass, mb = templates_[cb.template_id].mass;
    const double r_eff = s.radius[p.a] * s.radius[p.b] / (s.radius[p.a] + s.radius[p.b]);
    const PairParams pp = pair_params(ca.material, cb.material, r_eff, ma * mb / (ma + mb));
    e.elastic += 0.5 * pp.k_n * delta * delta;
    if (p.a < static_cast<int>(sphere_owner_.size()) && p.b < static_cast<int>(sphere_owner_.size())) {
      const std::uint64_t ka = sphere_key(p.a), kb = sphere_key(p.b);
      const auto it = hist.find((std::min(ka, kb) << 32) | std::max(ka, kb));
      if (it != hist.end()) e.elastic += 0.5 * pp.k_t * it->second->xi.squaredNorm();
    }
  }
  for (std::size_t k = 0; k < s.pos.size(); ++k) {
    const ClumpInstance& cl = clumps_[s.owner[k]];
    const double m = templates_[cl.template_id].mass;
    const double r = s.radius[k];
    std::vector<std::pair<int, double>> gaps;
    if (cfg_.floor) gaps.push_back({0, s.pos[k].z()});
    if (cfg_.walls) {
      gaps.push_back({1, s.pos[k].x()});
      gaps.push_back({2, cfg_.domain.x() - s.pos[k].x()});
      gaps.push_back({3, s.pos[k].y()});
      gaps.push_back({4, cfg_.domain.y() - s.pos[k].y()});
    }
    for (const auto& [slot, dist] : gaps) {
      const double delta = r - dist;
      if (delta <= 0.0) continue;
      const PairParams pp = pair_params(cl.material, boundary_material_, r, m);
      e.elastic += 0.5 * pp.k_n * delta * delta;
      if (k < boundary_history_.size()) e.elastic += 0.5 * pp.k_t * boundary_history_[k][slot].xi.squaredNorm();
    }
  }
  return e;
}

double DemWorld::surface_height(double x0, double half_window) const {
  const SphereSnapshot s = snapshot(clumps_, templates_);
  double top = 0.0;
  for (std::size_t k = 0; k < s.pos.size(); ++k) {
    if (std::abs(s.pos[k].x() - x0) <= half_window) top = std::max(top, s.pos[k].z() + s.radius[k]);
  }
  return top;
}

double DemWorld::max_relative_overlap() const {
  const SphereSnapshot s = snapshot(clumps_, templates_);
  double worst = 0.0;
  for (const SpherePair& p : brute_force_overlaps(s.pos, s.radius, s.owner)) {
    const double delta = s.radius[p.a] + s.radius[p.b] - (s.pos[p.a] - s.pos[p.b]).norm();
    worst = std::max(worst, delta / std::min(s.radius[p.a], s.radius[p.b]));
  }
  return worst;
}

void DemWorld::write_particles(std::ostream& out) const {
  out << "id,template,x,y,z,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz\n";
  char buf[512];
  for (const ClumpInstance& c : clumps_) {
    const auto& p = c.position;
    const auto& q = c.orientation;
    const auto& v = c.linear_velocity;
    const auto& w = c.angular_velocity;
    std::snprintf(buf, sizeof buf,
                  "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  c.id, c.template_id, p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z(), v.x(), v.y(),
                  v.z(), w.x(), w.y(), w.z());
    out << buf;
  }
}

void DemWorld::read_particles(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,template,x", 0) != 0) {
    throw ConfigError("particle file: missing header");
  }
  std::vector<ClumpInstance> loaded;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("particle file: bad number on line " + std::to_string(line_no));
      }
    }
    if (v.size() != 15) throw ConfigError("particle file: expected 15 columns on line " + std::to_string(line_no));
    ClumpInstance c;
    c.id = static_cast<int>(v[0]);
    c.template_id = static_cast<int>(v[1]);
    if (c.template_id < 0 || c.template_id >= static_cast<int>(templates_.size())) {
      throw ConfigError("particle file: unknown template on line " + std::to_string(line_no));
    }
    c.position = Vec3(v[2], v[3], v[4]);
    c.orientation = Eigen::Quaterniond(v[5], v[6], v[7], v[8]);
    c.linear_velocity = Vec3(v[9], v[10], v[11]);
    c.angular_velocity = Vec3(v[12], v[13], v[14]);
    loaded.push_back(c);
    next_id_ = std::max(next_id_, c.id + 1);
  }
  clumps_ = std::move(loaded);
  candidates_.clear();
  boundary_history_.clear();
  rebuild_spheres();
}

SettleReport settle_bed(DemWorld& world, double max_time, double ke_threshold, int check_every) {
  // A bed counts as settled once its kinetic energy is below the threshold
  // and no longer rising; a freshly generated bed at rest is still falling.
  SettleReport rep;
  const double t0 = world.time();
  double previous = world.kinetic_energy();
  long k = 0;
  while (world.time() - t0 < max_time) {
    world.step();
    if (++k % check_every == 0) {
      const double ke = world.kinetic_energy();
      if (ke < ke_threshold && ke <= previous) {
        rep.converged = true;
        break;
      }
      previous = ke;
    }
  }
  rep.kinetic_energy = world.kinetic_energy();
  rep.time = world.time() - t0;

  const Vec3& L = world.config().domain;
  const int bins = 20;
  rep.surface_profile.resize(bins);
  double filled = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double w = L.x() / bins;
    rep.surface_profile[b] = world.surface_height((b + 0.5) * w, 0.5 * w);
    filled += rep.surface_profile[b] * w * L.y();
  }
  rep.packing_fraction = filled > 0.0 ? world.solid_volume() / filled : 0.0;
  return rep;
}

std::vector<ClumpInstance> generate_bed(const BedSpec& spec, const ClumpTemplate& tmpl, int template_id) {
  const double lattice_r = 1.02 * tmpl.bounding_radius;
  const auto sites = hcp_sample(spec.extents, lattice_r);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<ClumpInstance> out;
  out.reserve(sites.size());
  for (std::size_t k = 0; k < sites.size(); ++k) {
    ClumpInstance c;
    c.position = sites[k];
    Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
    q.normalize();
    c.orientation = q;
    c.template_id = template_id;
    c.material = 0;
    c.id = static_cast<int>(k);
    out.push_back(c);
  }
  return out;
}

}  // namespace terrasim
