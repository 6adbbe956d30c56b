#include "terrasim/scm.hpp"

#include "terrasim/multibody.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace terrasim {

void SoilParams::validate() const {
  if (K_c < 0 || K_phi < 0 || cohesion < 0 || k_shear < 0 || K_elastic < 0 || R_damp < 0) {
    throw ConfigError("soil: parameters must be non-negative");
  }
  if (!(n_exp > 0.0) || n_exp > 2.0) throw ConfigError("soil: n_exp must lie in (0, 2]");
  if (phi < 0.0 || phi >= M_PI / 2) throw ConfigError("soil: phi must lie in [0, pi/2)");
  if (!(k_shear > 0.0)) throw ConfigError("soil: k_shear must be positive");
  if (!(K_elastic > 0.0)) throw ConfigError("soil: K_elastic must be positive");
  if (!(eps_v > 0.0)) throw ConfigError("soil: eps_v must be positive");
}

void BulldozeParams::validate() const {
  if (!(erosion_angle > 0.0) || erosion_angle >= M_PI / 2) {
    throw ConfigError("bulldozing: erosion angle must lie in (0, pi/2)");
  }
  if (!(flow_factor > 0.0) || flow_factor > 2.0) {
    throw ConfigError("bulldozing: flow factor must lie in (0, 2]");
  }
  if (iterations < 0 || rings < 0) throw ConfigError("bulldozing: counts must be non-negative");
}

void ScmGridConfig::validate() const {
  if (!(spacing > 0.0)) throw ConfigError("scm grid: spacing must be positive");
  if (!(length_x > 0.0) || !(length_y > 0.0)) throw ConfigError("scm grid: extent must be positive");
}

std::optional<RayHit> raycast_vertical(double x, double y, double surface_z,
                                       const std::vector<Shape>& shapes) {
  std::optional<RayHit> best;
  for (const Shape& s : shapes) {
    const Aabb2 fp = footprint(s);
    if (x < fp.x_min || x > fp.x_max || y < fp.y_min || y > fp.y_max) continue;
    const auto z = lowest_intersection(s, x, y);
    if (!z || *z >= surface_z) continue;
    if (!best || *z < best->z) {
      RayHit h;
      h.z = *z;
      h.depth = surface_z - *z;
      h.body = s.body;
      h.point = Vec3(x, y, *z);
      best = h;
    }
  }
  return best;
}

ContactPatch patch_geometry(const std::vector<std::pair<int, int>>& nodes, double spacing) {
  ContactPatch patch;
  patch.nodes = nodes;
  if (nodes.empty()) return patch;
  std::vector<std::pair<int, int>> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto present = [&sorted](int i, int j) {
    return std::binary_search(sorted.begin(), sorted.end(), std::make_pair(i, j));
  };
  int edges = 0;
  for (const auto& [i, j] : sorted) {
    edges += !present(i + 1, j) + !present(i - 1, j) + !present(i, j + 1) + !present(i, j - 1);
  }
  patch.area = static_cast<double>(sorted.size()) * spacing * spacing;
  patch.perimeter = edges * spacing;
  patch.width = 2.0 * patch.area / patch.perimeter;
  return patch;
}

double bekker_pressure(double z, double b, const SoilParams& soil) {
  if (!(b > 0.0)) throw std::domain_error("bekker_pressure: patch width must be positive");
  if (z <= 0.0) return 0.0;
  return (soil.K_c / b + soil.K_phi) * std::pow(z, soil.n_exp);
}

double bekker_pressure_slope(double z, double b, const SoilParams& soil) {
  if (z <= 0.0) return 0.0;
  return soil.n_exp * bekker_pressure(z, b, soil) / z;
}

double shear_strength(double p, const SoilParams& soil) {
  return soil.cohesion + p * std::tan(soil.phi);
}

double janosi_shear(double j, double p, const SoilParams& soil) {
  return shear_strength(p, soil) * (-std::expm1(-j / soil.k_shear));
}

bool update_plasticity(SoilNode& node, double sinkage, double b, const SoilParams& soil) {
  const double s = std::max(0.0, sinkage);
  const double elastic_cap = std::min(s, bekker_pressure(s, b, soil) / soil.K_elastic);
  const double candidate = s - elastic_cap;
  const bool yielding = s > 0.0 && candidate >= node.sinkage_plastic;
  node.sinkage_plastic = std::max(node.sinkage_plastic, candidate);
  node.sinkage_elastic = std::max(0.0, s - node.sinkage_plastic);
  node.sinkage_total = node.sinkage_plastic + node.sinkage_elastic;
  node.pressure = soil.K_elastic * node.sinkage_elastic;
  return yielding;
}

NodeResponse node_reaction(SoilNode& node, double depth, double sink_rate, const Vec2& slip,
                           double b, double spacing, const SoilParams& soil, double h) {
  NodeResponse r;
  if (!(depth > 0.0)) return r;

  const double area = spacing * spacing;
  const double plastic_before = node.sinkage_plastic;
  const double s = node.sinkage_plastic + depth;
  const bool yielding = update_plasticity(node, s, b, soil);
  r.plastic_increment = node.sinkage_plastic - plastic_before;

  const double damping_pressure = soil.R_damp * std::max(0.0, sink_rate);
  node.pressure += damping_pressure;
  r.normal_force = node.pressure * area;
  r.vertical_stiffness = area * (yielding ? std::min(soil.K_elastic, bekker_pressure_slope(s, b, soil))
                                          : soil.K_elastic);
  r.vertical_damping = sink_rate > 0.0 ? soil.R_damp * area : 0.0;

  const double speed = slip.norm();
  node.shear_j += speed * h;
  node.shear_stress = janosi_shear(node.shear_j, node.pressure, soil);
  const double shear_force = node.shear_stress * area;
  if (speed > 0.0) {
    const double denom = std::max(speed, soil.eps_v);
    r.tangential_force = -shear_force * slip / denom;
    if (speed < soil.eps_v) {
      r.tangential_damping = shear_force / soil.eps_v * Eigen::Matrix2d::Identity();
    } else {
      const Vec2 dir = slip / speed;
      r.tangential_damping = shear_force / speed * (Eigen::Matrix2d::Identity() - dir * dir.transpose());
    }
  } else {
    r.tangential_damping = shear_force / soil.eps_v * Eigen::Matrix2d::Identity();
  }
  node.in_contact = true;
  return r;
}

// ---------------------------------------------------------------------------

ScmTerrain::ScmTerrain(ScmGridConfig grid, SoilParams soil, BulldozeParams bulldoze)
    : grid_(grid), soil_(soil), bulldoze_(bulldoze) {
  grid_.validate();
  soil_.validate();
  bulldoze_.validate();
  nx_ = static_cast<int>(std::floor(grid_.length_x / grid_.spacing + 1e-9)) + 1;
  ny_ = static_cast<int>(std::floor(grid_.length_y / grid_.spacing + 1e-9)) + 1;
}

bool ScmTerrain::in_extent(int i, int j) const { return i >= 0 && i < nx_ && j >= 0 && j < ny_; }

std::pair<int, int> ScmTerrain::cell_of(double x, double y) const {
  const double x0 = grid_.center_x - 0.5 * grid_.length_x;
  const double y0 = grid_.center_y - 0.5 * grid_.length_y;
  return {static_cast<int>(std::lround((x - x0) / grid_.spacing)),
          static_cast<int>(std::lround((y - y0) / grid_.spacing))};
}

Eigen::Vector2d ScmTerrain::position(int i, int j) const {
  return {grid_.center_x - 0.5 * grid_.length_x + i * grid_.spacing,
          grid_.center_y - 0.5 * grid_.length_y + j * grid_.spacing};
}

int ScmTerrain::index_of(int i, int j) const {
  const auto it = lookup_.find(key(i, j));
  return it == lookup_.end() ? -1 : it->second;
}

const SoilNode* ScmTerrain::find(int i, int j) const {
  const int idx = index_of(i, j);
  return idx < 0 ? nullptr : &nodes_[idx];
}

SoilNode& ScmTerrain::node_at(int i, int j) {
  if (!in_extent(i, j)) throw std::out_of_range("scm: cell outside the terrain extent");
  const auto [it, inserted] = lookup_.try_emplace(key(i, j), static_cast<int>(nodes_.size()));
  if (inserted) {
    SoilNode n;
    n.z0 = grid_.reference_z;
    nodes_.push_back(n);
    cells_.emplace_back(i, j);
  }
  return nodes_[it->second];
}

double ScmTerrain::surface_height(double x, double y) const {
  const auto [i, j] = cell_of(x, y);
  const SoilNode* n = find(i, j);
  return n ? n->surface() : grid_.reference_z;
}

double ScmTerrain::displaced_volume() const {
  double v = 0.0;
  for (const SoilNode& n : nodes_) v += n.z0 - n.surface();
  return v * grid_.spacing * grid_.spacing;
}

double ScmTerrain::deposit_volume() const {
  double v = 0.0;
  for (const SoilNode& n : nodes_) v += n.deposit;
  return v * grid_.spacing * grid_.spacing;
}

std::vector<BodyWrench> ScmTerrain::update(const std::vector<ScmBody>& bodies, double h) {
  if (!(h > 0.0)) throw ConfigError("scm update: h must be positive");
  stats_ = ScmStepStats{};

  // Nodes released since the last step rebound elastically.
  for (int idx : previous_contacts_) {
    SoilNode& n = nodes_[idx];
    n.in_contact = false;
    n.sinkage_elastic = 0.0;
    n.sinkage_total = n.sinkage_plastic;
    n.pressure = 0.0;
    n.shear_stress = 0.0;
  }

  // Ray casting restricted to each shape's footprint. The deepest body owns
  // a node touched by several.
  struct Candidate {
    double z;
    int body;  // index into `bodies`
  };
  std::unordered_map<std::int64_t, int> candidate_slot;
  std::vector<std::pair<int, int>> candidate_cells;
  std::vector<Candidate> candidates;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    for (const Shape& shape : bodies[b].shapes) {
      const Aabb2 fp = footprint(shape);
      const auto lo = cell_of(fp.x_min, fp.y_min);
      const auto hi = cell_of(fp.x_max, fp.y_max);
      for (int i = std::max(0, lo.first); i <= std::min(nx_ - 1, hi.first); ++i) {
        for (int j = std::max(0, lo.second); j <= std::min(ny_ - 1, hi.second); ++j) {
          const Eigen::Vector2d xy = position(i, j);
          const auto z = lowest_intersection(shape, xy.x(), xy.y());
          if (!z) continue;
          const SoilNode* n = find(i, j);
          const double rest = n ? n->rest_surface() : grid_.reference_z;
          if (*z >= rest) continue;
          const auto [it, inserted] = candidate_slot.try_emplace(key(i, j), static_cast<int>(candidates.size()));
          if (inserted) {
            candidates.push_back({*z, static_cast<int>(b)});
            candidate_cells.emplace_back(i, j);
          } else if (*z < candidates[it->second].z) {
            candidates[it->second] = {*z, static_cast<int>(b)};
          }
        }
      }
    }
  }

  std::vector<std::vector<std::pair<int, int>>> body_cells(bodies.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    body_cells[candidates[c].body].push_back(candidate_cells[c]);
  }
  std::vector<double> width(bodies.size(), 0.0);
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (!body_cells[b].empty()) width[b] = patch_geometry(body_cells[b], grid_.spacing).width;
  }

  std::vector<BodyWrench> wrenches(bodies.size());
  for (std::size_t b = 0; b < bodies.size(); ++b) wrenches[b].body = bodies[b].id;
  std::vector<double> plastic_volume(bodies.size(), 0.0);
  std::vector<int> current;
  current.reserve(candidates.size());

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto [i, j] = candidate_cells[c];
    const int b = candidates[c].body;
    const ScmBody& body = bodies[b];
    SoilNode& n = node_at(i, j);
    current.push_back(index_of(i, j));

    const Eigen::Vector2d xy = position(i, j);
    const Vec3 p(xy.x(), xy.y(), candidates[c].z);
    const Vec3 r = p - body.origin;
    const Vec3 vel = body.linear_velocity + body.angular_velocity.cross(r);
    const double depth = n.rest_surface() - candidates[c].z;

    const NodeResponse resp = node_reaction(n, depth, -vel.z(), vel.head<2>(), width[b],
                                            grid_.spacing, soil_, h);
    const Vec3 f(resp.tangential_force.x(), resp.tangential_force.y(), resp.normal_force);
    BodyWrench& w = wrenches[b];
    w.force += f;
    w.torque += r.cross(f);
    ++w.nodes;

    Mat3 dp = Mat3::Zero();
    dp.topLeftCorner<2, 2>() = resp.tangential_damping;
    dp(2, 2) = resp.vertical_damping + h * resp.vertical_stiffness;
    Eigen::Matrix<double, 3, 6> g;
    g.leftCols<3>().setIdentity();
    g.rightCols<3>() = -skew(r);
    w.damping += g.transpose() * dp * g;

    plastic_volume[b] += resp.plastic_increment;
  }
  for (std::size_t b = 0; b < bodies.size(); ++b) wrenches[b].patch_width = width[b];
  stats_.contact_nodes = static_cast<int>(current.size());

  if (soil_.reset_shear_on_separation) {
    for (int idx : previous_contacts_) {
      if (!nodes_[idx].in_contact) nodes_[idx].shear_j = 0.0;
    }
  }

  if (bulldoze_.enabled) {
    // Plastically displaced soil is pushed to the cells bordering each patch.
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      if (plastic_volume[b] <= 0.0) continue;
      stats_.plastic_volume += plastic_volume[b] * grid_.spacing * grid_.spacing;
      std::vector<std::pair<int, int>> border;
      for (const auto& [i, j] : body_cells[b]) {
        const std::pair<int, int> nb[4] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
        for (const auto& [a, c] : nb) {
          if (!in_extent(a, c) || candidate_slot.count(key(a, c))) continue;
          border.emplace_back(a, c);
        }
      }
      std::sort(border.begin(), border.end());
      border.erase(std::unique(border.begin(), border.end()), border.end());
      if (border.empty()) continue;
      const double share = plastic_volume[b] / static_cast<double>(border.size());
      for (const auto& [a, c] : border) node_at(a, c).deposit += share;
    }
    stats_.volume_before_erosion = displaced_volume();
    erode(candidate_cells);
    stats_.volume_after_erosion = displaced_volume();
  }

  previous_contacts_ = std::move(current);
  return wrenches;
}

void ScmTerrain::erode(const std::vector<std::pair<int, int>>& seeds) {
  if (bulldoze_.iterations <= 0 || seeds.empty()) return;
  const int rings = bulldoze_.rings;

  std::unordered_map<std::int64_t, int> slot;
  std::vector<std::pair<int, int>> domain;
  for (const auto& [si, sj] : seeds) {
    for (int di = -rings; di <= rings; ++di) {
      for (int dj = -rings; dj <= rings; ++dj) {
        const int i = si + di, j = sj + dj;
        if (!in_extent(i, j)) continue;
        const SoilNode* n = find(i, j);
        if (n && n->in_contact) continue;
        if (slot.try_emplace(key(i, j), static_cast<int>(domain.size())).second) {
          domain.emplace_back(i, j);
        }
      }
    }
  }
  if (domain.empty()) return;

  const double critical = grid_.spacing * std::tan(bulldoze_.erosion_angle);
  std::vector<double> height(domain.size());
  std::vector<double> delta(domain.size());
  std::vector<int> lower;
  double moved = 0.0;
  for (int it = 0; it < bulldoze_.iterations; ++it) {
    for (std::size_t d = 0; d < domain.size(); ++d) {
      const SoilNode* n = find(domain[d].first, domain[d].second);
      height[d] = n ? n->surface() : grid_.reference_z;
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    for (std::size_t d = 0; d < domain.size(); ++d) {
      const auto [i, j] = domain[d];
      const std::pair<int, int> nb[4] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
      lower.clear();
      for (const auto& [a, c] : nb) {
        const auto found = slot.find(key(a, c));
        if (found == slot.end()) continue;
        if (height[d] - height[found->second] > critical) lower.push_back(found->second);
      }
      if (lower.empty()) continue;
      const double scale = bulldoze_.flow_factor / (2.0 * static_cast<double>(lower.size()));
      for (int o : lower) {
        const double t = scale * (height[d] - height[o] - critical);
        delta[d] -= t;
        delta[o] += t;
        moved += t;
      }
    }
    for (std::size_t d = 0; d < domain.size(); ++d) {
      if (delta[d] != 0.0) node_at(domain[d].first, domain[d].second).deposit += delta[d];
    }
  }
  stats_.eroded_volume += moved * grid_.spacing * grid_.spacing;
}

void ScmTerrain::write_heightmap(std::ostream& out) const {
  std::vector<int> order(nodes_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::sort(order.begin(), order.end(), [this](int a, int b) { return cells_[a] < cells_[b]; });
  out << "i,j,x,y,z0,sinkage_plastic,sinkage_elastic,shear_j,pressure,deposit,z\n";
  char buf[512];
  for (int k : order) {
    const auto [i, j] = cells_[k];
    const SoilNode& n = nodes_[k];
    const Eigen::Vector2d xy = position(i, j);
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  i, j, xy.x(), xy.y(), n.z0, n.sinkage_plastic, n.sinkage_elastic, n.shear_j,
                  n.pressure, n.deposit, n.surface());
    out << buf;
  }
}

}  // namespace terrasim
