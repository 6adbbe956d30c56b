#pragma once

// Planar snake chain driven by joint PD tracking of a gait, on rigid ground
// or on SCM terrain.

#include "terrasim/gait.hpp"
#include "terrasim/multibody.hpp"
#include "terrasim/scm.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace terrasim {

enum class Tier { kRigid, kScm, kDem };

struct ChainSimSpec {
  PlanarChainParams chain{7, 0.15, 0.6, 0.03, {}};
  double start_x = -0.45;       // m, link 0 centre
  double drop_height = 0.0;     // m, initial clearance above the ground
  GaitProgram gait;
  bool gait_enabled = true;
  std::optional<GaitTrajectory> trajectory;  // replaces the generator when set
  double kp = 50.0;             // N m/rad
  double kd = 1.0;              // N m s/rad
  double h = 1e-3;              // s
  double duration = 30.0;       // s, including the settle hold
  double settle = 2.0;          // s of zero-amplitude hold before the gait starts
  Tier tier = Tier::kRigid;
  SmoothedContactParams ground;
  ScmGridConfig grid;
  SoilParams soil;
  BulldozeParams bulldoze;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  void validate() const;
  long steps() const;
};

struct LinkWrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();  // about the link centre
  double power = 0.0;          // W, terrain force power on this link
};

struct ChainStepRecord {
  long step = 0;
  double t = 0.0;
  const VecX* q = nullptr;
  const VecX* v = nullptr;
  Vec3 com = Vec3::Zero();
  const std::vector<LinkWrench>* wrenches = nullptr;
  double contact_power = 0.0;  // power of the terrain forces on the chain, W
  bool converged = true;
  const ScmTerrain* terrain = nullptr;
};

struct ChainSimResult {
  GeneralizedState final_state;
  long steps = 0;
  int nonconverged = 0;
  std::size_t scm_nodes = 0;
};

/// Joint targets at absolute time t (zero during the settle hold).
VecX chain_joint_targets(const ChainSimSpec& spec, double t, VecX* rates = nullptr);

/// Runs the chain; `terrain` receives the SCM grid (unused for rigid ground).
/// on_step is called after every step. Throws UnstableSimulation when the
/// state becomes non-finite.
ChainSimResult simulate_chain(const ChainSimSpec& spec,
                              const std::function<void(const ChainStepRecord&)>& on_step = {},
                              std::unique_ptr<ScmTerrain>* terrain = nullptr);

}  // namespace terrasim
