#pragma once

// Scenario harness: configuration, the canonical runs, log files, metrics
// recomputed from those logs, and run comparison.

#include "terrasim/chain_sim.hpp"
#include "terrasim/dem.hpp"
#include "terrasim/ini.hpp"
#include "terrasim/tumbling.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace terrasim {

enum class Motion { kSidewind, kDrop, kTumble };

struct DemScenario {
  DemWorldConfig world;              // domain, slope, caps, broad phase
  DemMaterial terrain = DemMaterial::terrain();
  DemMaterial wheel = DemMaterial::wheel();
  PairOverride wheel_terrain{0.67, 0.2};
  BedSpec bed;
  double level_settle_time = 0.4;    // s, gravity normal to the floor
  double level_settle_ke = 1e-3;     // J
  double tilt_settle_time = 0.6;     // s, after tilting to the slope
  double tilt_settle_ke = 2e-3;      // J
  std::string bed_file;              // settled bed to load instead of generating
  double output_fps = 10.0;
};

struct ScenarioConfig {
  std::string id = "sidewind-rigid";
  Tier tier = Tier::kRigid;
  Motion motion = Motion::kSidewind;

  double h = 1e-3;           // s
  double duration = 30.0;    // s, total simulated time including settle
  double settle = 2.0;       // s
  double log_rate = 100.0;   // Hz, trajectory rows
  double terrain_rate = 1.0; // Hz, heightmap frames
  std::uint64_t seed = 1;
  bool deterministic = true;
  int threads = 1;
  std::string output_dir = "out";

  ChainSimSpec chain;        // chain, gait, ground, soil, grid for sidewind and drops
  std::string gait_trajectory;
  std::string soil_preset;
  TumbleConfig tumble;       // wheel, spin and ground for both tumbling tiers
  DemScenario dem;
  double slope = 24.0 * M_PI / 180.0;  // rad, tumbling incline

  std::vector<std::string> warnings;  // unit-suspicious magnitudes

  /// Copies the top-level run settings (h, duration, seed, threads, ...)
  /// into the per-model blocks. Call after editing fields directly.
  void sync();
  void validate() const;
  /// Gait identity used to decide whether two runs are comparable.
  std::string motion_signature() const;
};

/// Embedded presets by name (file stem under presets/).
const std::map<std::string, std::string>& builtin_presets();
std::string preset_text(const std::string& name);

ScenarioConfig parse_config(const IniDocument& doc);
ScenarioConfig parse_config_text(const std::string& text, const std::string& source = "<input>");
/// Throws IoError when unreadable, ParseError / ConfigError when invalid.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig load_preset(const std::string& name);

/// Canonical INI text that parses back to the same configuration.
std::string config_echo(const ScenarioConfig& cfg);

const char* tier_name(Tier t);
const char* motion_name(Motion m);

struct RunMetrics {
  std::string scenario;
  std::string tier;
  std::string signature;
  double displacement_per_cycle = 0.0;  // m, along the head direction
  double net_heading = 0.0;             // rad
  double peak_normal_force = 0.0;       // N
  double mean_contact_power = 0.0;      // W, mean |power|
  double rut_depth_max = 0.0;           // m
  double descent_distance = 0.0;        // m
  long step_count = 0;
  long nonconvergence_count = 0;

  bool all_finite() const;
};

/// Runs the scenario and writes its log files into cfg.output_dir.
/// Throws UnstableSimulation, ConfigError or IoError.
RunMetrics run_scenario(const ScenarioConfig& cfg);

/// Metrics recomputed from the log files of a finished run directory.
RunMetrics recompute_metrics(const std::string& run_dir);
RunMetrics read_metrics_csv(const std::string& path);
void write_metrics_csv(const RunMetrics& m, const std::string& path);

/// Log files a successful run of this configuration produces.
std::vector<std::string> expected_log_files(const ScenarioConfig& cfg);

struct ComparisonCheck {
  std::string name;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ComparisonReport {
  std::vector<std::string> lines;  // per-metric deltas against the first run
  std::vector<ComparisonCheck> checks;
  bool all_pass() const;
};

/// Needs at least two runs with the same motion signature; throws
/// ConfigError otherwise.
ComparisonReport compare_runs(const std::vector<RunMetrics>& runs);

/// Settled DEM bed for the scenario (generated and settled, or loaded).
DemWorld prepare_dem_bed(const ScenarioConfig& cfg, SettleReport* report = nullptr);

}  // namespace terrasim
