#include "terrasim/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace terrasim;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kUnstable = 3, kIoError = 4 };

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  long seed = -1;
  int threads = 0;
  bool deterministic = false;
  double duration = 0.0;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "INI scenario file");
  app->add_option("--preset", c.preset, "built-in scenario preset");
  if (with_out) app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "random seed")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--deterministic", c.deterministic, "force sequential, reproducible reductions");
  app->add_option("--duration", c.duration, "simulated time in s")->check(CLI::PositiveNumber);
}

ScenarioConfig load(const Common& o) {
  if (o.config.empty() == o.preset.empty())
    throw ConfigError("give exactly one of --config or --preset");
  ScenarioConfig c = o.config.empty() ? load_preset(o.preset) : parse_config(o.config);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (o.threads > 0) c.threads = o.threads;
  if (o.deterministic) {
    c.deterministic = true;
    c.threads = 1;
  }
  if (o.duration > 0.0) c.duration = o.duration;
  if (!o.out.empty()) c.output_dir = o.out;
  c.sync();
  c.validate();
  for (const std::string& w : c.warnings) std::cerr << "warning: " << w << "\n";
  return c;
}

void print_metrics(const RunMetrics& m) {
  std::printf("scenario               %s (%s)\n", m.scenario.c_str(), m.tier.c_str());
  std::printf("displacement_per_cycle %.6g m\n", m.displacement_per_cycle);
  std::printf("net_heading            %.6g rad\n", m.net_heading);
  std::printf("peak_normal_force      %.6g N\n", m.peak_normal_force);
  std::printf("mean_contact_power     %.6g W\n", m.mean_contact_power);
  std::printf("rut_depth_max          %.6g m\n", m.rut_depth_max);
  std::printf("descent_distance       %.6g m\n", m.descent_distance);
  std::printf("steps                  %ld (non-converged %ld)\n", m.step_count, m.nonconvergence_count);
}

RunMetrics metrics_from(const std::string& path) {
  const fs::path p(path);
  return read_metrics_csv((fs::is_directory(p) ? p / "metrics.csv" : p).string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terrasim: terrain-robot contact scenarios"};
  app.require_subcommand(1);

  Common run_opts;
  CLI::App* run = app.add_subcommand("run", "run one scenario and write its logs");
  add_common(run, run_opts);

  std::vector<std::string> compare_inputs;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "compare metrics of finished runs");
  compare->add_option("runs", compare_inputs, "run directories or metrics.csv files")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "write the report to this file");

  Common gait_opts;
  double gait_rate = 500.0;
  CLI::App* gait = app.add_subcommand("gait-gen", "write a gait trajectory CSV");
  add_common(gait, gait_opts);
  gait->add_option("--rate", gait_rate, "rows per second")->check(CLI::PositiveNumber);

  Common bed_opts;
  CLI::App* bed = app.add_subcommand("bed-gen", "generate and settle a DEM bed snapshot");
  add_common(bed, bed_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      const ScenarioConfig c = load(run_opts);
      const RunMetrics m = run_scenario(c);
      print_metrics(m);
      std::printf("logs written to %s\n", c.output_dir.c_str());
    } else if (*compare) {
      std::vector<RunMetrics> runs;
      for (const std::string& p : compare_inputs) runs.push_back(metrics_from(p));
      const ComparisonReport rep = compare_runs(runs);
      std::ostringstream text;
      for (const std::string& l : rep.lines) text << l << "\n";
      for (const ComparisonCheck& c : rep.checks)
        text << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.lhs << " vs " << c.rhs << ")\n";
      std::cout << text.str();
      if (!compare_out.empty()) {
        std::ofstream out(compare_out);
        out << text.str();
        out.close();
        if (!out) throw IoError("cannot write " + compare_out);
      }
    } else if (*gait) {
      Common scenario_opts = gait_opts;
      scenario_opts.duration = 0.0;  // here --duration is the trajectory length
      const ScenarioConfig c = load(scenario_opts);
      if (c.motion != Motion::kSidewind) throw ConfigError("gait-gen needs a sidewind scenario");
      const double duration = gait_opts.duration > 0.0 ? gait_opts.duration : c.duration - c.settle;
      const std::string path = gait_opts.out.empty() ? "gait.csv" : gait_opts.out;
      gait_to_csv(c.chain.gait, duration, gait_rate, path);
      std::printf("wrote %s\n", path.c_str());
    } else if (*bed) {
      ScenarioConfig c = load(bed_opts);
      if (c.tier != Tier::kDem) throw ConfigError("bed-gen needs a dem scenario");
      std::error_code ec;
      fs::create_directories(c.output_dir, ec);
      if (ec) throw IoError("cannot create " + c.output_dir);
      SettleReport rep;
      const DemWorld world = prepare_dem_bed(c, &rep);
      const fs::path path = fs::path(c.output_dir) / "bed.csv";
      std::ofstream out(path);
      if (!out) throw IoError("cannot write " + path.string());
      world.write_particles(out);
      out.close();
      if (!out) throw IoError("write failed: " + path.string());
      std::printf("clumps %zu, spheres %zu, settled %s after %.3f s, kinetic energy %.3g J, packing %.3f\n",
                  world.clumps().size(), world.sphere_count(), rep.converged ? "yes" : "no", rep.time,
                  rep.kinetic_energy, rep.packing_fraction);
      std::printf("wrote %s\n", path.string().c_str());
    }
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const UnstableSimulation& e) {
    std::cerr << "unstable simulation: " << e.what() << "\n";
    return kUnstable;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
