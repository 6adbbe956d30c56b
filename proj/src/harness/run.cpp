#include "terrasim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace terrasim {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct LogTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ParseError("log is missing column '" + name + "'", 1);
    return static_cast<int>(it - columns.begin());
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& columns) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    for (std::size_t c = 0; c < columns.size(); ++c) out_ << (c ? "," : "") << columns[c];
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    char buf[40];
    for (std::size_t c = 0; c < values.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values[c]);
      if (c) out_ << ',';
      out_ << buf;
    }
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

LogTable parse_table(std::istream& in, const std::string& name) {
  LogTable t;
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw ParseError(name + ": empty log", 1);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> r;
    r.reserve(t.columns.size());
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw ParseError(name + ": bad number", line_no);
      r.push_back(v);
      if (*end == '\0') break;
      if (*end != ',') throw ParseError(name + ": bad separator", line_no);
      p = end + 1;
    }
    if (r.size() != t.columns.size()) throw ParseError(name + ": wrong field count", line_no);
    t.rows.push_back(std::move(r));
  }
  return t;
}

LogTable read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return parse_table(in, path.string());
}

std::string frame_name(const char* stem, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.csv", stem, k);
  return buf;
}

long stride_for(double rate, double h) { return std::max(1L, std::lround(1.0 / (rate * h))); }

int terrain_frames(const ScenarioConfig& c) {
  const long steps = std::lround(c.duration / c.h);
  const long stride = stride_for(c.terrain_rate, c.h);
  return static_cast<int>(steps / stride + (steps % stride ? 1 : 0));
}

int particle_frames(const ScenarioConfig& c) {
  const long steps = std::lround(c.duration / c.h);
  return static_cast<int>(1 + steps / stride_for(c.tumble.output_fps, c.h));
}

double interpolate(const LogTable& t, int tc, int vc, double at) {
  const auto& rows = t.rows;
  if (rows.empty()) return 0.0;
  if (at <= rows.front()[tc]) return rows.front()[vc];
  if (at >= rows.back()[tc]) return rows.back()[vc];
  const auto it = std::lower_bound(rows.begin(), rows.end(), at,
                                   [tc](const std::vector<double>& r, double x) { return r[tc] < x; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (at - a[tc]) / (b[tc] - a[tc]);
  return (1.0 - w) * a[vc] + w * b[vc];
}

// Metrics of the chain scenarios. The head is link 0, so forward travel is
// along -x for the straight initial pose.
RunMetrics chain_metrics(const ScenarioConfig& c, const LogTable& traj, const LogTable& wrench,
                         const LogTable* heightmap) {
  RunMetrics m;
  const int tc = traj.col("t"), xc = traj.col("com_x"), yc = traj.col("com_y");
  const double t_end = traj.rows.empty() ? 0.0 : traj.rows.back()[tc];
  const double period = 1.0 / c.chain.gait.f;
  const int cycles = std::min(3, static_cast<int>(std::floor((t_end - c.settle) / period + 1e-9)));
  if (cycles > 0) {
    const double t_a = t_end - cycles * period;
    m.displacement_per_cycle = (interpolate(traj, tc, xc, t_a) - interpolate(traj, tc, xc, t_end)) / cycles;
  }
  const double dx = interpolate(traj, tc, xc, c.settle) - interpolate(traj, tc, xc, t_end);
  const double dy = interpolate(traj, tc, yc, t_end) - interpolate(traj, tc, yc, c.settle);
  m.net_heading = std::atan2(dy, dx);

  const int wt = wrench.col("t"), fz = wrench.col("fz"), pw = wrench.col("power");
  double peak = 0.0, power_sum = 0.0;
  long samples = 0;
  for (std::size_t k = 0; k < wrench.rows.size();) {
    const double t = wrench.rows[k][wt];
    double f = 0.0, p = 0.0;
    for (; k < wrench.rows.size() && wrench.rows[k][wt] == t; ++k) {
      f += wrench.rows[k][fz];
      p += wrench.rows[k][pw];
    }
    peak = std::max(peak, f);
    power_sum += std::abs(p);
    ++samples;
  }
  m.peak_normal_force = peak;
  m.mean_contact_power = samples ? power_sum / samples : 0.0;
  if (heightmap) {
    const int sp = heightmap->col("sinkage_plastic"), dp = heightmap->col("deposit");
    for (const auto& r : heightmap->rows) m.rut_depth_max = std::max(m.rut_depth_max, r[sp] - r[dp]);
  }
  return m;
}

RunMetrics tumble_metrics(const LogTable& wheel) {
  RunMetrics m;
  if (wheel.rows.empty()) return m;
  const int x = wheel.col("x"), fz = wheel.col("Fz"), om = wheel.col("omega");
  const int vx = wheel.col("vx"), fx = wheel.col("Fx"), ty = wheel.col("Ty");
  m.descent_distance = wheel.rows.back()[x] - wheel.rows.front()[x];
  double power = 0.0;
  for (const auto& r : wheel.rows) {
    m.peak_normal_force = std::max(m.peak_normal_force, r[fz]);
    double p = r[om] * r[ty];
    for (int k = 0; k < 3; ++k) p += r[fx + k] * r[vx + k];
    power += std::abs(p);
  }
  m.mean_contact_power = power / wheel.rows.size();
  return m;
}

void finish_metrics(RunMetrics& m, const ScenarioConfig& c, long steps, long nonconverged) {
  m.scenario = c.id;
  m.tier = tier_name(c.tier);
  m.signature = c.motion_signature();
  m.step_count = steps;
  m.nonconvergence_count = nonconverged;
}

void write_manifest(const fs::path& dir, const ScenarioConfig& c, long steps, long nonconverged) {
  std::ofstream out(dir / "run_manifest.ini");
  if (!out) throw IoError("cannot write " + (dir / "run_manifest.ini").string());
  out << "# terrasim run manifest\n[manifest]\nversion = " << kVersion << "\nseed = " << c.seed
      << "\ndeterministic = " << (c.deterministic ? "true" : "false") << "\nthreads = " << c.threads
      << "\nsteps = " << steps << "\nnonconverged = " << nonconverged << "\n\n"
      << config_echo(c);
  out.close();
  if (!out) throw IoError("write failed: run_manifest.ini");
}

LogTable run_chain(const ScenarioConfig& c, const fs::path& dir, long& steps, long& nonconverged,
                   LogTable& wrench, std::string& last_heightmap) {
  const int links = c.chain.chain.links;
  LogTable traj;
  traj.columns = {"t", "x", "z", "theta"};
  for (int j = 0; j < links - 1; ++j) traj.columns.push_back("q" + std::to_string(j));
  for (const char* s : {"com_x", "com_y", "com_z"}) traj.columns.push_back(s);
  wrench.columns = {"t", "body_id", "fx", "fy", "fz", "tx", "ty", "tz", "power"};

  CsvWriter traj_out(dir / "trajectory.csv", traj.columns);
  CsvWriter wrench_out(dir / "wrench.csv", wrench.columns);
  const long log_stride = stride_for(c.log_rate, c.h);
  const long terrain_stride = stride_for(c.terrain_rate, c.h);
  const long total = std::lround(c.duration / c.h);
  int frame = 0;

  auto traj_row = [&](double t, const VecX& q, const Vec3& com) {
    std::vector<double> r{t, q[0], q[1], q[2]};
    for (int j = 3; j < q.size(); ++j) r.push_back(q[j]);
    r.insert(r.end(), {com.x(), com.y(), com.z()});
    traj_out.row(r);
    traj.rows.push_back(std::move(r));
  };
  {
    PlanarChain chain(c.chain.chain);
    const double z0 = (c.tier == Tier::kScm ? c.chain.grid.reference_z : 0.0) + c.chain.chain.link_radius +
                      c.chain.drop_height;
    const VecX q0 = chain.straight_configuration(c.chain.start_x, z0);
    traj_row(0.0, q0, chain.center_of_mass(q0));
  }

  const ChainSimResult res = simulate_chain(c.chain, [&](const ChainStepRecord& rec) {
    for (int b = 0; b < links; ++b) {
      const LinkWrench& w = (*rec.wrenches)[b];
      std::vector<double> r{rec.t, static_cast<double>(b), w.force.x(), w.force.y(), w.force.z(),
                            w.torque.x(), w.torque.y(), w.torque.z(), w.power};
      wrench_out.row(r);
      wrench.rows.push_back(std::move(r));
    }
    if (rec.step % log_stride == 0) traj_row(rec.t, *rec.q, rec.com);
    if (rec.terrain && (rec.step % terrain_stride == 0 || rec.step == total)) {
      std::ostringstream hm;
      rec.terrain->write_heightmap(hm);
      last_heightmap = hm.str();
      const fs::path p = dir / frame_name("heightmap", ++frame);
      std::ofstream out(p);
      out << last_heightmap;
      out.close();
      if (!out) throw IoError("write failed: " + p.string());
    }
  });
  traj_out.close();
  wrench_out.close();
  steps = res.steps;
  nonconverged = res.nonconverged;
  return traj;
}

LogTable wheel_table(const std::vector<WheelLogRow>& frames) {
  LogTable t;
  t.columns = {"t", "x", "y", "z", "roll", "vx", "vy", "vz", "omega",
               "Fx", "Fy", "Fz", "Tx", "Ty", "Tz", "contact_count"};
  for (const WheelLogRow& f : frames) {
    t.rows.push_back({f.t, f.position.x(), f.position.y(), f.position.z(), f.roll, f.velocity.x(),
                      f.velocity.y(), f.velocity.z(), f.omega, f.force.x(), f.force.y(), f.force.z(),
                      f.torque.x(), f.torque.y(), f.torque.z(), static_cast<double>(f.contacts)});
  }
  return t;
}

void write_table(const LogTable& t, const fs::path& path) {
  CsvWriter w(path, t.columns);
  for (const auto& r : t.rows) w.row(r);
  w.close();
}

void write_particles(const DemWorld& world, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  world.write_particles(out);
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

Vec3 slope_gravity(const ScenarioConfig& c) {
  DemWorldConfig w;
  w.slope = c.slope;
  return w.gravity_vector();
}

}  // namespace

bool RunMetrics::all_finite() const {
  for (double v : {displacement_per_cycle, net_heading, peak_normal_force, mean_contact_power,
                   rut_depth_max, descent_distance})
    if (!std::isfinite(v)) return false;
  return true;
}

DemWorld prepare_dem_bed(const ScenarioConfig& cfg, SettleReport* report) {
  ScenarioConfig c = cfg;
  c.sync();
  const DemScenario& d = c.dem;
  const ClumpTemplate tmpl = ClumpTemplate::triangle(d.bed.template_volume, d.bed.scale, d.bed.density);
  DemWorldConfig wc = d.world;
  wc.h = c.h;
  wc.slope = c.slope;
  wc.threads = c.threads;
  DemWorld world(wc, {tmpl}, {d.terrain, d.wheel}, 1);
  world.set_pair_override(0, 1, d.wheel_terrain);
  if (!d.bed_file.empty()) {
    std::ifstream in(d.bed_file);
    if (!in) throw IoError("cannot read bed file " + d.bed_file);
    world.read_particles(in);
    if (report) *report = SettleReport{};
    return world;
  }
  BedSpec spec = d.bed;
  spec.seed = c.seed;
  const std::vector<ClumpInstance> bed = generate_bed(spec, tmpl, 0);
  if (bed.empty()) {
    throw ConfigError("dem fill region holds no clump; each fill extent must exceed " +
                      std::to_string(2.04 * tmpl.bounding_radius) + " m");
  }
  for (const ClumpInstance& ci : bed) world.add_clump(ci);
  world.set_slope(0.0);
  settle_bed(world, d.level_settle_time, d.level_settle_ke);
  world.set_slope(c.slope);
  const SettleReport rep = settle_bed(world, d.tilt_settle_time, d.tilt_settle_ke);
  if (report) *report = rep;
  return world;
}

std::vector<std::string> expected_log_files(const ScenarioConfig& c) {
  std::vector<std::string> files{"metrics.csv", "run_manifest.ini"};
  if (c.motion == Motion::kTumble) {
    files.push_back("wheel.csv");
    if (c.tier == Tier::kDem) {
      files.push_back("bed.csv");
      for (int k = 0; k < particle_frames(c); ++k) files.push_back(frame_name("particles", k));
    }
  } else {
    files.push_back("trajectory.csv");
    files.push_back("wrench.csv");
    if (c.tier == Tier::kScm)
      for (int k = 1; k <= terrain_frames(c); ++k) files.push_back(frame_name("heightmap", k));
  }
  return files;
}

RunMetrics run_scenario(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.sync();
  c.validate();
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + c.output_dir);

  RunMetrics m;
  long steps = 0, nonconverged = 0;
  if (c.motion == Motion::kTumble) {
    const TumbleConfig& tc = c.tumble;
    TumbleResult res;
    if (c.tier == Tier::kDem) {
      DemWorld world = prepare_dem_bed(c);
      write_particles(world, dir / "bed.csv");
      write_particles(world, dir / frame_name("particles", 0));
      TumbleCallbacks cb;
      cb.on_frame = [&](const DemWorld& w, int frame) { write_particles(w, dir / frame_name("particles", frame)); };
      res = run_tumbling(world, tc, cb);
    } else {
      res = run_tumbling_rigid(tc, c.h, slope_gravity(c));
    }
    const LogTable wheel = wheel_table(res.frames);
    write_table(wheel, dir / "wheel.csv");
    steps = res.steps;
    nonconverged = res.nonconverged;
    m = tumble_metrics(wheel);
  } else {
    LogTable wrench;
    std::string heightmap;
    const LogTable traj = run_chain(c, dir, steps, nonconverged, wrench, heightmap);
    if (c.tier == Tier::kScm) {
      std::istringstream in(heightmap);
      const LogTable hm = parse_table(in, "heightmap");
      m = chain_metrics(c, traj, wrench, &hm);
    } else {
      m = chain_metrics(c, traj, wrench, nullptr);
    }
  }
  finish_metrics(m, c, steps, nonconverged);
  write_manifest(dir, c, steps, nonconverged);
  write_metrics_csv(m, (dir / "metrics.csv").string());
  return m;
}

RunMetrics recompute_metrics(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream in(dir / "run_manifest.ini");
  if (!in) throw IoError("cannot read " + (dir / "run_manifest.ini").string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto split = text.find("[scenario]");
  if (split == std::string::npos) throw ParseError("run_manifest.ini: no configuration echo", 0);
  const IniDocument manifest = IniDocument::parse_text(text.substr(0, split), "run_manifest.ini");
  const ScenarioConfig c = parse_config_text(text.substr(split), "run_manifest.ini");
  const IniSection* ms = manifest.section("manifest");
  if (!ms || !ms->values.count("steps") || !ms->values.count("nonconverged"))
    throw ParseError("run_manifest.ini: missing [manifest] steps", 0);
  const long steps = std::stol(ms->values.at("steps").text);
  const long nonconverged = std::stol(ms->values.at("nonconverged").text);

  RunMetrics m;
  if (c.motion == Motion::kTumble) {
    m = tumble_metrics(read_table(dir / "wheel.csv"));
  } else {
    const LogTable traj = read_table(dir / "trajectory.csv");
    const LogTable wrench = read_table(dir / "wrench.csv");
    if (c.tier == Tier::kScm) {
      const LogTable hm = read_table(dir / frame_name("heightmap", terrain_frames(c)));
      m = chain_metrics(c, traj, wrench, &hm);
    } else {
      m = chain_metrics(c, traj, wrench, nullptr);
    }
  }
  finish_metrics(m, c, steps, nonconverged);
  return m;
}

void write_metrics_csv(const RunMetrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "scenario,tier,signature,displacement_per_cycle,net_heading,peak_normal_force,"
         "mean_contact_power,rut_depth_max,descent_distance,step_count,nonconvergence_count\n";
  out << m.scenario << ',' << m.tier << ',' << m.signature << ',' << fmt(m.displacement_per_cycle) << ','
      << fmt(m.net_heading) << ',' << fmt(m.peak_normal_force) << ',' << fmt(m.mean_contact_power) << ','
      << fmt(m.rut_depth_max) << ',' << fmt(m.descent_distance) << ',' << m.step_count << ','
      << m.nonconvergence_count << '\n';
  out.close();
  if (!out) throw IoError("write failed: " + path);
}

RunMetrics read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string header, line;
  std::getline(in, header);
  if (header.rfind("scenario,tier,signature,", 0) != 0) throw ParseError(path + ": not a metrics file", 1);
  if (!std::getline(in, line)) throw ParseError(path + ": no metrics row", 2);
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 11) throw ParseError(path + ": expected 11 fields", 2);
  RunMetrics m;
  try {
    m.scenario = f[0];
    m.tier = f[1];
    m.signature = f[2];
    m.displacement_per_cycle = std::stod(f[3]);
    m.net_heading = std::stod(f[4]);
    m.peak_normal_force = std::stod(f[5]);
    m.mean_contact_power = std::stod(f[6]);
    m.rut_depth_max = std::stod(f[7]);
    m.descent_distance = std::stod(f[8]);
    m.step_count = std::stol(f[9]);
    m.nonconvergence_count = std::stol(f[10]);
  } catch (const std::exception&) {
    throw ParseError(path + ": malformed metrics row", 2);
  }
  return m;
}

bool ComparisonReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const ComparisonCheck& c) { return c.pass; });
}

ComparisonReport compare_runs(const std::vector<RunMetrics>& runs) {
  if (runs.size() < 2) throw ConfigError("comparison needs at least two runs");
  for (const RunMetrics& r : runs) {
    if (r.signature != runs.front().signature)
      throw ConfigError("runs are not comparable: '" + runs.front().signature + "' vs '" + r.signature + "'");
  }
  ComparisonReport rep;
  const RunMetrics& base = runs.front();
  struct Metric {
    const char* name;
    double RunMetrics::*field;
  };
  const Metric metrics[] = {{"displacement_per_cycle", &RunMetrics::displacement_per_cycle},
                            {"net_heading", &RunMetrics::net_heading},
                            {"peak_normal_force", &RunMetrics::peak_normal_force},
                            {"mean_contact_power", &RunMetrics::mean_contact_power},
                            {"rut_depth_max", &RunMetrics::rut_depth_max},
                            {"descent_distance", &RunMetrics::descent_distance}};
  for (std::size_t i = 1; i < runs.size(); ++i) {
    for (const Metric& mt : metrics) {
      const double a = base.*mt.field, b = runs[i].*mt.field;
      rep.lines.push_back(std::string(mt.name) + ": " + base.scenario + "=" + fmt(a) + " " + runs[i].scenario +
                          "=" + fmt(b) + " delta=" + fmt(b - a));
    }
  }
  auto find = [&](const char* tier) -> const RunMetrics* {
    for (const RunMetrics& r : runs)
      if (r.tier == tier) return &r;
    return nullptr;
  };
  const RunMetrics* rigid = find("rigid");
  const RunMetrics* scm = find("scm");
  const RunMetrics* dem = find("dem");
  const bool gait = base.signature.rfind("gait", 0) == 0 || base.signature.rfind("trajectory", 0) == 0;
  if (rigid && scm) {
    if (gait) {
      rep.checks.push_back({"displacement_per_cycle rigid >= scm",
                            rigid->displacement_per_cycle >= scm->displacement_per_cycle,
                            rigid->displacement_per_cycle, scm->displacement_per_cycle});
    }
    rep.checks.push_back({"peak_normal_force rigid >= scm", rigid->peak_normal_force >= scm->peak_normal_force,
                          rigid->peak_normal_force, scm->peak_normal_force});
  }
  if (rigid && dem) {
    rep.checks.push_back({"descent_distance rigid >= dem", rigid->descent_distance >= dem->descent_distance,
                          rigid->descent_distance, dem->descent_distance});
  }
  return rep;
}

}  // namespace terrasim
