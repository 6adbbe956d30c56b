// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "terrasim/chain_sim.hpp"
#include "terrasim/contact.hpp"
#include "terrasim/dem.hpp"
#include "terrasim/multibody.hpp"
#include "terrasim/scenario.hpp"
#include "terrasim/scm.hpp"
#include "terrasim/tumbling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace terrasim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

fs::path work_dir() {
  const fs::path p = fs::temp_directory_path() / "terrasim_acceptance";
  fs::create_directories(p);
  return p;
}

Outcome contact_suite() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> pos(0, 1);
  const SmoothedContactParams sp;
  double worst_frame = 0.0;
  long failures = 0;
  const long cases = 100000;
  for (long i = 0; i < cases; ++i) {
    const ContactFrame f = build_contact_frame(random_unit(rng));
    worst_frame = std::max(
        worst_frame, (f.rotation.transpose() * f.rotation - Mat3::Identity()).cwiseAbs().maxCoeff());
    if (f.rotation.determinant() < 0.0) ++failures;

    PenaltyMaterial mat;
    mat.k_n = 1e5 * pos(rng);
    mat.d_n = 1e3 * pos(rng);
    mat.k_t = 1e5 * pos(rng);
    mat.d_t = 1e2 * pos(rng);
    mat.mu = 2.0 * pos(rng);
    const ContactState s =
        ContactState::from_gap(0.01 * u(rng), u(rng), Vec2(0.01 * u(rng), 0.01 * u(rng)));
    const Vec2 ut(u(rng), u(rng));
    const ContactResult r = resolve_penalty(f, s, u(rng), ut, mat);
    bool ok = r.f_normal >= 0.0 && r.f_tangent.norm() <= mat.mu * r.f_normal + 1e-9;
    if (r.regime == Regime::kSlip) ok = ok && r.f_tangent.dot(ut) <= 0.0;
    if (r.regime == Regime::kSeparated) ok = ok && r.world_force == Vec3::Zero();
    ok = ok && std::abs(r.world_force.norm() - std::hypot(r.f_normal, r.f_tangent.norm())) <=
                   1e-9 * (1.0 + r.world_force.norm());

    const Vec2 us(0.01 * u(rng), 0.01 * u(rng));
    const ContactResult q = resolve_smoothed(f, 3e-3 * u(rng), u(rng), us, sp);
    ok = ok && q.f_normal >= 0.0 && q.f_tangent.norm() <= sp.mu_s * q.f_normal + 1e-9 &&
         q.f_tangent.dot(us) <= 0.0;
    if (!ok) ++failures;
  }
  return {failures == 0 && worst_frame < 1e-12,
          std::to_string(cases) + " cases, " + std::to_string(failures) + " violations, " +
              fmt("frame error %.2e", worst_frame)};
}

Outcome energy_passivity() {
  const PlaneTerrain ground(Vec3::Zero(), Vec3::UnitZ());
  auto chain = make_planar_chain(5, 0.15, 0.6);
  const ContactLaw law = SmoothedContactParams{};
  StepInputs in;
  in.terrain = &ground;
  in.law = &law;
  VecX q = chain->straight_configuration(0.0, 0.08);
  q(2) = 0.1;
  q(4) = -0.3;
  GeneralizedState s = GeneralizedState::at_rest(*chain, q);
  StepperConfig cfg;
  cfg.h = 1e-3;
  double prev = total_mechanical_energy(s, *chain, law, ground, cfg.gravity).total();
  const double e0 = prev;
  double worst = -1e300;
  const int steps = 10000;
  for (int i = 0; i < steps; ++i) {
    s = step_semi_implicit(s, VecX::Zero(chain->actuator_count()), *chain, in, cfg).state;
    const double e = total_mechanical_energy(s, *chain, law, ground, cfg.gravity).total();
    worst = std::max(worst, (e - prev) / std::abs(prev));
    prev = e;
  }
  return {worst <= 1e-6, fmt("max relative rise %.2e per step, ", worst) +
                             fmt("energy %.4f -> %.4f J", e0, prev)};
}

// Point mass thrown onto compliant ground: flight, impact, sliding.
Outcome integrator_order() {
  const PlaneTerrain ground(Vec3::Zero(), Vec3::UnitZ());
  const ContactLaw law = SmoothedContactParams{};
  PointMass pm(1.0, 0.05);
  auto run = [&](double h, double t_end) {
    GeneralizedState s = GeneralizedState::at_rest(pm, Vec3(0, 0, 0.2));
    s.v = Vec3(0.8, 0.3, 0.5);
    StepperConfig cfg;
    cfg.h = h;
    StepInputs in;
    in.terrain = &ground;
    in.law = &law;
    const long n = std::lround(t_end / h);
    for (long i = 0; i < n; ++i) s = step_semi_implicit(s, VecX::Zero(3), pm, in, cfg).state;
    return s.q;
  };
  const double t_end = 0.4;
  const double h = 2e-3;
  const double e1 = (run(h, t_end) - run(h / 100, t_end)).norm();
  const double e2 = (run(h / 2, t_end) - run(h / 200, t_end)).norm();
  const double ratio = e1 / e2;
  return {std::abs(ratio - 2.0) <= 0.3,
          fmt("error %.3e at h=2e-3, ", e1) + fmt("%.3e at h=1e-3, ratio %.3f", e2, ratio)};
}

Outcome bekker_janosi() {
  const SoilParams soil;
  const double b = 0.1;
  double worst_p = 0.0;
  for (double z : {1e-4, 1e-3, 0.01, 0.05, 0.1}) {
    const double r = bekker_pressure(2 * z, b, soil) / bekker_pressure(z, b, soil);
    worst_p = std::max(worst_p, std::abs(r - std::pow(2.0, 0.6)));
  }
  double worst_t = 0.0;
  for (double p : {1e2, 1e4, 1e5}) {
    const double r = janosi_shear(soil.k_shear, p, soil) / shear_strength(p, soil);
    worst_t = std::max(worst_t, std::abs(r - (1.0 - std::exp(-1.0))));
  }
  return {worst_p <= 1e-12 && worst_t <= 1e-12,
          fmt("|p(2z)/p(z) - 2^0.6| %.1e, ", worst_p) + fmt("|tau(k)/tau_max - (1-1/e)| %.1e", worst_t)};
}

Outcome scm_conservation() {
  ScenarioConfig cfg = load_preset("sidewind-scm-gait1");
  cfg.duration = 20.0;
  cfg.sync();
  double worst_volume = 0.0;
  long plastic_violations = 0;
  long steps = 0;
  std::vector<double> plastic;
  simulate_chain(cfg.chain, [&](const ChainStepRecord& r) {
    ++steps;
    const ScmStepStats& st = r.terrain->last_stats();
    const double scale = std::max(std::abs(st.volume_before_erosion), 1e-12);
    worst_volume =
        std::max(worst_volume, std::abs(st.volume_after_erosion - st.volume_before_erosion) / scale);
    const auto& nodes = r.terrain->nodes();
    for (std::size_t k = 0; k < plastic.size(); ++k) {
      if (nodes[k].sinkage_plastic < plastic[k]) ++plastic_violations;
    }
    plastic.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) plastic[k] = nodes[k].sinkage_plastic;
  });

  ChainSimSpec lifted = cfg.chain;
  lifted.drop_height = 1.0;
  lifted.gait_enabled = false;
  lifted.duration = 0.3;
  lifted.settle = 0.0;
  const ChainSimResult free = simulate_chain(lifted);

  return {worst_volume <= 1e-9 && plastic_violations == 0 && free.scm_nodes == 0 && !plastic.empty(),
          std::to_string(steps) + " steps, " + fmt("worst erosion volume change %.1e, ", worst_volume) +
              std::to_string(plastic_violations) + " plastic decreases, " + std::to_string(plastic.size()) +
              " nodes; no-contact run " + std::to_string(free.scm_nodes) + " nodes"};
}

Outcome scm_refinement() {
  const SoilParams soil;
  const double radius = 0.1, depth = 0.02;
  double loads[2];
  int k = 0;
  for (double spacing : {0.02, 0.01}) {
    ScmGridConfig g;
    g.spacing = spacing;
    BulldozeParams bp;
    bp.enabled = false;
    ScmTerrain t(g, soil, bp);
    ScmBody body;
    body.origin = Vec3(0.003, 0.002, radius - depth);
    body.shapes = {Shape{Sphere{body.origin, radius}, 0}};
    loads[k++] = t.update({body}, 1e-3)[0].force.z();
  }
  const double change = std::abs(loads[1] - loads[0]) / loads[0];
  return {change < 0.05, fmt("load %.2f N at 0.02 m, ", loads[0]) +
                             fmt("%.2f N at 0.01 m, change %.2f%%", loads[1], 100 * change)};
}

Outcome dem_micro() {
  std::vector<std::string> parts;
  bool ok = true;

  // broad phase against the brute-force oracle
  {
    std::mt19937_64 rng(11);
    long missed = 0;
    for (int scene = 0; scene < 100; ++scene) {
      std::uniform_int_distribution<int> count(2, 500);
      std::uniform_real_distribution<double> rad(0.005, 0.02);
      const int n = count(rng);
      const double side = 0.05 * std::cbrt(static_cast<double>(n));
      std::uniform_real_distribution<double> p(-side, side);
      std::vector<Vec3> c(n);
      std::vector<double> r(n);
      std::vector<int> owner(n);
      double rmax = 0.0;
      for (int i = 0; i < n; ++i) {
        c[i] = Vec3(p(rng), p(rng), p(rng));
        r[i] = rad(rng);
        owner[i] = i / 3;
        rmax = std::max(rmax, r[i]);
      }
      const double skin = 0.002;
      const auto cand = broadphase_pairs(c, r, owner, 2 * rmax + skin, skin);
      for (const SpherePair& pr : brute_force_overlaps(c, r, owner)) {
        if (!std::binary_search(cand.begin(), cand.end(), pr)) ++missed;
      }
    }
    ok = ok && missed == 0;
    parts.push_back("broad phase " + std::to_string(missed) + " misses");
  }

  // third law and momentum in a colliding cloud
  {
    DemWorldConfig cfg;
    cfg.slope = 0.0;
    cfg.floor = false;
    cfg.walls = false;
    cfg.domain = Vec3(10, 10, 10);
    DemWorld w(cfg, {ClumpTemplate::single_sphere(0.012, 2600.0)},
               {DemMaterial::terrain(), DemMaterial::wheel()});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> p(4.8, 5.2), vel(-0.5, 0.5);
    for (int i = 0; i < 300; ++i) {
      ClumpInstance c;
      c.position = Vec3(p(rng), p(rng), p(rng));
      c.linear_velocity = Vec3(vel(rng), vel(rng), vel(rng));
      c.angular_velocity = 10.0 * Vec3(vel(rng), vel(rng), vel(rng));
      w.add_clump(c);
    }
    const Vec3 p0 = w.total_momentum();
    const int steps = 4000;
    double worst_sum = 0.0;
    for (int k = 0; k < steps; ++k) {
      w.step();
      worst_sum = std::max(worst_sum, w.last_stats().internal_force_sum.norm());
    }
    const Vec3 impulse = w.total_mass() * w.config().gravity_vector() * steps * w.config().h;
    const double audit = (w.total_momentum() - p0 - impulse).norm() / impulse.norm();
    ok = ok && worst_sum < 1e-10 && audit < 1e-6;
    parts.push_back(fmt("third-law residual %.1e N, momentum audit %.1e", worst_sum, audit));
  }

  // restitution of a sphere dropped on the floor
  {
    std::string rs = "restitution";
    for (double e : {0.1, 0.2, 0.4}) {
      DemWorldConfig cfg;
      cfg.slope = 0.0;
      cfg.walls = false;
      cfg.domain = Vec3(1, 1, 1);
      DemWorld w(cfg, {ClumpTemplate::single_sphere(0.01, 2600.0)},
                 {DemMaterial::terrain(), DemMaterial::wheel()});
      PairOverride o;
      o.cor = e;
      w.set_pair_override(0, 1, o);
      ClumpInstance c;
      c.position = Vec3(0.5, 0.5, 0.0101);
      c.linear_velocity = Vec3(0, 0, -5.0);
      w.add_clump(c);
      double v_in = 0.0, v_out = 0.0;
      bool was_touching = false;
      for (int k = 0; k < 100000; ++k) {
        const double v = w.clumps()[0].linear_velocity.z();
        w.step();
        const bool touching = w.last_stats().boundary_contacts > 0;
        if (touching && !was_touching) v_in = v;
        if (!touching && was_touching) {
          v_out = w.clumps()[0].linear_velocity.z();
          break;
        }
        was_touching = touching;
      }
      const double ratio = v_in != 0.0 ? -v_out / v_in : 0.0;
      ok = ok && std::abs(ratio - e) <= 0.05 * e;
      rs += fmt(" %.3f", ratio);
    }
    parts.push_back(rs);
  }

  // HCP packing fraction
  {
    const double r = 0.01;
    const Vec3 box(2.0, 2.0, 2.0);
    const double fraction = hcp_sample(box, r).size() * 4.0 / 3.0 * M_PI * r * r * r / box.prod();
    const double ideal = M_PI / (3 * std::sqrt(2.0));
    ok = ok && std::abs(fraction - ideal) <= 0.05 * ideal;
    parts.push_back(fmt("HCP fraction %.4f (ideal %.4f)", fraction, ideal));
  }

  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : ", ") + p;
  return {ok, detail};
}

RunMetrics run_preset(const std::string& name, const std::string& dir) {
  ScenarioConfig cfg = load_preset(name);
  cfg.output_dir = (work_dir() / dir).string();
  fs::remove_all(cfg.output_dir);
  return run_scenario(cfg);
}

Outcome ordering_displacement() {
  bool ok = true;
  std::string detail;
  for (const char* gait : {"gait1", "gait2"}) {
    const RunMetrics rigid = run_preset(std::string("sidewind-rigid-") + gait, std::string("rigid-") + gait);
    const RunMetrics scm = run_preset(std::string("sidewind-scm-") + gait, std::string("scm-") + gait);
    ok = ok && rigid.displacement_per_cycle > scm.displacement_per_cycle;
    detail += std::string(detail.empty() ? "" : ", ") + gait +
              fmt(" rigid %.4f > scm %.4f m/cycle", rigid.displacement_per_cycle, scm.displacement_per_cycle);
  }
  return {ok, detail};
}

Outcome ordering_peak_force() {
  const RunMetrics rigid = run_preset("drop-rigid", "drop-rigid");
  const RunMetrics scm = run_preset("drop-scm", "drop-scm");
  bool ok = rigid.peak_normal_force > scm.peak_normal_force;
  std::string detail = fmt("drop rigid %.1f > scm %.1f N", rigid.peak_normal_force, scm.peak_normal_force);
  // the gait runs of the displacement check, when present, give the second pair
  for (const char* gait : {"gait1", "gait2"}) {
    const fs::path a = work_dir() / (std::string("rigid-") + gait) / "metrics.csv";
    const fs::path b = work_dir() / (std::string("scm-") + gait) / "metrics.csv";
    if (!fs::exists(a) || !fs::exists(b)) continue;
    const RunMetrics ra = read_metrics_csv(a.string());
    const RunMetrics rb = read_metrics_csv(b.string());
    ok = ok && ra.peak_normal_force > rb.peak_normal_force;
    detail += std::string(", ") + gait + fmt(" rigid %.1f > scm %.1f N", ra.peak_normal_force, rb.peak_normal_force);
  }
  return {ok, detail};
}

Outcome ordering_descent() {
  const RunMetrics rigid = run_preset("tumble-rigid", "tumble-rigid");
  ScenarioConfig cfg = load_preset("tumble-dem");
  cfg.output_dir = (work_dir() / "tumble-dem").string();
  fs::remove_all(cfg.output_dir);
  const RunMetrics dem = run_scenario(cfg);
  std::ifstream bed(fs::path(cfg.output_dir) / "bed.csv");
  const long clumps = std::count(std::istreambuf_iterator<char>(bed), {}, '\n') - 1;
  const long spheres = 3 * clumps;
  return {rigid.descent_distance > dem.descent_distance && spheres <= 20000,
          fmt("rigid %.4f > dem %.4f m at t = 2 s", rigid.descent_distance, dem.descent_distance) + ", " +
              std::to_string(spheres) + " spheres"};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  long files = 0, differing = 0;
  for (const char* name : {"drop-scm", "tumble-rigid"}) {
    ScenarioConfig cfg = load_preset(name);
    cfg.deterministic = true;
    cfg.threads = 1;
    const fs::path a = work_dir() / (std::string("repeat-a-") + name);
    const fs::path b = work_dir() / (std::string("repeat-b-") + name);
    for (const fs::path& d : {a, b}) {
      fs::remove_all(d);
      cfg.output_dir = d.string();
      run_scenario(cfg);
    }
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) names.insert(e.path().filename().string());
    for (const auto& n : names) {
      ++files;
      if (!fs::exists(a / n) || !fs::exists(b / n) || file_bytes(a / n) != file_bytes(b / n)) ++differing;
    }
  }
  return {differing == 0 && files > 0,
          std::to_string(files) + " files compared, " + std::to_string(differing) + " differ"};
}

Outcome empty_bed_oracle() {
  TumbleConfig cfg;
  cfg.t_end = 2.0;
  DemWorldConfig wc;
  std::vector<Vec3> rigid;
  run_tumbling_rigid(cfg, wc.h, wc.gravity_vector(),
                     {[&](long, const GeneralizedState& s) { rigid.push_back(s.q.head<3>()); }, nullptr});
  DemWorld empty(wc, {ClumpTemplate::single_sphere(0.01, 2600.0)},
                 {DemMaterial::terrain(), DemMaterial::wheel()});
  double worst = 0.0;
  long n = 0;
  bool aligned = true;
  run_tumbling(empty, cfg, {[&](long k, const GeneralizedState& s) {
                              if (k >= static_cast<long>(rigid.size())) {
                                aligned = false;
                                return;
                              }
                              worst = std::max(worst, (s.q.head<2>() - rigid[k].head<2>()).norm());
                              ++n;
                            },
                            nullptr});
  aligned = aligned && n == static_cast<long>(rigid.size());
  return {aligned && worst < 1e-6,
          std::to_string(n) + " steps, " + fmt("max position difference %.2e m", worst)};
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // s
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "contact law invariants", 10, contact_suite},
      {2, "energy passivity", 30, energy_passivity},
      {3, "integrator order", 60, integrator_order},
      {4, "Bekker and Janosi ratios", 1, bekker_janosi},
      {5, "SCM conservation and plasticity", 300, scm_conservation},
      {6, "SCM grid refinement", 120, scm_refinement},
      {7, "DEM micro-suite", 300, dem_micro},
      {8, "ordering a: displacement per cycle", 600, ordering_displacement},
      {8, "ordering b: peak normal force", 120, ordering_peak_force},
      {8, "ordering c: descent distance", 1800, ordering_descent},
      {9, "determinism", 300, determinism},
      {10, "empty-bed cross-module oracle", 120, empty_bed_oracle},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = elapsed < c.budget;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("criterion %d %s: %s  %s  [%.1f s of %.0f s%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), elapsed, c.budget, in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
