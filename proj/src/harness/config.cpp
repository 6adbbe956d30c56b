#include "terrasim/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace terrasim {

namespace {

constexpr double kDeg = M_PI / 180.0;

const std::map<std::string, std::string> kPresets = {
#include "terrasim_presets.inc"
};

struct Field {
  const IniValue* value;
  std::string where;  // "[section] key (line N)"
};

Field field(const IniSection& s, const std::string& key, const IniValue& v, const std::string& src) {
  return {&v, src + ": [" + s.name + "] " + key + " (line " + std::to_string(v.line) + ")"};
}

double as_number(const Field& f) {
  const std::string& t = f.value->text;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v))
    throw ParseError(f.where + ": expected a number, got '" + t + "'", f.value->line);
  return v;
}

long as_integer(const Field& f) {
  const double v = as_number(f);
  if (v != std::floor(v) || std::abs(v) > 9e15)
    throw ParseError(f.where + ": expected an integer, got '" + f.value->text + "'", f.value->line);
  return static_cast<long>(v);
}

bool as_bool(const Field& f) {
  const std::string& t = f.value->text;
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ParseError(f.where + ": expected true or false, got '" + t + "'", f.value->line);
}

std::vector<int> as_signs(const Field& f) {
  const std::string& t = f.value->text;
  if (t == "alternating") return {};
  std::vector<int> out;
  std::stringstream ss(t);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
    if (cell == "+" || cell == "+1" || cell == "1") out.push_back(1);
    else if (cell == "-" || cell == "-1") out.push_back(-1);
    else throw ParseError(f.where + ": signs must be a list of + and -", f.value->line);
  }
  return out;
}

using Setter = std::function<void(const Field&, ScenarioConfig&)>;
using SectionSchema = std::map<std::string, Setter>;

Setter positive(std::function<double&(ScenarioConfig&)> ref, double scale = 1.0) {
  return [ref, scale](const Field& f, ScenarioConfig& c) {
    const double v = as_number(f);
    if (!(v > 0.0)) throw ParseError(f.where + ": must be > 0", f.value->line);
    ref(c) = v * scale;
  };
}

Setter nonnegative(std::function<double&(ScenarioConfig&)> ref, double scale = 1.0) {
  return [ref, scale](const Field& f, ScenarioConfig& c) {
    const double v = as_number(f);
    if (!(v >= 0.0)) throw ParseError(f.where + ": must be >= 0", f.value->line);
    ref(c) = v * scale;
  };
}

Setter any_number(std::function<double&(ScenarioConfig&)> ref, double scale = 1.0) {
  return [ref, scale](const Field& f, ScenarioConfig& c) { ref(c) = as_number(f) * scale; };
}

Setter unit_interval(std::function<double&(ScenarioConfig&)> ref) {
  return [ref](const Field& f, ScenarioConfig& c) {
    const double v = as_number(f);
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError(f.where + ": must be in [0, 1]", f.value->line);
    ref(c) = v;
  };
}

Setter integer(std::function<int&(ScenarioConfig&)> ref, long lo) {
  return [ref, lo](const Field& f, ScenarioConfig& c) {
    const long v = as_integer(f);
    if (v < lo) throw ParseError(f.where + ": must be >= " + std::to_string(lo), f.value->line);
    ref(c) = static_cast<int>(v);
  };
}

Setter flag(std::function<bool&(ScenarioConfig&)> ref) {
  return [ref](const Field& f, ScenarioConfig& c) { ref(c) = as_bool(f); };
}

Setter text(std::function<std::string&(ScenarioConfig&)> ref) {
  return [ref](const Field& f, ScenarioConfig& c) { ref(c) = f.value->text; };
}

void material_schema(SectionSchema& s, std::function<DemMaterial&(ScenarioConfig&)> m) {
  s["E"] = positive([m](ScenarioConfig& c) -> double& { return m(c).E; });
  s["nu"] = any_number([m](ScenarioConfig& c) -> double& { return m(c).nu; });
  s["cor"] = unit_interval([m](ScenarioConfig& c) -> double& { return m(c).cor; });
  s["mu"] = nonnegative([m](ScenarioConfig& c) -> double& { return m(c).mu; });
  s["c_rr"] = nonnegative([m](ScenarioConfig& c) -> double& { return m(c).c_rr; });
}

const std::map<std::string, SectionSchema>& schema() {
  static const std::map<std::string, SectionSchema> table = [] {
    std::map<std::string, SectionSchema> t;
    auto& sc = t["scenario"];
    sc["id"] = text([](ScenarioConfig& c) -> std::string& { return c.id; });
    sc["motion"] = [](const Field& f, ScenarioConfig& c) {
      const std::string& v = f.value->text;
      if (v == "sidewind") c.motion = Motion::kSidewind;
      else if (v == "drop") c.motion = Motion::kDrop;
      else if (v == "tumble") c.motion = Motion::kTumble;
      else throw ParseError(f.where + ": motion must be sidewind, drop or tumble", f.value->line);
    };
    sc["tier"] = [](const Field& f, ScenarioConfig& c) {
      const std::string& v = f.value->text;
      if (v == "rigid") c.tier = Tier::kRigid;
      else if (v == "scm") c.tier = Tier::kScm;
      else if (v == "dem") c.tier = Tier::kDem;
      else throw ParseError(f.where + ": tier must be rigid, scm or dem", f.value->line);
    };

    auto& tm = t["time"];
    tm["h"] = positive([](ScenarioConfig& c) -> double& { return c.h; });
    tm["duration"] = positive([](ScenarioConfig& c) -> double& { return c.duration; });
    tm["settle"] = nonnegative([](ScenarioConfig& c) -> double& { return c.settle; });
    tm["log_rate"] = positive([](ScenarioConfig& c) -> double& { return c.log_rate; });
    tm["terrain_rate"] = positive([](ScenarioConfig& c) -> double& { return c.terrain_rate; });

    auto& rn = t["run"];
    rn["seed"] = [](const Field& f, ScenarioConfig& c) {
      const long v = as_integer(f);
      if (v < 0) throw ParseError(f.where + ": seed must be >= 0", f.value->line);
      c.seed = static_cast<std::uint64_t>(v);
    };
    rn["deterministic"] = flag([](ScenarioConfig& c) -> bool& { return c.deterministic; });
    rn["threads"] = integer([](ScenarioConfig& c) -> int& { return c.threads; }, 1);
    rn["output"] = text([](ScenarioConfig& c) -> std::string& { return c.output_dir; });

    auto& ch = t["chain"];
    ch["links"] = integer([](ScenarioConfig& c) -> int& { return c.chain.chain.links; }, 2);
    ch["link_length"] = positive([](ScenarioConfig& c) -> double& { return c.chain.chain.link_length; });
    ch["link_mass"] = positive([](ScenarioConfig& c) -> double& { return c.chain.chain.link_mass; });
    ch["link_radius"] = positive([](ScenarioConfig& c) -> double& { return c.chain.chain.link_radius; });
    ch["start_x"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.start_x; });
    ch["drop_height"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.drop_height; });

    auto& g = t["gait"];
    g["A_ver_deg"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.gait.A_ver; }, kDeg);
    g["A_hor_deg"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.gait.A_hor; }, kDeg);
    g["f"] = positive([](ScenarioConfig& c) -> double& { return c.chain.gait.f; });
    g["phase_step_deg"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.gait.phase_step; }, kDeg);
    g["ramp_time"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.gait.ramp_time; });
    g["signs"] = [](const Field& f, ScenarioConfig& c) { c.chain.gait.signs = as_signs(f); };
    g["kp"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.kp; });
    g["kd"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.kd; });
    g["trajectory"] = text([](ScenarioConfig& c) -> std::string& { return c.gait_trajectory; });

    auto& gr = t["ground"];
    gr["k"] = positive([](ScenarioConfig& c) -> double& { return c.chain.ground.k; });
    gr["b"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.ground.b; });
    gr["w"] = positive([](ScenarioConfig& c) -> double& { return c.chain.ground.w; });
    gr["mu_s"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.ground.mu_s; });
    gr["mu_d"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.ground.mu_d; });
    gr["v_crit"] = positive([](ScenarioConfig& c) -> double& { return c.chain.ground.v_crit; });
    gr["eps_v"] = positive([](ScenarioConfig& c) -> double& { return c.chain.ground.eps_v; });

    auto& so = t["soil"];
    so["preset"] = text([](ScenarioConfig& c) -> std::string& { return c.soil_preset; });
    so["K_c"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.soil.K_c; });
    so["K_phi"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.soil.K_phi; });
    so["n"] = positive([](ScenarioConfig& c) -> double& { return c.chain.soil.n_exp; });
    so["cohesion"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.soil.cohesion; });
    so["phi_deg"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.soil.phi; }, kDeg);
    so["k_shear"] = positive([](ScenarioConfig& c) -> double& { return c.chain.soil.k_shear; });
    so["K_elastic"] = positive([](ScenarioConfig& c) -> double& { return c.chain.soil.K_elastic; });
    so["R_damp"] = nonnegative([](ScenarioConfig& c) -> double& { return c.chain.soil.R_damp; });
    so["reset_shear_on_separation"] =
        flag([](ScenarioConfig& c) -> bool& { return c.chain.soil.reset_shear_on_separation; });

    auto& bd = t["bulldozing"];
    bd["enabled"] = flag([](ScenarioConfig& c) -> bool& { return c.chain.bulldoze.enabled; });
    bd["erosion_angle_deg"] =
        positive([](ScenarioConfig& c) -> double& { return c.chain.bulldoze.erosion_angle; }, kDeg);
    bd["flow_factor"] = [](const Field& f, ScenarioConfig& c) {
      const double v = as_number(f);
      if (!(v > 0.0 && v <= 2.0)) throw ParseError(f.where + ": must be in (0, 2]", f.value->line);
      c.chain.bulldoze.flow_factor = v;
    };
    bd["iterations"] = integer([](ScenarioConfig& c) -> int& { return c.chain.bulldoze.iterations; }, 0);
    bd["rings"] = integer([](ScenarioConfig& c) -> int& { return c.chain.bulldoze.rings; }, 0);

    auto& gd = t["grid"];
    gd["spacing"] = positive([](ScenarioConfig& c) -> double& { return c.chain.grid.spacing; });
    gd["length_x"] = positive([](ScenarioConfig& c) -> double& { return c.chain.grid.length_x; });
    gd["length_y"] = positive([](ScenarioConfig& c) -> double& { return c.chain.grid.length_y; });
    gd["center_x"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.grid.center_x; });
    gd["center_y"] = any_number([](ScenarioConfig& c) -> double& { return c.chain.grid.center_y; });

    auto& wh = t["wheel"];
    wh["radius"] = positive([](ScenarioConfig& c) -> double& { return c.tumble.wheel.radius; });
    wh["width"] = positive([](ScenarioConfig& c) -> double& { return c.tumble.wheel.width; });
    wh["mass"] = positive([](ScenarioConfig& c) -> double& { return c.tumble.wheel.mass; });
    wh["omega"] = any_number([](ScenarioConfig& c) -> double& { return c.tumble.omega; });
    wh["start_x"] = any_number([](ScenarioConfig& c) -> double& { return c.tumble.start_x; });
    wh["slope_deg"] = nonnegative([](ScenarioConfig& c) -> double& { return c.slope; }, kDeg);
    wh["output_fps"] = positive([](ScenarioConfig& c) -> double& { return c.tumble.output_fps; });

    auto& dm = t["dem"];
    dm["domain_x"] = positive([](ScenarioConfig& c) -> double& { return c.dem.world.domain.x(); });
    dm["domain_y"] = positive([](ScenarioConfig& c) -> double& { return c.dem.world.domain.y(); });
    dm["domain_z"] = positive([](ScenarioConfig& c) -> double& { return c.dem.world.domain.z(); });
    dm["v_max"] = positive([](ScenarioConfig& c) -> double& { return c.dem.world.v_max; });
    dm["v_error"] = positive([](ScenarioConfig& c) -> double& { return c.dem.world.v_error; });
    dm["broadphase_period"] = integer([](ScenarioConfig& c) -> int& { return c.dem.world.broadphase_period; }, 1);
    dm["fill_x"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.extents.x(); });
    dm["fill_y"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.extents.y(); });
    dm["fill_z"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.extents.z(); });
    dm["clump_scale"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.scale; });
    dm["clump_volume"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.template_volume; });
    dm["density"] = positive([](ScenarioConfig& c) -> double& { return c.dem.bed.density; });
    dm["level_settle_time"] = nonnegative([](ScenarioConfig& c) -> double& { return c.dem.level_settle_time; });
    dm["level_settle_ke"] = positive([](ScenarioConfig& c) -> double& { return c.dem.level_settle_ke; });
    dm["tilt_settle_time"] = nonnegative([](ScenarioConfig& c) -> double& { return c.dem.tilt_settle_time; });
    dm["tilt_settle_ke"] = positive([](ScenarioConfig& c) -> double& { return c.dem.tilt_settle_ke; });
    dm["bed_file"] = text([](ScenarioConfig& c) -> std::string& { return c.dem.bed_file; });

    material_schema(t["terrain_material"], [](ScenarioConfig& c) -> DemMaterial& { return c.dem.terrain; });
    material_schema(t["wheel_material"], [](ScenarioConfig& c) -> DemMaterial& { return c.dem.wheel; });
    auto& wt = t["wheel_terrain"];
    wt["mu"] = [](const Field& f, ScenarioConfig& c) { c.dem.wheel_terrain.mu = as_number(f); };
    wt["cor"] = [](const Field& f, ScenarioConfig& c) { c.dem.wheel_terrain.cor = as_number(f); };
    return t;
  }();
  return table;
}

void apply_section(const IniSection& s, const std::string& src, ScenarioConfig& c,
                   const std::string& skip_key = "") {
  const auto it = schema().find(s.name);
  if (it == schema().end())
    throw ParseError(src + ": unknown section [" + s.name + "]", s.line);
  for (const auto& [key, value] : s.values) {
    if (key == skip_key) continue;
    const auto kt = it->second.find(key);
    if (kt == it->second.end())
      throw ParseError(src + ": unknown key '" + key + "' in [" + s.name + "]", value.line);
    kt->second(field(s, key, value, src), c);
  }
}

void apply_tier_defaults(ScenarioConfig& c) {
  c.h = c.tier == Tier::kDem ? 5e-6 : 1e-3;
  switch (c.motion) {
    case Motion::kSidewind:
      c.duration = 30.0;
      c.settle = 2.0;
      break;
    case Motion::kDrop:
      c.duration = 1.5;
      c.settle = 0.0;
      c.chain.drop_height = 0.1;
      break;
    case Motion::kTumble:
      c.duration = 2.0;
      c.settle = 0.0;
      c.log_rate = 10.0;
      break;
  }
}

void warn_units(ScenarioConfig& c) {
  auto warn = [&](const std::string& s) { c.warnings.push_back(s); };
  if (c.h > 0.01) warn("timestep " + std::to_string(c.h) + " s is unusually large");
  if (c.chain.soil.phi > 0.0 && c.chain.soil.phi < 1.0 * kDeg)
    warn("soil phi_deg below 1 degree; was a value in radians given?");
  if (c.chain.gait.A_ver > 0.0 && c.chain.gait.A_ver < 2.0 * kDeg)
    warn("gait A_ver_deg below 2 degrees; was a value in radians given?");
  if (c.slope > 0.0 && c.slope < 1.0 * kDeg) warn("slope_deg below 1 degree; was a value in radians given?");
  if (c.chain.chain.link_length > 5.0) warn("link_length above 5 m; was a value in mm given?");
  if (c.chain.soil.K_phi > 0.0 && c.chain.soil.K_phi < 100.0) warn("K_phi below 100; was a value in kN given?");
  if (c.dem.terrain.E < 1e5 || c.dem.wheel.E < 1e5) warn("DEM Young's modulus below 1e5 Pa; was a value in MPa given?");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::kRigid: return "rigid";
    case Tier::kScm: return "scm";
    case Tier::kDem: return "dem";
  }
  return "?";
}

const char* motion_name(Motion m) {
  switch (m) {
    case Motion::kSidewind: return "sidewind";
    case Motion::kDrop: return "drop";
    case Motion::kTumble: return "tumble";
  }
  return "?";
}

const std::map<std::string, std::string>& builtin_presets() { return kPresets; }

std::string preset_text(const std::string& name) {
  const auto it = kPresets.find(name);
  if (it == kPresets.end()) {
    std::string known;
    for (const auto& [k, v] : kPresets) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

void ScenarioConfig::sync() {
  chain.gait.n_joints = chain.chain.links - 1;
  chain.h = h;
  chain.duration = duration;
  chain.settle = settle;
  chain.tier = tier;
  chain.gait_enabled = motion == Motion::kSidewind;
  tumble.t_end = duration;
  tumble.ground = chain.ground;
  dem.world.h = h;
  dem.world.slope = slope;
  dem.world.threads = threads;
  dem.bed.seed = seed;
  dem.output_fps = tumble.output_fps;
  if (motion == Motion::kTumble) log_rate = tumble.output_fps;
}

void ScenarioConfig::validate() const {
  if (motion == Motion::kTumble && tier == Tier::kScm)
    throw ConfigError("tumbling runs on rigid or dem terrain, not scm");
  if (motion != Motion::kTumble && tier == Tier::kDem)
    throw ConfigError("the chain scenarios run on rigid or scm terrain, not dem");
  if (!(h > 0.0) || !(duration > 0.0)) throw ConfigError("timestep and duration must be > 0");
  if (settle > duration) throw ConfigError("settle time exceeds the duration");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (motion == Motion::kTumble) {
    if (!(slope >= 0.0 && slope < 0.5 * M_PI)) throw ConfigError("slope must be in [0, 90) degrees");
    if (tier == Tier::kDem) {
      DemWorldConfig w = dem.world;
      w.h = h;
      w.slope = slope;
      w.validate();
      dem.terrain.validate();
      dem.wheel.validate();
      if (tumble.start_x - tumble.wheel.radius < 0.0 ||
          tumble.start_x + tumble.wheel.radius > dem.world.domain.x())
        throw ConfigError("wheel start_x puts the wheel outside the DEM domain");
      if (tumble.wheel.width > dem.world.domain.y())
        throw ConfigError("wheel is wider than the DEM domain");
    }
  } else {
    ChainSimSpec s = chain;
    s.h = h;
    s.duration = duration;
    s.settle = settle;
    s.tier = tier;
    s.gait_enabled = motion == Motion::kSidewind;
    if (s.gait_enabled && gait_trajectory.empty() && s.gait.n_joints != s.chain.links - 1)
      throw ConfigError("gait n_joints must equal links - 1");
    s.validate();
  }
}

std::string ScenarioConfig::motion_signature() const {
  std::ostringstream s;
  s.precision(12);
  switch (motion) {
    case Motion::kSidewind:
      if (!gait_trajectory.empty()) {
        s << "trajectory " << gait_trajectory;
      } else {
        s << "gait A_ver=" << chain.gait.A_ver / kDeg << " A_hor=" << chain.gait.A_hor / kDeg
          << " f=" << chain.gait.f;
      }
      s << " T=" << duration;
      break;
    case Motion::kDrop:
      s << "drop height=" << chain.drop_height << " T=" << duration;
      break;
    case Motion::kTumble:
      s << "tumble omega=" << tumble.omega << " slope=" << slope / kDeg << " T=" << duration;
      break;
  }
  return s.str();
}

ScenarioConfig parse_config(const IniDocument& doc) {
  const std::string& src = doc.source();
  std::vector<std::string> missing;
  for (const char* required : {"scenario", "time"})
    if (!doc.has(required)) missing.push_back(std::string("[") + required + "]");
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ParseError(src + ": missing required sections: " + list, 0);
  }

  ScenarioConfig c;
  const IniSection* sc = doc.section("scenario");
  for (const char* key : {"motion", "tier"})
    if (!sc->values.count(key))
      throw ParseError(src + ": [scenario] needs '" + key + "'", sc->line);
  apply_section(*sc, src, c);
  const bool has_id = sc->values.count("id") > 0;
  apply_tier_defaults(c);
  if (!has_id) c.id = std::string(motion_name(c.motion)) + "-" + tier_name(c.tier);
  if (c.tier == Tier::kScm && !doc.has("soil"))
    throw ParseError(src + ": missing required section [soil] for the scm tier", 0);

  if (const IniSection* soil = doc.section("soil")) {
    const auto p = soil->values.find("preset");
    if (p != soil->values.end()) {
      const IniDocument preset = IniDocument::parse_text(preset_text(p->second.text), p->second.text + ".cfg");
      const IniSection* ps = preset.section("soil");
      if (!ps) throw ParseError(src + ": preset '" + p->second.text + "' has no [soil] section", p->second.line);
      apply_section(*ps, preset.source(), c, "preset");
      c.soil_preset = p->second.text;
    }
  }
  for (const IniSection& s : doc.sections())
    if (s.name != "scenario") apply_section(s, src, c);

  if (!c.gait_trajectory.empty() && c.motion == Motion::kSidewind)
    c.chain.trajectory = gait_from_csv(c.gait_trajectory);
  c.sync();
  warn_units(c);
  c.validate();
  return c;
}

ScenarioConfig parse_config_text(const std::string& text, const std::string& source) {
  return parse_config(IniDocument::parse_text(text, source));
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  return parse_config(IniDocument::parse(in, path));
}

ScenarioConfig load_preset(const std::string& name) {
  return parse_config_text(preset_text(name), name + ".cfg");
}

std::string config_echo(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "[scenario]\nid = " << c.id << "\nmotion = " << motion_name(c.motion)
    << "\ntier = " << tier_name(c.tier) << "\n\n";
  o << "[time]\nh = " << fmt(c.h) << "\nduration = " << fmt(c.duration) << "\nsettle = " << fmt(c.settle)
    << "\nlog_rate = " << fmt(c.log_rate) << "\nterrain_rate = " << fmt(c.terrain_rate) << "\n\n";
  o << "[run]\nseed = " << c.seed << "\ndeterministic = " << (c.deterministic ? "true" : "false")
    << "\nthreads = " << c.threads << "\n\n";
  if (c.motion == Motion::kTumble) {
    o << "[wheel]\nradius = " << fmt(c.tumble.wheel.radius) << "\nwidth = " << fmt(c.tumble.wheel.width)
      << "\nmass = " << fmt(c.tumble.wheel.mass) << "\nomega = " << fmt(c.tumble.omega)
      << "\nstart_x = " << fmt(c.tumble.start_x) << "\nslope_deg = " << fmt(c.slope / kDeg)
      << "\noutput_fps = " << fmt(c.tumble.output_fps) << "\n\n";
  } else {
    const PlanarChainParams& p = c.chain.chain;
    o << "[chain]\nlinks = " << p.links << "\nlink_length = " << fmt(p.link_length)
      << "\nlink_mass = " << fmt(p.link_mass) << "\nlink_radius = " << fmt(p.link_radius)
      << "\nstart_x = " << fmt(c.chain.start_x) << "\ndrop_height = " << fmt(c.chain.drop_height) << "\n\n";
    const GaitProgram& g = c.chain.gait;
    o << "[gait]\nA_ver_deg = " << fmt(g.A_ver / kDeg) << "\nA_hor_deg = " << fmt(g.A_hor / kDeg)
      << "\nf = " << fmt(g.f) << "\nphase_step_deg = " << fmt(g.phase_step / kDeg)
      << "\nramp_time = " << fmt(g.ramp_time) << "\nsigns = ";
    if (g.signs.empty()) {
      o << "alternating";
    } else {
      for (std::size_t i = 0; i < g.signs.size(); ++i) o << (i ? "," : "") << (g.signs[i] > 0 ? "+" : "-");
    }
    o << "\nkp = " << fmt(c.chain.kp) << "\nkd = " << fmt(c.chain.kd) << "\n";
    if (!c.gait_trajectory.empty()) o << "trajectory = " << c.gait_trajectory << "\n";
    o << "\n";
  }
  {
    const SmoothedContactParams& gr = c.chain.ground;
    o << "[ground]\nk = " << fmt(gr.k) << "\nb = " << fmt(gr.b) << "\nw = " << fmt(gr.w)
      << "\nmu_s = " << fmt(gr.mu_s) << "\nmu_d = " << fmt(gr.mu_d) << "\nv_crit = " << fmt(gr.v_crit)
      << "\neps_v = " << fmt(gr.eps_v) << "\n\n";
  }
  if (c.tier == Tier::kScm) {
    const SoilParams& s = c.chain.soil;
    o << "[soil]\nK_c = " << fmt(s.K_c) << "\nK_phi = " << fmt(s.K_phi) << "\nn = " << fmt(s.n_exp)
      << "\ncohesion = " << fmt(s.cohesion) << "\nphi_deg = " << fmt(s.phi / kDeg)
      << "\nk_shear = " << fmt(s.k_shear) << "\nK_elastic = " << fmt(s.K_elastic)
      << "\nR_damp = " << fmt(s.R_damp)
      << "\nreset_shear_on_separation = " << (s.reset_shear_on_separation ? "true" : "false") << "\n\n";
    const BulldozeParams& b = c.chain.bulldoze;
    o << "[bulldozing]\nenabled = " << (b.enabled ? "true" : "false")
      << "\nerosion_angle_deg = " << fmt(b.erosion_angle / kDeg) << "\nflow_factor = " << fmt(b.flow_factor)
      << "\niterations = " << b.iterations << "\nrings = " << b.rings << "\n\n";
    const ScmGridConfig& gd = c.chain.grid;
    o << "[grid]\nspacing = " << fmt(gd.spacing) << "\nlength_x = " << fmt(gd.length_x)
      << "\nlength_y = " << fmt(gd.length_y) << "\ncenter_x = " << fmt(gd.center_x)
      << "\ncenter_y = " << fmt(gd.center_y) << "\n\n";
  }
  if (c.tier == Tier::kDem) {
    const DemScenario& d = c.dem;
    o << "[dem]\ndomain_x = " << fmt(d.world.domain.x()) << "\ndomain_y = " << fmt(d.world.domain.y())
      << "\ndomain_z = " << fmt(d.world.domain.z()) << "\nv_max = " << fmt(d.world.v_max)
      << "\nv_error = " << fmt(d.world.v_error) << "\nbroadphase_period = " << d.world.broadphase_period
      << "\nfill_x = " << fmt(d.bed.extents.x()) << "\nfill_y = " << fmt(d.bed.extents.y())
      << "\nfill_z = " << fmt(d.bed.extents.z()) << "\nclump_scale = " << fmt(d.bed.scale)
      << "\nclump_volume = " << fmt(d.bed.template_volume) << "\ndensity = " << fmt(d.bed.density)
      << "\nlevel_settle_time = " << fmt(d.level_settle_time) << "\nlevel_settle_ke = " << fmt(d.level_settle_ke)
      << "\ntilt_settle_time = " << fmt(d.tilt_settle_time) << "\ntilt_settle_ke = " << fmt(d.tilt_settle_ke)
      << "\n";
    if (!d.bed_file.empty()) o << "bed_file = " << d.bed_file << "\n";
    o << "\n";
    auto mat = [&](const char* name, const DemMaterial& m) {
      o << "[" << name << "]\nE = " << fmt(m.E) << "\nnu = " << fmt(m.nu) << "\ncor = " << fmt(m.cor)
        << "\nmu = " << fmt(m.mu) << "\nc_rr = " << fmt(m.c_rr) << "\n\n";
    };
    mat("terrain_material", d.terrain);
    mat("wheel_material", d.wheel);
    o << "[wheel_terrain]\n";
    if (d.wheel_terrain.mu) o << "mu = " << fmt(*d.wheel_terrain.mu) << "\n";
    if (d.wheel_terrain.cor) o << "cor = " << fmt(*d.wheel_terrain.cor) << "\n";
    o << "\n";
  }
  return o.str();
}

}  // namespace terrasim
