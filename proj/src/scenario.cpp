#include "levixcorr/scenario.hpp"
#include "levixcorr/constants.hpp"
#include "levixcorr/response.hpp"
#include "levixcorr/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace levixcorr::scenario {

namespace {

using model::ConfigError;

double deg2rad(double d) { return d * constants::pi / 180.0; }

std::string at_ptr(const std::string& ptr) { return ptr.empty() ? "/" : ptr; }

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& ptr) {
  if (!obj.is_object())
    throw ConfigError("scenario: expected an object at " + at_ptr(ptr));
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("scenario: unknown key '" + it.key() + "' at " +
                        at_ptr(ptr));
}

double need_num(const json& v, const std::string& ptr) {
  if (!v.is_number())
    throw ConfigError("scenario: expected a number at " + ptr);
  return v.get<double>();
}

std::string need_str(const json& v, const std::string& ptr) {
  if (!v.is_string())
    throw ConfigError("scenario: expected a string at " + ptr);
  return v.get<std::string>();
}

bool need_bool(const json& v, const std::string& ptr) {
  if (!v.is_boolean())
    throw ConfigError("scenario: expected a boolean at " + ptr);
  return v.get<bool>();
}

std::size_t need_count(const json& v, const std::string& ptr) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("scenario: expected an integer at " + ptr);
  const long long n = v.get<long long>();
  if (n <= 0)
    throw ConfigError("scenario: expected a positive integer at " + ptr);
  return static_cast<std::size_t>(n);
}

json sub_obj(const json& user, const char* key) {
  if (!user.contains(key)) return json::object();
  if (!user.at(key).is_object())
    throw ConfigError(std::string("scenario: expected an object at /") + key);
  return user.at(key);
}

double pick_num(const json& user, const json& defs, const char* key,
                const std::string& ptr) {
  if (user.contains(key)) return need_num(user.at(key), ptr + "/" + key);
  return defs.at(key).get<double>();
}

json default_config() {
  json j;
  j["name"] = "custom";
  json env;
  env["pressure_mbar"] = 1e-4;
  env["temperature_k"] = 300.0;
  env["particle_radius_nm"] = 60.1;
  env["particle_density_kg_m3"] = 1850.0;
  env["gas_molecule_mass_amu"] = 28.97;
  env["wavelength_nm"] = 1064.0;
  env["trap_offset_lambda"] = 0.145;
  env["polarisation_theta_deg"] = 49.0;
  j["environment"] = env;
  json sys;
  sys["omega_x_krad_s"] = constants::two_pi * 125.0e3 / 1e3;
  sys["omega_y_krad_s"] = constants::two_pi * 140.0e3 / 1e3;
  sys["kappa_krad_s"] = constants::two_pi * 400.0e3 / 1e3;
  sys["delta_krad_s"] = -constants::two_pi * 176.0e3 / 1e3;
  sys["g_x_krad_s"] = constants::two_pi * 16.0e3 / 1e3;
  sys["g_y_krad_s"] = constants::two_pi * 15.0e3 / 1e3;
  j["system"] = sys;
  j["force"] = json{{"psi_deg", 45.0}, {"beta2", 0.25}};
  j["misalignment"] = json{{"phi_deg", "auto"},
                           {"beta_err_x_deg", 0.0},
                           {"beta_err_y_deg", 0.0}};
  j["grid"] = json{{"omega_min_krad_s", "auto"},
                   {"omega_max_krad_s", "auto"},
                   {"n_points", 601}};
  j["mode"] = "analytic";
  j["sim"] = json{{"dt_s", 2e-7},
                  {"n_samples", 524288},
                  {"segment_length", 16384},
                  {"n_seeds", 8},
                  {"base_seed", 12345},
                  {"save_traces", false}};
  j["output_dir"] = "auto";
  return j;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw ConfigError("scenario: cannot open " + path + " for writing");
  out << content;
  if (!out) throw ConfigError("scenario: write failed for " + path);
}

void write_json_file(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

json fit_to_json(const estimate::FitResult& fr) {
  json j;
  for (const auto& kv : fr.estimates) j[kv.first] = kv.second;
  j["residual_rms"] = fr.residual_rms;
  j["n_points"] = fr.n_points;
  j["flag"] = fr.flag;
  return j;
}

} // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> builtin_names() {
  return {"fig2_p1e-4", "fig2_p1e-3", "fig2_node", "fig3_p5e-7", "fig3_p1e-6"};
}

json builtin_config(const std::string& name) {
  json j = default_config();
  j["name"] = name;
  if (name == "fig2_p1e-4") {
    j["mode"] = "both";
  } else if (name == "fig2_p1e-3") {
    j["environment"]["pressure_mbar"] = 1e-3;
    j["mode"] = "both";
  } else if (name == "fig2_node") {
    j["environment"]["trap_offset_lambda"] = 0.25;
    j["mode"] = "both";
  } else if (name == "fig3_p5e-7") {
    j["mode"] = "analytic";
    j["environment"]["pressure_mbar"] = 5e-7;
  } else if (name == "fig3_p1e-6") {
    j["mode"] = "analytic";
    j["environment"]["pressure_mbar"] = 1e-6;
  } else {
    throw ConfigError("scenario: unknown builtin scenario '" + name + "'");
  }
  return j;
}

Scenario scenario_from_json(const json& user) {
  static const std::set<std::string> top_keys = {
      "name", "environment", "system", "force", "misalignment",
      "grid", "mode",        "sim",    "output_dir"};
  static const std::set<std::string> env_keys = {
      "pressure_mbar",        "temperature_k",
      "particle_radius_nm",   "particle_density_kg_m3",
      "gas_molecule_mass_amu", "wavelength_nm",
      "trap_offset_lambda",   "polarisation_theta_deg"};
  static const std::set<std::string> sys_keys = {
      "omega_x_krad_s", "omega_y_krad_s", "kappa_krad_s", "delta_krad_s",
      "g_x_krad_s",     "g_y_krad_s",     "gamma_rad_s",  "g_xy_rad_s",
      "nbar_x",         "nbar_y"};
  static const std::set<std::string> force_keys = {"psi_deg", "beta2"};
  static const std::set<std::string> mis_keys = {"phi_deg", "beta_err_x_deg",
                                                 "beta_err_y_deg"};
  static const std::set<std::string> grid_keys = {"omega_min_krad_s",
                                                  "omega_max_krad_s",
                                                  "n_points"};
  static const std::set<std::string> sim_keys = {
      "dt_s",    "n_samples", "segment_length",
      "n_seeds", "base_seed", "save_traces"};

  reject_unknown(user, top_keys, "");
  const json defs = default_config();

  const json u_env = sub_obj(user, "environment");
  const json u_sys = sub_obj(user, "system");
  const json u_force = sub_obj(user, "force");
  const json u_mis = sub_obj(user, "misalignment");
  const json u_grid = sub_obj(user, "grid");
  const json u_sim = sub_obj(user, "sim");
  reject_unknown(u_env, env_keys, "/environment");
  reject_unknown(u_sys, sys_keys, "/system");
  reject_unknown(u_force, force_keys, "/force");
  reject_unknown(u_mis, mis_keys, "/misalignment");
  reject_unknown(u_grid, grid_keys, "/grid");
  reject_unknown(u_sim, sim_keys, "/sim");

  Scenario s;
  s.name = user.contains("name") ? need_str(user.at("name"), "/name")
                                 : defs.at("name").get<std::string>();

  // environment
  const json& denv = defs.at("environment");
  const double pressure = pick_num(u_env, denv, "pressure_mbar", "/environment");
  const double temperature = pick_num(u_env, denv, "temperature_k", "/environment");
  const double radius_nm = pick_num(u_env, denv, "particle_radius_nm", "/environment");
  const double density = pick_num(u_env, denv, "particle_density_kg_m3", "/environment");
  const double gas_amu = pick_num(u_env, denv, "gas_molecule_mass_amu", "/environment");
  const double wavelength_nm = pick_num(u_env, denv, "wavelength_nm", "/environment");
  const double offset_lambda = pick_num(u_env, denv, "trap_offset_lambda", "/environment");
  const double pol_deg = pick_num(u_env, denv, "polarisation_theta_deg", "/environment");
  s.env.pressure = pressure * 100.0; // mbar -> Pa
  s.env.temperature = temperature;
  s.env.particle_radius = radius_nm * 1e-9;
  s.env.particle_density = density;
  s.env.gas_molecule_mass = gas_amu * constants::atomic_mass_unit;
  s.env.wavelength = wavelength_nm * 1e-9;
  s.env.trap_offset = offset_lambda * s.env.wavelength;
  s.env.polarisation_theta = deg2rad(pol_deg);

  // system overrides (krad/s -> rad/s on the suffixed keys)
  const json& dsys = defs.at("system");
  model::SystemOverrides ov;
  ov.omega_x = pick_num(u_sys, dsys, "omega_x_krad_s", "/system") * 1e3;
  ov.omega_y = pick_num(u_sys, dsys, "omega_y_krad_s", "/system") * 1e3;
  ov.kappa = pick_num(u_sys, dsys, "kappa_krad_s", "/system") * 1e3;
  ov.delta = pick_num(u_sys, dsys, "delta_krad_s", "/system") * 1e3;
  ov.g_x = pick_num(u_sys, dsys, "g_x_krad_s", "/system") * 1e3;
  ov.g_y = pick_num(u_sys, dsys, "g_y_krad_s", "/system") * 1e3;
  if (u_sys.contains("gamma_rad_s"))
    ov.gamma = need_num(u_sys.at("gamma_rad_s"), "/system/gamma_rad_s");
  if (u_sys.contains("g_xy_rad_s"))
    ov.g_xy = need_num(u_sys.at("g_xy_rad_s"), "/system/g_xy_rad_s");
  if (u_sys.contains("nbar_x"))
    ov.nbar_x = need_num(u_sys.at("nbar_x"), "/system/nbar_x");
  if (u_sys.contains("nbar_y"))
    ov.nbar_y = need_num(u_sys.at("nbar_y"), "/system/nbar_y");
  s.system = model::build_system(s.env, ov);

  // directed force
  const json& dforce = defs.at("force");
  const double psi_deg = pick_num(u_force, dforce, "psi_deg", "/force");
  const double beta2 = pick_num(u_force, dforce, "beta2", "/force");
  if (beta2 < 0.0)
    throw ConfigError("scenario: expected beta2 >= 0 at /force/beta2");
  s.force = model::make_directed_force(deg2rad(psi_deg), beta2, s.system.gamma);

  // misalignment
  const json& dmis = defs.at("misalignment");
  json phi_val = u_mis.contains("phi_deg") ? u_mis.at("phi_deg")
                                           : dmis.at("phi_deg");
  if (phi_val.is_string()) {
    if (phi_val.get<std::string>() != "auto")
      throw ConfigError(
          "scenario: expected a number or \"auto\" at /misalignment/phi_deg");
    s.mis.phi = response::rotation_angle_phi(s.system);
  } else {
    s.mis.phi = deg2rad(need_num(phi_val, "/misalignment/phi_deg"));
  }
  s.mis.beta_err_x =
      deg2rad(pick_num(u_mis, dmis, "beta_err_x_deg", "/misalignment"));
  s.mis.beta_err_y =
      deg2rad(pick_num(u_mis, dmis, "beta_err_y_deg", "/misalignment"));
  model::validate(s.mis);

  // frequency grid
  const json& dgrid = defs.at("grid");
  const estimate::Band band = estimate::fit_band(s.system);
  double w_min = band.omega_min;
  double w_max = band.omega_max;
  json jmin = u_grid.contains("omega_min_krad_s") ? u_grid.at("omega_min_krad_s")
                                                  : dgrid.at("omega_min_krad_s");
  json jmax = u_grid.contains("omega_max_krad_s") ? u_grid.at("omega_max_krad_s")
                                                  : dgrid.at("omega_max_krad_s");
  if (!jmin.is_string())
    w_min = need_num(jmin, "/grid/omega_min_krad_s") * 1e3;
  else if (jmin.get<std::string>() != "auto")
    throw ConfigError(
        "scenario: expected a number or \"auto\" at /grid/omega_min_krad_s");
  if (!jmax.is_string())
    w_max = need_num(jmax, "/grid/omega_max_krad_s") * 1e3;
  else if (jmax.get<std::string>() != "auto")
    throw ConfigError(
        "scenario: expected a number or \"auto\" at /grid/omega_max_krad_s");
  const std::size_t n_points =
      u_grid.contains("n_points") ? need_count(u_grid.at("n_points"), "/grid/n_points")
                                  : dgrid.at("n_points").get<std::size_t>();
  if (n_points < 2)
    throw ConfigError("scenario: expected n_points >= 2 at /grid/n_points");
  s.grid = spectra::frequency_grid(w_min, w_max, n_points);

  // run mode
  const std::string mode_str = user.contains("mode")
                                   ? need_str(user.at("mode"), "/mode")
                                   : defs.at("mode").get<std::string>();
  if (mode_str == "analytic")
    s.mode = RunMode::analytic;
  else if (mode_str == "simulate")
    s.mode = RunMode::simulate;
  else if (mode_str == "both")
    s.mode = RunMode::both;
  else
    throw ConfigError(
        "scenario: expected \"analytic\", \"simulate\" or \"both\" at /mode");

  // simulation settings
  const json& dsim = defs.at("sim");
  s.sim.dt = pick_num(u_sim, dsim, "dt_s", "/sim");
  if (!(s.sim.dt > 0.0))
    throw ConfigError("scenario: expected dt_s > 0 at /sim/dt_s");
  s.sim.n_samples = u_sim.contains("n_samples")
                        ? need_count(u_sim.at("n_samples"), "/sim/n_samples")
                        : dsim.at("n_samples").get<std::size_t>();
  s.sim.segment_length =
      u_sim.contains("segment_length")
          ? need_count(u_sim.at("segment_length"), "/sim/segment_length")
          : dsim.at("segment_length").get<std::size_t>();
  s.sim.n_seeds = u_sim.contains("n_seeds")
                      ? need_count(u_sim.at("n_seeds"), "/sim/n_seeds")
                      : dsim.at("n_seeds").get<std::size_t>();
  if (u_sim.contains("base_seed")) {
    if (!u_sim.at("base_seed").is_number_integer() &&
        !u_sim.at("base_seed").is_number_unsigned())
      throw ConfigError("scenario: expected an integer at /sim/base_seed");
    s.sim.base_seed = u_sim.at("base_seed").get<std::uint64_t>();
  } else {
    s.sim.base_seed = dsim.at("base_seed").get<std::uint64_t>();
  }
  s.sim.save_traces = u_sim.contains("save_traces")
                          ? need_bool(u_sim.at("save_traces"), "/sim/save_traces")
                          : dsim.at("save_traces").get<bool>();

  // output directory
  std::string out_dir = user.contains("output_dir")
                            ? need_str(user.at("output_dir"), "/output_dir")
                            : defs.at("output_dir").get<std::string>();
  if (out_dir == "auto") out_dir = "out/" + s.name;
  s.output_dir = out_dir;

  // canonical resolved configuration (fixed key order -> stable hash)
  json c;
  c["name"] = s.name;
  json cenv;
  cenv["pressure_mbar"] = pressure;
  cenv["temperature_k"] = temperature;
  cenv["particle_radius_nm"] = radius_nm;
  cenv["particle_density_kg_m3"] = density;
  cenv["gas_molecule_mass_amu"] = gas_amu;
  cenv["wavelength_nm"] = wavelength_nm;
  cenv["trap_offset_lambda"] = offset_lambda;
  cenv["polarisation_theta_deg"] = pol_deg;
  c["environment"] = cenv;
  json csys;
  csys["omega_x_krad_s"] = *ov.omega_x / 1e3;
  csys["omega_y_krad_s"] = *ov.omega_y / 1e3;
  csys["kappa_krad_s"] = *ov.kappa / 1e3;
  csys["delta_krad_s"] = *ov.delta / 1e3;
  csys["g_x_krad_s"] = *ov.g_x / 1e3;
  csys["g_y_krad_s"] = *ov.g_y / 1e3;
  if (ov.gamma) csys["gamma_rad_s"] = *ov.gamma;
  if (ov.g_xy) csys["g_xy_rad_s"] = *ov.g_xy;
  if (ov.nbar_x) csys["nbar_x"] = *ov.nbar_x;
  if (ov.nbar_y) csys["nbar_y"] = *ov.nbar_y;
  c["system"] = csys;
  c["force"] = json{{"psi_deg", psi_deg}, {"beta2", beta2}};
  json cmis;
  cmis["phi_deg"] = phi_val;
  cmis["beta_err_x_deg"] = s.mis.beta_err_x / constants::pi * 180.0;
  cmis["beta_err_y_deg"] = s.mis.beta_err_y / constants::pi * 180.0;
  c["misalignment"] = cmis;
  c["grid"] = json{{"omega_min_krad_s", w_min / 1e3},
                   {"omega_max_krad_s", w_max / 1e3},
                   {"n_points", n_points}};
  c["mode"] = mode_str;
  json csim;
  csim["dt_s"] = s.sim.dt;
  csim["n_samples"] = s.sim.n_samples;
  csim["segment_length"] = s.sim.segment_length;
  csim["n_seeds"] = s.sim.n_seeds;
  csim["base_seed"] = s.sim.base_seed;
  csim["save_traces"] = s.sim.save_traces;
  c["sim"] = csim;
  c["output_dir"] = s.output_dir;

  s.canonical = c;
  s.config_hash = fnv1a64(c.dump());
  s.config_hash_hex = hash_hex(s.config_hash);
  return s;
}

json load_config(const std::string& name_or_path) {
  const std::vector<std::string> names = builtin_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return builtin_config(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) {
    std::string msg = "scenario: '" + name_or_path +
                      "' is neither a builtin scenario nor a readable file "
                      "(builtins:";
    for (const auto& n : names) msg += " " + n;
    msg += ")";
    throw ConfigError(msg);
  }
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& name_or_path) {
  return scenario_from_json(load_config(name_or_path));
}

namespace {

struct AnalyticTable {
  std::vector<double> omega;
  std::vector<double> s_xx, s_yy, s_xy_lab;
  std::vector<double> c_xx, c_yy, c_xy;
  std::vector<double> d_xx, d_yy, d_xy;
  std::vector<double> s_het;
};

AnalyticTable analytic_table(const Scenario& s) {
  AnalyticTable t;
  const std::size_t n = s.grid.size();
  t.omega = s.grid;
  t.s_xx.resize(n);
  t.s_yy.resize(n);
  t.s_xy_lab.resize(n);
  t.c_xx.resize(n);
  t.c_yy.resize(n);
  t.c_xy.resize(n);
  t.d_xx.resize(n);
  t.d_yy.resize(n);
  t.d_xy.resize(n);
  t.s_het.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = s.grid[k];
    t.s_xx[k] = spectra::auto_spectrum(s.system, s.force, spectra::Mode::x, w);
    t.s_yy[k] = spectra::auto_spectrum(s.system, s.force, spectra::Mode::y, w);
    t.s_xy_lab[k] = spectra::lab_cross_spectrum(s.system, s.force, w);
    const spectra::SpectrumPoint c = spectra::coupled_spectra(s.system, s.force, w);
    t.c_xx[k] = c.s_xx;
    t.c_yy[k] = c.s_yy;
    t.c_xy[k] = c.s_xy;
    const spectra::SpectrumPoint d =
        spectra::detector_spectra(s.system, s.force, s.mis, w);
    t.d_xx[k] = d.s_xx;
    t.d_yy[k] = d.s_yy;
    t.d_xy[k] = d.s_xy;
    t.s_het[k] = spectra::heterodyne_spectrum(s.system, s.force, s.mis, w);
  }
  return t;
}

std::string analytic_csv(const AnalyticTable& t) {
  std::string out =
      "omega_rad_s,s_xx,s_yy,s_xy_lab,s_xx_coupled,s_yy_coupled,s_xy_coupled,"
      "s_xx_det,s_yy_det,s_xy_det,s_het\n";
  for (std::size_t k = 0; k < t.omega.size(); ++k) {
    out += fmt17(t.omega[k]) + ',' + fmt17(t.s_xx[k]) + ',' + fmt17(t.s_yy[k]) +
           ',' + fmt17(t.s_xy_lab[k]) + ',' + fmt17(t.c_xx[k]) + ',' +
           fmt17(t.c_yy[k]) + ',' + fmt17(t.c_xy[k]) + ',' + fmt17(t.d_xx[k]) +
           ',' + fmt17(t.d_yy[k]) + ',' + fmt17(t.d_xy[k]) + ',' +
           fmt17(t.s_het[k]) + '\n';
  }
  return out;
}

json analytic_report_json(const Scenario& s, const AnalyticTable& t) {
  json r;
  r["config_hash"] = s.config_hash_hex;
  r["omega_rad_s"] = t.omega;
  r["s_xx"] = t.s_xx;
  r["s_yy"] = t.s_yy;
  r["s_xy_lab"] = t.s_xy_lab;
  r["s_xx_coupled"] = t.c_xx;
  r["s_yy_coupled"] = t.c_yy;
  r["s_xy_coupled"] = t.c_xy;
  return r;
}

json derived_json(const Scenario& s) {
  json d;
  d["gamma_rad_s"] = s.system.gamma;
  d["nbar_x"] = s.system.nbar_x;
  d["nbar_y"] = s.system.nbar_y;
  d["g_xy_rad_s"] = s.system.g_xy;
  d["rotation_phi_rad"] = response::rotation_angle_phi(s.system);
  d["gamma_opt_x_rad_s"] =
      response::optical_damping(s.system, response::Mode::x);
  d["gamma_opt_y_rad_s"] =
      response::optical_damping(s.system, response::Mode::y);
  d["trap_phase_rad"] = s.env.trap_phase();
  const estimate::Band band = estimate::fit_band(s.system);
  d["band_omega_min_rad_s"] = band.omega_min;
  d["band_omega_max_rad_s"] = band.omega_max;
  try {
    d["cancellation_offset_lambda"] =
        response::find_cancellation_offset(s.system, s.env.wavelength) /
        s.env.wavelength;
  } catch (const ConfigError&) {
    // no cancellation root for this configuration (e.g. blue detuning)
  }
  return d;
}

struct SimOutputs {
  estimate::WelchResult avg;
  json report;
  std::vector<std::string> trace_files;
};

SimOutputs run_simulation(const Scenario& s, bool write_traces) {
  SimOutputs out;
  std::vector<estimate::WelchResult> parts;
  parts.reserve(s.sim.n_seeds);
  for (std::size_t k = 0; k < s.sim.n_seeds; ++k) {
    simulate::SimConfig cfg;
    cfg.dt = s.sim.dt;
    cfg.n_samples = s.sim.n_samples;
    cfg.seed = s.sim.base_seed + k;
    cfg.params_hash = s.config_hash;
    const simulate::Trace tr = simulate::integrate_trace(s.system, s.force, cfg);
    if (write_traces) {
      const std::string fname = s.name + "_seed" + std::to_string(cfg.seed) + ".lxtr";
      simulate::save_trace(tr, (std::filesystem::path(s.output_dir) / fname).string());
      out.trace_files.push_back(fname);
    }
    parts.push_back(estimate::welch_cross(tr, s.sim.segment_length));
  }
  out.avg = estimate::average_spectra(parts);

  const estimate::Band band = estimate::fit_band(s.system);
  const std::size_t nb = out.avg.omega.size();
  std::vector<double> m_xx(nb), m_yy(nb), m_xy(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const spectra::SpectrumPoint m =
        spectra::coupled_welch_equivalent(s.system, s.force, out.avg.omega[k]);
    m_xx[k] = m.s_xx;
    m_yy[k] = m.s_yy;
    m_xy[k] = m.s_xy;
  }
  json r;
  r["config_hash"] = s.config_hash_hex;
  r["n_segments"] = out.avg.n_segments;
  r["band"] = json{{"omega_min_rad_s", band.omega_min},
                   {"omega_max_rad_s", band.omega_max}};
  r["omega_rad_s"] = out.avg.omega;
  r["s_xx"] = out.avg.s_xx;
  r["s_yy"] = out.avg.s_yy;
  r["s_xy"] = out.avg.s_xy;
  r["model_s_xx"] = m_xx;
  r["model_s_yy"] = m_yy;
  r["model_s_xy"] = m_xy;
  out.report = std::move(r);
  return out;
}

std::string sim_csv(const json& report) {
  const auto& omega = report.at("omega_rad_s");
  const auto& sxx = report.at("s_xx");
  const auto& syy = report.at("s_yy");
  const auto& sxy = report.at("s_xy");
  const auto& mxx = report.at("model_s_xx");
  const auto& myy = report.at("model_s_yy");
  const auto& mxy = report.at("model_s_xy");
  std::string out =
      "omega_rad_s,s_xx,s_yy,s_xy,model_s_xx,model_s_yy,model_s_xy\n";
  for (std::size_t k = 0; k < omega.size(); ++k) {
    out += fmt17(omega[k].get<double>()) + ',' + fmt17(sxx[k].get<double>()) +
           ',' + fmt17(syy[k].get<double>()) + ',' +
           fmt17(sxy[k].get<double>()) + ',' + fmt17(mxx[k].get<double>()) +
           ',' + fmt17(myy[k].get<double>()) + ',' +
           fmt17(mxy[k].get<double>()) + '\n';
  }
  return out;
}

} // namespace

json compare_reports(const json& analytic_report, const json& sim_report) {
  if (!analytic_report.contains("config_hash") ||
      !sim_report.contains("config_hash"))
    throw ConfigError("scenario: report lacks a config_hash, refusing to compare");
  const std::string ha = analytic_report.at("config_hash").get<std::string>();
  const std::string hs = sim_report.at("config_hash").get<std::string>();
  if (ha != hs)
    throw ConfigError("scenario: config hash mismatch between reports (" + ha +
                      " vs " + hs + "), refusing to compare");

  const double w_min = sim_report.at("band").at("omega_min_rad_s").get<double>();
  const double w_max = sim_report.at("band").at("omega_max_rad_s").get<double>();
  const auto omega = sim_report.at("omega_rad_s").get<std::vector<double>>();
  const auto sxx = sim_report.at("s_xx").get<std::vector<double>>();
  const auto syy = sim_report.at("s_yy").get<std::vector<double>>();
  const auto sxy = sim_report.at("s_xy").get<std::vector<double>>();
  const auto mxx = sim_report.at("model_s_xx").get<std::vector<double>>();
  const auto myy = sim_report.at("model_s_yy").get<std::vector<double>>();
  const auto mxy = sim_report.at("model_s_xy").get<std::vector<double>>();

  double dxx = 0.0, dyy = 0.0, dxy = 0.0;
  double nxx = 0.0, nyy = 0.0, nxy = 0.0;
  std::size_t n_bins = 0;
  for (std::size_t k = 0; k < omega.size(); ++k) {
    if (omega[k] <= 0.0 || omega[k] < w_min || omega[k] > w_max) continue;
    ++n_bins;
    dxx += (sxx[k] - mxx[k]) * (sxx[k] - mxx[k]);
    nxx += mxx[k] * mxx[k];
    dyy += (syy[k] - myy[k]) * (syy[k] - myy[k]);
    nyy += myy[k] * myy[k];
    dxy += (sxy[k] - mxy[k]) * (sxy[k] - mxy[k]);
    nxy += mxy[k] * mxy[k];
  }
  if (n_bins == 0)
    throw ConfigError("scenario: no spectrum bins inside the comparison band");

  json c;
  c["config_hash"] = ha;
  c["n_bins"] = n_bins;
  c["rms_rel_s_xx"] = std::sqrt(dxx / nxx);
  c["rms_rel_s_yy"] = std::sqrt(dyy / nyy);
  c["rms_rel_s_xy"] = std::sqrt(dxy / nxy);
  return c;
}

json run_scenario(const Scenario& s, OutputFormat format) {
  std::filesystem::create_directories(s.output_dir);
  const std::filesystem::path dir(s.output_dir);
  std::vector<std::string> files;

  json summary;
  summary["name"] = s.name;
  summary["config_hash"] = s.config_hash_hex;
  summary["config"] = s.canonical;
  summary["derived"] = derived_json(s);

  const AnalyticTable table = analytic_table(s);
  const json ana_report = analytic_report_json(s, table);
  if (format != OutputFormat::json_only) {
    const std::string fname = s.name + "_analytic.csv";
    write_text((dir / fname).string(), analytic_csv(table));
    files.push_back(fname);
  }
  if (format != OutputFormat::csv) {
    const std::string fname = s.name + "_analytic.json";
    write_json_file((dir / fname).string(), ana_report);
    files.push_back(fname);
  }

  // the time-domain oracle is classical: it reproduces the analytic spectra
  // only for occupancies well above the vacuum scale
  const bool classical =
      std::min(s.system.nbar_x, s.system.nbar_y) > 100.0;
  if (s.mode != RunMode::analytic && !classical)
    summary["notice"] =
        "occupancies at or below 100 quanta: the classical time-domain "
        "simulator does not apply, analytic outputs only";

  if (s.mode != RunMode::analytic && classical) {
    SimOutputs sim = run_simulation(s, s.sim.save_traces);
    for (const auto& f : sim.trace_files) files.push_back(f);
    if (format != OutputFormat::json_only) {
      const std::string fname = s.name + "_sim.csv";
      write_text((dir / fname).string(), sim_csv(sim.report));
      files.push_back(fname);
    }
    if (format != OutputFormat::csv) {
      const std::string fname = s.name + "_sim.json";
      write_json_file((dir / fname).string(), sim.report);
      files.push_back(fname);
    }
    const json cmp = compare_reports(ana_report, sim.report);
    const std::string fname = s.name + "_compare.json";
    write_json_file((dir / fname).string(), cmp);
    files.push_back(fname);
    summary["comparison"] = cmp;
  }

  summary["outputs"] = files;
  const std::string sum_name = s.name + "_summary.json";
  write_json_file((dir / sum_name).string(), summary);
  return summary;
}

namespace {

json run_fits(const estimate::WelchResult& avg, const Scenario& s,
              std::size_t n_traces) {
  const estimate::Band band = estimate::fit_band(s.system);
  const double model_phi = response::rotation_angle_phi(s.system);

  json out;
  out["config_hash"] = s.config_hash_hex;
  out["n_traces"] = n_traces;
  out["n_segments"] = avg.n_segments;
  json truth;
  truth["phi_rad"] = s.mis.phi;
  truth["beta_err_x_rad"] = s.mis.beta_err_x;
  truth["beta_err_y_rad"] = s.mis.beta_err_y;
  truth["psi_rad"] = s.force.psi;
  truth["beta2"] = s.force.beta2;
  truth["model_rotation_phi_rad"] = model_phi;
  out["truth"] = truth;

  out["rotation"] = fit_to_json(estimate::fit_rotation(avg, band));
  try {
    out["misalignment"] =
        fit_to_json(estimate::fit_misalignment(avg, band, model_phi));
  } catch (const estimate::EstimateError& e) {
    out["misalignment"] = json{{"error", e.what()}};
  }
  out["orientation"] = fit_to_json(estimate::fit_orientation(avg, s.system, band));

  // cross spectrum with the fitted detector leakage removed
  if (out["misalignment"].contains("a_x")) {
    const double a_x = out["misalignment"]["a_x"].get<double>();
    const double a_y = out["misalignment"]["a_y"].get<double>();
    std::vector<double> corrected(avg.omega.size());
    for (std::size_t k = 0; k < avg.omega.size(); ++k)
      corrected[k] = avg.s_xy[k] - a_x * avg.s_yy[k] + a_y * avg.s_xx[k];
    json c;
    c["omega_rad_s"] = avg.omega;
    c["s_xy"] = avg.s_xy;
    c["s_xy_corrected"] = corrected;
    out["corrected"] = c;
  }
  return out;
}

} // namespace

json calibrate_simulated(const Scenario& s) {
  std::vector<estimate::WelchResult> parts;
  parts.reserve(s.sim.n_seeds);
  for (std::size_t k = 0; k < s.sim.n_seeds; ++k) {
    simulate::SimConfig cfg;
    cfg.dt = s.sim.dt;
    cfg.n_samples = s.sim.n_samples;
    cfg.seed = s.sim.base_seed + k;
    cfg.params_hash = s.config_hash;
    simulate::Trace tr = simulate::integrate_trace(s.system, s.force, cfg);
    tr = simulate::apply_misalignment(tr, s.mis);
    parts.push_back(estimate::welch_cross(tr, s.sim.segment_length));
  }
  const estimate::WelchResult avg = estimate::average_spectra(parts);
  return run_fits(avg, s, s.sim.n_seeds);
}

json calibrate_from_traces(const std::vector<simulate::Trace>& traces,
                           const Scenario& s) {
  if (traces.empty())
    throw ConfigError("scenario: no traces to calibrate from");
  std::vector<estimate::WelchResult> parts;
  parts.reserve(traces.size());
  for (const simulate::Trace& tr : traces) {
    if (tr.params_hash != 0 && tr.params_hash != s.config_hash)
      throw ConfigError(
          "scenario: trace parameter hash does not match the scenario "
          "configuration, refusing to calibrate");
    parts.push_back(estimate::welch_cross(tr, s.sim.segment_length));
  }
  const estimate::WelchResult avg = estimate::average_spectra(parts);
  return run_fits(avg, s, traces.size());
}

json sweep_scenario(const json& base_config, const std::string& dotted_param,
                    double a, double b, std::size_t n) {
  if (n < 1) throw ConfigError("scenario: sweep needs at least one point");

  auto set_path = [&](json& cfg, double value) {
    json* node = &cfg;
    std::string rest = dotted_param;
    std::string walked;
    while (true) {
      const std::size_t dot = rest.find('.');
      const std::string key = rest.substr(0, dot);
      walked += "/" + key;
      if (!node->is_object() || !node->contains(key))
        throw ConfigError("scenario: sweep parameter path not found: " +
                          dotted_param + " (missing " + walked + ")");
      node = &node->at(key);
      if (dot == std::string::npos) break;
      rest = rest.substr(dot + 1);
    }
    if (!node->is_number() && !node->is_string())
      throw ConfigError("scenario: sweep parameter is not a numeric entry: " +
                        dotted_param);
    *node = value;
  };

  auto eval_point = [&](double value) {
    json cfg = base_config;
    set_path(cfg, value);
    const Scenario s = scenario_from_json(cfg);
    double max_abs_xy = 0.0, max_xx = 0.0, max_yy = 0.0;
    for (const double w : s.grid) {
      const spectra::SpectrumPoint c =
          spectra::coupled_spectra(s.system, s.force, w);
      max_abs_xy = std::max(max_abs_xy, std::abs(c.s_xy));
      max_xx = std::max(max_xx, c.s_xx);
      max_yy = std::max(max_yy, c.s_yy);
    }
    json p;
    p["value"] = value;
    p["config_hash"] = s.config_hash_hex;
    p["g_xy_rad_s"] = s.system.g_xy;
    p["rotation_phi_rad"] = response::rotation_angle_phi(s.system);
    p["max_abs_s_xy"] = max_abs_xy;
    p["max_s_xx"] = max_xx;
    p["max_s_yy"] = max_yy;
    return p;
  };

  std::vector<double> values(n);
  if (n == 1) {
    values[0] = a;
  } else {
    const double step = (b - a) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
      values[k] = a + step * static_cast<double>(k);
    values.back() = b;
  }

  std::vector<std::future<json>> futures;
  futures.reserve(n);
  for (const double v : values)
    futures.push_back(std::async(std::launch::async, eval_point, v));

  json out;
  out["param"] = dotted_param;
  out["n_points"] = n;
  json points = json::array();
  for (auto& f : futures) points.push_back(f.get());
  out["points"] = points;
  return out;
}

} // namespace levixcorr::scenario
