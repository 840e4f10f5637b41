#include "levixcorr/model.hpp"
#include "levixcorr/constants.hpp"

#include <cmath>

namespace levixcorr::model {

namespace {

constexpr double default_omega_x = constants::two_pi * 125.0e3;
constexpr double default_omega_y = constants::two_pi * 140.0e3;
constexpr double default_kappa = constants::two_pi * 400.0e3;
constexpr double default_delta = -constants::two_pi * 176.0e3;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw ConfigError(std::string("model: non-finite value for ") + name);
}

} // namespace

double PhysicalEnv::trap_phase() const {
  if (wavelength <= 0.0)
    throw ConfigError("model: wavelength must be positive");
  const double half = 0.5 * wavelength;
  double r = std::fmod(trap_offset, half);
  if (r < 0.0) r += half;
  return constants::two_pi * r / wavelength;
}

double thermal_occupancy(double temperature, double omega) {
  if (temperature < 0.0)
    throw ConfigError("model: temperature must be non-negative");
  if (omega <= 0.0)
    throw ConfigError("model: omega must be positive for thermal occupancy");
  return constants::k_boltzmann * temperature / (constants::hbar * omega);
}

double gas_damping_rate(double pressure, double temperature, double radius,
                        double density, double molecule_mass) {
  if (pressure < 0.0)
    throw ConfigError("model: pressure must be non-negative");
  if (temperature <= 0.0 || radius <= 0.0 || density <= 0.0 ||
      molecule_mass <= 0.0)
    throw ConfigError("model: gas damping needs positive T, radius, density, molecule mass");
  const double v_mean = std::sqrt(8.0 * constants::k_boltzmann * temperature /
                                  (constants::pi * molecule_mass));
  return (16.0 / constants::pi) * pressure / (v_mean * density * radius);
}

double gas_damping_rate(const PhysicalEnv& env) {
  return gas_damping_rate(env.pressure, env.temperature, env.particle_radius,
                          env.particle_density, env.gas_molecule_mass);
}

double particle_mass(const PhysicalEnv& env) {
  if (env.particle_radius <= 0.0 || env.particle_density <= 0.0)
    throw ConfigError("model: particle mass needs positive radius and density");
  const double r3 = env.particle_radius * env.particle_radius * env.particle_radius;
  return (4.0 / 3.0) * constants::pi * r3 * env.particle_density;
}

double zero_point_displacement(double mass, double omega) {
  if (mass <= 0.0 || omega <= 0.0)
    throw ConfigError("model: zero-point displacement needs positive mass and omega");
  return std::sqrt(constants::hbar / (2.0 * mass * omega));
}

double direct_coupling_gxy(double g_x, double g_y, double delta, double kappa,
                           double phi_trap) {
  const double s = std::sin(phi_trap);
  if (std::abs(s) < 1e-6)
    throw ConfigError("model: trap phase too close to intensity antinode, direct coupling diverges");
  const double c = std::cos(phi_trap);
  const double cot2 = (c / s) * (c / s);
  return g_x * g_y * 2.0 * delta * cot2 / (delta * delta + 0.25 * kappa * kappa);
}

DirectedRates directed_rates(double gamma, double beta2, double psi) {
  if (gamma < 0.0 || beta2 < 0.0)
    throw ConfigError("model: directed rates need gamma >= 0 and beta2 >= 0");
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  return {gamma * beta2 * c * c, gamma * beta2 * s * s};
}

DirectedForce make_directed_force(double psi, double beta2, double gamma) {
  const DirectedRates r = directed_rates(gamma, beta2, psi);
  DirectedForce f;
  f.psi = psi;
  f.beta2 = beta2;
  f.gamma_x_corr = r.gamma_x_corr;
  f.gamma_y_corr = r.gamma_y_corr;
  return f;
}

SystemParams build_system(const PhysicalEnv& env, const SystemOverrides& ov) {
  if (!ov.g_x || !ov.g_y)
    throw ConfigError("model: optomechanical couplings g_x and g_y must be specified");

  SystemParams p;
  p.omega_x = ov.omega_x.value_or(default_omega_x);
  p.omega_y = ov.omega_y.value_or(default_omega_y);
  p.kappa = ov.kappa.value_or(default_kappa);
  p.delta = ov.delta.value_or(default_delta);
  p.g_x = *ov.g_x;
  p.g_y = *ov.g_y;
  p.gamma = ov.gamma ? *ov.gamma
                     : gas_damping_rate(env.pressure, env.temperature,
                                        env.particle_radius, env.particle_density,
                                        env.gas_molecule_mass);
  p.nbar_x = ov.nbar_x ? *ov.nbar_x
                       : thermal_occupancy(env.temperature, p.omega_x);
  p.nbar_y = ov.nbar_y ? *ov.nbar_y
                       : thermal_occupancy(env.temperature, p.omega_y);
  p.g_xy = ov.g_xy ? *ov.g_xy
                   : direct_coupling_gxy(p.g_x, p.g_y, p.delta, p.kappa,
                                         env.trap_phase());
  validate(p);
  return p;
}

void validate(const SystemParams& p) {
  require_finite(p.omega_x, "omega_x");
  require_finite(p.omega_y, "omega_y");
  require_finite(p.gamma, "gamma");
  require_finite(p.kappa, "kappa");
  require_finite(p.delta, "delta");
  require_finite(p.g_x, "g_x");
  require_finite(p.g_y, "g_y");
  require_finite(p.g_xy, "g_xy");
  require_finite(p.nbar_x, "nbar_x");
  require_finite(p.nbar_y, "nbar_y");
  if (p.omega_x <= 0.0 || p.omega_y <= 0.0)
    throw ConfigError("model: mechanical frequencies must be positive");
  if (p.omega_x == p.omega_y)
    throw ConfigError("model: degenerate mechanical frequencies are not supported");
  if (p.gamma < 0.0)
    throw ConfigError("model: gas damping must be non-negative");
  if (p.kappa <= 0.0)
    throw ConfigError("model: cavity linewidth must be positive");
  if (p.nbar_x < 0.0 || p.nbar_y < 0.0)
    throw ConfigError("model: occupancies must be non-negative");
}

void validate(const Misalignment& m) {
  require_finite(m.phi, "phi");
  require_finite(m.beta_err_x, "beta_err_x");
  require_finite(m.beta_err_y, "beta_err_y");
  if (std::abs(m.phi) >= 0.3 || std::abs(m.beta_err_x) >= 0.3 ||
      std::abs(m.beta_err_y) >= 0.3)
    throw ConfigError("model: misalignment angles must satisfy |angle| < 0.3 rad");
}

} // namespace levixcorr::model
