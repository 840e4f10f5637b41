#pragma once

// System description: parameter structs, occupancies, gas damping, direct
// optical coupling, directed-force rates, and assembly from a physical
// environment description.

#include <optional>
#include <stdexcept>
#include <string>

namespace levixcorr::model {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mechanical + optical parameters of the two-mode cavity system.
// Angular frequencies and rates in rad/s, detuning delta signed
// (red detuning: delta < 0), occupancies dimensionless.
struct SystemParams {
  double omega_x = 0.0;
  double omega_y = 0.0;
  double gamma = 0.0;   // gas damping (both modes)
  double kappa = 0.0;   // cavity linewidth
  double delta = 0.0;   // laser-cavity detuning
  double g_x = 0.0;     // optomechanical coupling, x
  double g_y = 0.0;     // optomechanical coupling, y
  double g_xy = 0.0;    // direct x-y coupling
  double nbar_x = 0.0;  // thermal occupancy, x
  double nbar_y = 0.0;  // thermal occupancy, y
};

// Oriented stochastic force: orientation psi in the x-y plane (radians),
// relative strength beta2 = beta^2, and the per-axis correlated-drive rates
// it induces on top of the gas damping.
struct DirectedForce {
  double psi = 0.0;
  double beta2 = 0.0;
  double gamma_x_corr = 0.0;
  double gamma_y_corr = 0.0;
};

// Detector-frame imperfections: mode rotation phi plus per-axis detector
// misalignment angles (all radians, small-angle regime |angle| < 0.3).
struct Misalignment {
  double phi = 0.0;
  double beta_err_x = 0.0;
  double beta_err_y = 0.0;
};

// Experimental environment from which SystemParams fields are derived.
// trap_offset is the position offset along the cavity axis in metres;
// trap_phase() maps it to the intracavity phase angle.
struct PhysicalEnv {
  double pressure = 0.0;          // Pa
  double temperature = 0.0;       // K
  double particle_radius = 0.0;   // m
  double particle_density = 0.0;  // kg/m^3
  double gas_molecule_mass = 0.0; // kg
  double wavelength = 0.0;        // m
  double trap_offset = 0.0;       // m, along cavity axis
  double polarisation_theta = 0.0;// rad, tweezer polarisation angle

  double trap_phase() const; // 2*pi*(trap_offset mod lambda/2)/lambda
};

// Optional explicit overrides applied on top of environment-derived values.
struct SystemOverrides {
  std::optional<double> omega_x;
  std::optional<double> omega_y;
  std::optional<double> gamma;
  std::optional<double> kappa;
  std::optional<double> delta;
  std::optional<double> g_x;
  std::optional<double> g_y;
  std::optional<double> g_xy;
  std::optional<double> nbar_x;
  std::optional<double> nbar_y;
};

// Mean thermal phonon occupancy k_B*T/(hbar*omega) (high-temperature form).
double thermal_occupancy(double temperature, double omega);

// Epstein drag rate for a sphere in rarefied gas, linear in pressure.
// pressure in Pa, temperature in K, radius in m, density in kg/m^3,
// molecule mass in kg; returns rad/s (= 1/s).
double gas_damping_rate(double pressure, double temperature, double radius,
                        double density, double molecule_mass);
double gas_damping_rate(const PhysicalEnv& env);

// Mass of the levitated sphere, (4/3)*pi*R^3*density, in kg.
double particle_mass(const PhysicalEnv& env);

// Zero-point displacement sqrt(hbar/(2*m*omega)) in metres; converts the
// dimensionless mode coordinates used throughout to SI displacement.
double zero_point_displacement(double mass, double omega);

// Direct x-y coupling from cavity-mediated coherent scattering at trap
// phase phi_trap: g_xy = g_x*g_y * 2*delta*cot^2(phi)/(delta^2+kappa^2/4).
// Throws ConfigError near the intensity antinode (|sin phi| ~ 0) where the
// expression diverges.
double direct_coupling_gxy(double g_x, double g_y, double delta, double kappa,
                           double phi_trap);

// Per-axis directed-drive rates (gamma*beta2*cos^2 psi, gamma*beta2*sin^2 psi).
struct DirectedRates {
  double gamma_x_corr = 0.0;
  double gamma_y_corr = 0.0;
};
DirectedRates directed_rates(double gamma, double beta2, double psi);

// Convenience: populate a DirectedForce from orientation + strength.
DirectedForce make_directed_force(double psi, double beta2, double gamma);

// Assemble SystemParams from a physical environment plus overrides.
// Couplings g_x, g_y have no environment-derived default and must be given
// via overrides, otherwise ConfigError. g_xy defaults to the trap-phase
// expression; mechanical frequencies default to built-in values unless
// overridden.
SystemParams build_system(const PhysicalEnv& env, const SystemOverrides& ov);

// Validate parameter sanity (positive rates/frequencies, finite values).
// Throws ConfigError on violation.
void validate(const SystemParams& p);
void validate(const Misalignment& m);

} // namespace levixcorr::model
