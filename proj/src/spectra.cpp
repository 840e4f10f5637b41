#include "levixcorr/spectra.hpp"
#include "levixcorr/constants.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace levixcorr::spectra {

using response::cplx;

double pattern_cross(const model::SystemParams& p, double omega) {
  const response::ResponseAt r = response::evaluate(p, omega);
  const cplx e = r.mu_x * std::conj(r.mu_y) / (r.M_x * std::conj(r.M_y));
  return 2.0 * std::real(e);
}

double pattern_auto(const model::SystemParams& p, Mode mode, double omega) {
  const cplx mu = response::mode_mu(p, mode, omega);
  const cplx M = response::backaction_denominator(p, mode, omega);
  const double a = std::abs(mu / M);
  return 2.0 * a * a;
}

double optical_cross_spectrum(const model::SystemParams& p, double omega) {
  const cplx chi_c = response::cavity_susceptibility(p, omega);
  const double a = std::abs(chi_c);
  return p.kappa * p.g_x * p.g_y * a * a * pattern_cross(p, omega);
}

double directed_cross_spectrum(const model::SystemParams& p,
                               const model::DirectedForce& force,
                               double omega) {
  const double n_sum = p.nbar_x + p.nbar_y;
  const double ang = std::sin(force.psi) * std::cos(force.psi);
  return p.gamma * 0.5 * force.beta2 * ang *
         ((n_sum + 2.0) * pattern_cross(p, omega) +
          n_sum * pattern_cross(p, -omega));
}

double lab_cross_spectrum(const model::SystemParams& p,
                          const model::DirectedForce& force, double omega) {
  return optical_cross_spectrum(p, omega) +
         directed_cross_spectrum(p, force, omega);
}

double auto_spectrum(const model::SystemParams& p,
                     const model::DirectedForce& force, Mode mode,
                     double omega) {
  const double cpsi = std::cos(force.psi);
  const double spsi = std::sin(force.psi);
  const double dir2 = mode == Mode::x ? cpsi * cpsi : spsi * spsi;
  const double gamma_eff = p.gamma * (1.0 + force.beta2 * dir2);
  const double nbar = mode == Mode::x ? p.nbar_x : p.nbar_y;
  const double g = mode == Mode::x ? p.g_x : p.g_y;
  const cplx chi_c = response::cavity_susceptibility(p, omega);
  const double ac = std::abs(chi_c);
  return gamma_eff * ((nbar + 1.0) * pattern_auto(p, mode, omega) +
                      nbar * pattern_auto(p, mode, -omega)) +
         p.kappa * g * g * ac * ac * pattern_auto(p, mode, omega);
}

SpectrumPoint coupled_spectra(const model::SystemParams& p,
                              const model::DirectedForce& force,
                              double omega) {
  const response::ResponseAt r = response::evaluate(p, omega);
  const cplx tx = (r.mu_x / r.M_x) / r.N;
  const cplx ty = (r.mu_y / r.M_y) / r.N;

  // Transfer amplitudes of each bath into the two displacements.
  // thermal bath on x, weight gamma (2 nbar_x + 1)
  const double a_th_x = std::sqrt(p.gamma * (2.0 * p.nbar_x + 1.0));
  const cplx tx_bx = a_th_x * tx;
  const cplx ty_bx = a_th_x * r.R_yx * tx;
  // thermal bath on y
  const double a_th_y = std::sqrt(p.gamma * (2.0 * p.nbar_y + 1.0));
  const cplx ty_by = a_th_y * ty;
  const cplx tx_by = a_th_y * r.R_xy * ty;
  // shared directed drive, per-axis amplitude carries the axis occupancy
  const double a_dx = std::cos(force.psi) *
                      std::sqrt(p.gamma * force.beta2 * (2.0 * p.nbar_x + 1.0));
  const double a_dy = std::sin(force.psi) *
                      std::sqrt(p.gamma * force.beta2 * (2.0 * p.nbar_y + 1.0));
  const cplx tx_d = a_dx * tx + a_dy * r.R_xy * ty;
  const cplx ty_d = a_dy * ty + a_dx * r.R_yx * tx;
  // cavity noise, weight kappa |chi_c|^2
  const cplx ux = p.g_x * tx + p.g_y * r.R_xy * ty;
  const cplx uy = p.g_y * ty + p.g_x * r.R_yx * tx;
  const double ac = std::abs(r.chi_c);
  const double w_opt = p.kappa * ac * ac;

  auto pair_re = [](cplx a, cplx b) { return 2.0 * std::real(a * std::conj(b)); };

  SpectrumPoint s;
  s.s_xx = pair_re(tx_bx, tx_bx) + pair_re(tx_by, tx_by) + pair_re(tx_d, tx_d) +
           w_opt * pair_re(ux, ux);
  s.s_yy = pair_re(ty_bx, ty_bx) + pair_re(ty_by, ty_by) + pair_re(ty_d, ty_d) +
           w_opt * pair_re(uy, uy);
  s.s_xy = pair_re(tx_bx, ty_bx) + pair_re(tx_by, ty_by) + pair_re(tx_d, ty_d) +
           w_opt * pair_re(ux, uy);
  return s;
}

SpectrumPoint detector_spectra(const model::SystemParams& p,
                               const model::DirectedForce& force,
                               const model::Misalignment& mis, double omega,
                               bool include_quadratic) {
  const double s_xx = auto_spectrum(p, force, Mode::x, omega);
  const double s_yy = auto_spectrum(p, force, Mode::y, omega);
  const double s_xy = lab_cross_spectrum(p, force, omega);
  const double a_x = mis.phi + mis.beta_err_x;
  const double a_y = mis.phi + mis.beta_err_y;

  SpectrumPoint d;
  if (include_quadratic) {
    d.s_xx = s_xx + 2.0 * a_x * s_xy + a_x * a_x * s_yy;
    d.s_yy = s_yy - 2.0 * a_y * s_xy + a_y * a_y * s_xx;
    d.s_xy = (1.0 - a_x * a_y) * s_xy + a_x * s_yy - a_y * s_xx;
  } else {
    d.s_xx = s_xx + 2.0 * a_x * s_xy;
    d.s_yy = s_yy - 2.0 * a_y * s_xy;
    d.s_xy = s_xy + a_x * s_yy - a_y * s_xx;
  }
  return d;
}

double psd_contamination(const model::SystemParams& p,
                         const model::DirectedForce& force,
                         const model::Misalignment& mis, double omega) {
  const double a_x = mis.phi + mis.beta_err_x;
  return a_x * a_x * auto_spectrum(p, force, Mode::y, omega);
}

double heterodyne_spectrum(const model::SystemParams& p,
                           const model::DirectedForce& force,
                           const model::Misalignment& mis, double omega,
                           double imprecision) {
  const double s_xx = auto_spectrum(p, force, Mode::x, omega);
  const double s_yy = auto_spectrum(p, force, Mode::y, omega);
  const double s_xy = lab_cross_spectrum(p, force, omega);
  const cplx chi_c = response::cavity_susceptibility(p, omega);
  const double ac = std::abs(chi_c);
  const double phi = mis.phi;
  return ac * ac *
             ((p.g_y * p.g_y + p.g_x * p.g_y * phi) * s_yy +
              (p.g_x * p.g_x - p.g_x * p.g_y * phi) * s_xx +
              p.g_x * p.g_y * s_xy) +
         imprecision;
}

double cross_cooperativity(const model::SystemParams& p) {
  if (p.gamma <= 0.0)
    throw model::ConfigError("spectra: cross cooperativity needs gamma > 0");
  const double nbar = 0.5 * (p.nbar_x + p.nbar_y);
  if (nbar <= 0.0)
    throw model::ConfigError("spectra: cross cooperativity needs nbar > 0");
  return 4.0 * p.g_x * p.g_y / (p.kappa * p.gamma * nbar);
}

PeakRatio peak_ratio(const model::SystemParams& p,
                     const model::DirectedForce& force) {
  PeakRatio r;
  const double gamma_opt_x = response::optical_damping(p, Mode::x);
  r.estimate = force.beta2 * std::sin(force.psi) * std::cos(force.psi) *
               gamma_opt_x / (p.omega_x - p.omega_y);
  r.measured = lab_cross_spectrum(p, force, p.omega_x) /
               auto_spectrum(p, force, Mode::x, p.omega_x);
  return r;
}

double auto_peak_fwhm(const model::SystemParams& p,
                      const model::DirectedForce& force, Mode mode) {
  const double omega_j = mode == Mode::x ? p.omega_x : p.omega_y;
  const double width_guess =
      p.gamma + std::abs(response::optical_damping(p, mode));
  auto f = [&](double w) { return auto_spectrum(p, force, mode, w); };

  // Widen the search window until the spectrum at both edges has dropped
  // below half of the interior maximum.
  double half_window = 5.0 * width_guess;
  double lo = omega_j - half_window;
  double hi = omega_j + half_window;
  double peak_omega = omega_j;
  double peak_val = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    double a = lo;
    double b = hi;
    for (int it = 0; it < 200; ++it) {
      const double m1 = a + (b - a) / 3.0;
      const double m2 = b - (b - a) / 3.0;
      if (f(m1) < f(m2))
        a = m1;
      else
        b = m2;
    }
    peak_omega = 0.5 * (a + b);
    peak_val = f(peak_omega);
    if (f(lo) < 0.5 * peak_val && f(hi) < 0.5 * peak_val) break;
    half_window *= 2.0;
    lo = omega_j - half_window;
    hi = omega_j + half_window;
    if (attempt == 7)
      throw model::ConfigError("spectra: no isolated half-height peak found");
  }

  const double half = 0.5 * peak_val;
  auto crossing = [&](double inside, double outside) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (f(mid) > half)
        inside = mid;
      else
        outside = mid;
    }
    return 0.5 * (inside + outside);
  };
  const double left = crossing(peak_omega, lo);
  const double right = crossing(peak_omega, hi);
  return right - left;
}

double welch_equivalent(double s_at_plus, double s_at_minus) {
  return (s_at_plus + s_at_minus) / (16.0 * constants::pi);
}

SpectrumPoint coupled_welch_equivalent(const model::SystemParams& p,
                                       const model::DirectedForce& force,
                                       double omega) {
  const SpectrumPoint plus = coupled_spectra(p, force, omega);
  const SpectrumPoint minus = coupled_spectra(p, force, -omega);
  SpectrumPoint w;
  w.s_xx = welch_equivalent(plus.s_xx, minus.s_xx);
  w.s_yy = welch_equivalent(plus.s_yy, minus.s_yy);
  w.s_xy = welch_equivalent(plus.s_xy, minus.s_xy);
  return w;
}

std::vector<double> frequency_grid(double omega_min, double omega_max,
                                   std::size_t n) {
  if (n < 2)
    throw model::ConfigError("spectra: frequency grid needs at least 2 points");
  if (!(omega_max > omega_min))
    throw model::ConfigError("spectra: frequency grid needs omega_max > omega_min");
  std::vector<double> grid(n);
  const double step = (omega_max - omega_min) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k)
    grid[k] = omega_min + step * static_cast<double>(k);
  grid.back() = omega_max;
  return grid;
}

void write_spectrum_csv(const std::string& path,
                        const std::vector<double>& omega,
                        const std::vector<double>& value) {
  if (omega.size() != value.size())
    throw model::ConfigError("spectra: omega and value arrays differ in length");
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("spectra: cannot open '" + path + "' for writing");
  out << "omega_rad_s,value\n";
  char buf[64];
  for (std::size_t k = 0; k < omega.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", omega[k]);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", value[k]);
    out << buf << '\n';
  }
  if (!out)
    throw std::runtime_error("spectra: write to '" + path + "' failed");
}

SpectrumTable read_spectrum_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("spectra: cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != "omega_rad_s,value")
    throw std::runtime_error("spectra: '" + path + "' is not a spectrum CSV");
  SpectrumTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("spectra: malformed row " + std::to_string(lineno) +
                               " in '" + path + "'");
    try {
      t.omega.push_back(std::stod(line.substr(0, comma)));
      t.value.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw std::runtime_error("spectra: malformed row " + std::to_string(lineno) +
                               " in '" + path + "'");
    }
  }
  return t;
}

} // namespace levixcorr::spectra
