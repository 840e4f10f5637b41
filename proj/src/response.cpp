#include "levixcorr/response.hpp"
#include "levixcorr/constants.hpp"

#include <cmath>

namespace levixcorr::response {

namespace {
constexpr cplx i_unit{0.0, 1.0};

double mode_frequency(const model::SystemParams& p, Mode mode) {
  return mode == Mode::x ? p.omega_x : p.omega_y;
}

double mode_coupling(const model::SystemParams& p, Mode mode) {
  return mode == Mode::x ? p.g_x : p.g_y;
}
} // namespace

cplx susceptibility(double omega, double omega0, double width) {
  return 1.0 / (-i_unit * (omega - omega0) + 0.5 * width);
}

cplx cavity_susceptibility(const model::SystemParams& p, double omega) {
  return susceptibility(omega, -p.delta, p.kappa);
}

cplx cavity_eta(const model::SystemParams& p, double omega) {
  return cavity_susceptibility(p, omega) -
         std::conj(cavity_susceptibility(p, -omega));
}

cplx mode_mu(const model::SystemParams& p, Mode mode, double omega) {
  const double w0 = mode_frequency(p, mode);
  return susceptibility(omega, w0, p.gamma) -
         std::conj(susceptibility(-omega, w0, p.gamma));
}

cplx backaction_denominator(const model::SystemParams& p, Mode mode,
                            double omega) {
  const double g = mode_coupling(p, mode);
  return 1.0 + g * g * mode_mu(p, mode, omega) * cavity_eta(p, omega);
}

double backaction_factor(const model::SystemParams& p, Mode mode,
                         double omega) {
  return std::abs(backaction_denominator(p, mode, omega) - 1.0);
}

double optical_damping(const model::SystemParams& p, Mode mode) {
  const double w0 = mode_frequency(p, mode);
  const double g = mode_coupling(p, mode);
  const double a_plus = std::abs(cavity_susceptibility(p, w0));
  const double a_minus = std::abs(cavity_susceptibility(p, -w0));
  return g * g * p.kappa * (a_plus * a_plus - a_minus * a_minus);
}

cplx coupling_G(const model::SystemParams& p, double omega) {
  return i_unit * cavity_eta(p, omega) * p.g_x * p.g_y + p.g_xy;
}

double rotation_angle_phi(const model::SystemParams& p) {
  const double omega_bar = 0.5 * (p.omega_x + p.omega_y);
  const double dw = p.omega_x - p.omega_y;
  if (dw == 0.0)
    throw model::ConfigError("response: rotation angle undefined for degenerate modes");
  return std::real(coupling_G(p, omega_bar)) / dw;
}

Transfer transfer(const model::SystemParams& p, double omega) {
  const cplx G = coupling_G(p, omega);
  const cplx Rxy = i_unit * mode_mu(p, Mode::x, omega) * G /
                   backaction_denominator(p, Mode::x, omega);
  const cplx Ryx = i_unit * mode_mu(p, Mode::y, omega) * G /
                   backaction_denominator(p, Mode::y, omega);
  return {Rxy, Ryx, 1.0 - Rxy * Ryx};
}

ResponseAt evaluate(const model::SystemParams& p, double omega) {
  ResponseAt r;
  r.chi_c = cavity_susceptibility(p, omega);
  r.eta_c = r.chi_c - std::conj(cavity_susceptibility(p, -omega));
  r.mu_x = mode_mu(p, Mode::x, omega);
  r.mu_y = mode_mu(p, Mode::y, omega);
  r.M_x = 1.0 + p.g_x * p.g_x * r.mu_x * r.eta_c;
  r.M_y = 1.0 + p.g_y * p.g_y * r.mu_y * r.eta_c;
  r.G = i_unit * r.eta_c * p.g_x * p.g_y + p.g_xy;
  r.R_xy = i_unit * r.mu_x * r.G / r.M_x;
  r.R_yx = i_unit * r.mu_y * r.G / r.M_y;
  r.N = 1.0 - r.R_xy * r.R_yx;
  return r;
}

double find_cancellation_offset(const model::SystemParams& p,
                                double wavelength) {
  if (wavelength <= 0.0)
    throw model::ConfigError("response: wavelength must be positive");
  const double omega_bar = 0.5 * (p.omega_x + p.omega_y);

  auto re_G_at = [&](double offset) {
    model::PhysicalEnv env;
    env.wavelength = wavelength;
    env.trap_offset = offset;
    model::SystemParams q = p;
    q.g_xy = model::direct_coupling_gxy(p.g_x, p.g_y, p.delta, p.kappa,
                                        env.trap_phase());
    return std::real(coupling_G(q, omega_bar));
  };

  double lo = 0.01 * wavelength;
  double hi = 0.24 * wavelength;
  double f_lo = re_G_at(lo);
  double f_hi = re_G_at(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if (std::signbit(f_lo) == std::signbit(f_hi))
    throw model::ConfigError(
        "response: no cancellation offset in bracket, Re G does not change sign "
        "(is the detuning red?)");

  const double tol = 1e-4 * wavelength;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = re_G_at(mid);
    if (f_mid == 0.0) return mid;
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace levixcorr::response
