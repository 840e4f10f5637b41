#pragma once

// Linear response of the coupled mechanics-cavity system: susceptibilities,
// backaction-dressed mode responses, the effective x-y coupling function G,
// the mode-rotation angle it induces, and the trap-offset cancellation root.

#include <complex>

#include "levixcorr/model.hpp"

namespace levixcorr::response {

using cplx = std::complex<double>;

enum class Mode { x, y };

// Lorentzian susceptibility 1/(-i(omega - omega0) + width/2).
cplx susceptibility(double omega, double omega0, double width);

// Cavity susceptibility chi_c(omega) = susceptibility(omega, -delta, kappa).
cplx cavity_susceptibility(const model::SystemParams& p, double omega);

// Antisymmetrised cavity response eta_c(omega) = chi_c(omega) - chi_c*(-omega).
cplx cavity_eta(const model::SystemParams& p, double omega);

// Antisymmetrised mechanical response of the bare mode (gas damping only):
// mu_j(omega) = chi_j(omega) - chi_j*(-omega).
cplx mode_mu(const model::SystemParams& p, Mode mode, double omega);

// Backaction denominator M_j(omega) = 1 + g_j^2 mu_j(omega) eta_c(omega).
cplx backaction_denominator(const model::SystemParams& p, Mode mode,
                            double omega);

// |M_j(omega) - 1|: size of the cavity backaction modification.
double backaction_factor(const model::SystemParams& p, Mode mode, double omega);

// Optical damping rate of mode j induced by the cavity:
// g_j^2 kappa (|chi_c(omega_j)|^2 - |chi_c(-omega_j)|^2).
double optical_damping(const model::SystemParams& p, Mode mode);

// Effective x-y coupling G(omega) = i eta_c(omega) g_x g_y + g_xy.
cplx coupling_G(const model::SystemParams& p, double omega);

// Mode-rotation angle Phi = Re G(omega_bar) / (omega_x - omega_y) evaluated
// at the mean mechanical frequency omega_bar = (omega_x + omega_y)/2.
double rotation_angle_phi(const model::SystemParams& p);

// Inter-mode transfer amplitudes and loop factor at a given frequency:
// R_xy = i mu_x G / M_x, R_yx = i mu_y G / M_y, N = 1 - R_xy R_yx.
struct Transfer {
  cplx R_xy;
  cplx R_yx;
  cplx N;
};
Transfer transfer(const model::SystemParams& p, double omega);

// All response ingredients at one frequency (single-pass evaluation).
struct ResponseAt {
  cplx chi_c;
  cplx eta_c;
  cplx mu_x;
  cplx mu_y;
  cplx M_x;
  cplx M_y;
  cplx G;
  cplx R_xy;
  cplx R_yx;
  cplx N;
};
ResponseAt evaluate(const model::SystemParams& p, double omega);

// Trap offset (in metres, within (0.01, 0.24) * wavelength) at which the
// direct coupling cancels the cavity-mediated one: root of
// Re G(omega_bar; trap_offset) = 0, found by bisection to 1e-4 * wavelength.
// Throws ConfigError when Re G does not change sign over the bracket
// (e.g. blue detuning, where no cancellation exists).
double find_cancellation_offset(const model::SystemParams& p,
                                double wavelength);

} // namespace levixcorr::response
