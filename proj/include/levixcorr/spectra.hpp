#pragma once

// Analytic displacement power spectra of the two-mode system under gas
// collisions, an oriented stochastic force, and cavity backaction noise.
//
// Conventions (documented in docs/model.md):
//  * All spectra below use the "pattern" normalization built from
//    M_xy(omega) = mu_x mu_y*/(M_x M_y*) + c.c. and
//    M_jj(omega) = 2 |mu_j / M_j|^2.
//  * Spectra are functions of signed angular frequency omega (rad/s); the
//    thermal and directed parts are even in omega, the cavity-noise parts
//    carry the sideband asymmetry of |chi_c(omega)|^2.
//  * welch_equivalent() converts a pattern spectrum to the one-sided,
//    omega-normalized classical spectrum estimated from simulated traces
//    (symmetrize, then divide by 8*pi).

#include <vector>

#include "levixcorr/model.hpp"
#include "levixcorr/response.hpp"

namespace levixcorr::spectra {

using response::Mode;

// Pattern building blocks (dimension 1/rate^2).
double pattern_cross(const model::SystemParams& p, double omega);
double pattern_auto(const model::SystemParams& p, Mode mode, double omega);

// Cavity-noise-mediated cross spectrum:
// kappa g_x g_y |chi_c(omega)|^2 M_xy(omega).
double optical_cross_spectrum(const model::SystemParams& p, double omega);

// Directed-force cross spectrum:
// gamma (beta2/2) sin(psi) cos(psi) [ (nbar_x+nbar_y+2) M_xy(omega)
//                                   + (nbar_x+nbar_y)   M_xy(-omega) ].
double directed_cross_spectrum(const model::SystemParams& p,
                               const model::DirectedForce& force,
                               double omega);

// Lab-frame cross spectrum: optical + directed contributions.
double lab_cross_spectrum(const model::SystemParams& p,
                          const model::DirectedForce& force, double omega);

// Auto spectrum of mode j with directed-force heating folded into the
// effective thermal rate:
//   gamma_eff,j [ (nbar_j+1) M_jj(omega) + nbar_j M_jj(-omega) ]
//   + kappa g_j^2 |chi_c(omega)|^2 M_jj(omega),
// gamma_eff,x = gamma (1 + beta2 cos^2 psi), and sin^2 for y.
double auto_spectrum(const model::SystemParams& p,
                     const model::DirectedForce& force, Mode mode,
                     double omega);

struct SpectrumPoint {
  double s_xx = 0.0;
  double s_yy = 0.0;
  double s_xy = 0.0;
};

// Exact coupled two-mode evaluator: propagates each bath (thermal x, thermal
// y, the shared directed drive, cavity noise) through the full transfer
// matrix including the inter-mode amplitudes R_xy, R_yx. Reduces to
// lab_cross_spectrum / auto_spectrum when the couplings are switched off and
// additionally contains the mode-hybridisation tails present in time-domain
// simulations. Also the forward model used by the orientation fit.
SpectrumPoint coupled_spectra(const model::SystemParams& p,
                              const model::DirectedForce& force, double omega);

// Detector-frame spectra for readout axes rotated by the small angles
// a_x = phi + beta_err_x (x picks up y) and a_y = phi + beta_err_y
// (y sheds x):
//   S_xy_det = (1 - a_x a_y) S_xy + a_x S_yy - a_y S_xx
//   S_xx_det = S_xx + 2 a_x S_xy + a_x^2 S_yy
//   S_yy_det = S_yy - 2 a_y S_xy + a_y^2 S_xx
// Base spectra are the lab-frame analytic ones; include_quadratic controls
// the (a_x a_y, a^2) terms.
SpectrumPoint detector_spectra(const model::SystemParams& p,
                               const model::DirectedForce& force,
                               const model::Misalignment& mis, double omega,
                               bool include_quadratic = true);

// Leading-order contamination of the measured x auto-spectrum by the y mode:
// (phi + beta_err_x)^2 S_yy(omega).
double psd_contamination(const model::SystemParams& p,
                         const model::DirectedForce& force,
                         const model::Misalignment& mis, double omega);

// Single-detector heterodyne spectrum: cavity-filtered mixture of both modes
// with the rotation-induced cross terms and an additive imprecision floor.
double heterodyne_spectrum(const model::SystemParams& p,
                           const model::DirectedForce& force,
                           const model::Misalignment& mis, double omega,
                           double imprecision = 0.5);

// Quantum cross-cooperativity 4 g_x g_y / (kappa gamma nbar) with
// nbar = (nbar_x + nbar_y)/2; the cavity-noise cross term dominates the
// directed-force term once this exceeds beta2 sin(psi) cos(psi).
double cross_cooperativity(const model::SystemParams& p);

// Relative size of the cross feature against the x auto peak.
//  estimate: beta2 sin(psi) cos(psi) gamma_opt,x / (omega_x - omega_y)
//  measured: lab_cross_spectrum(omega_x) / auto_spectrum(x, omega_x)
struct PeakRatio {
  double estimate = 0.0;
  double measured = 0.0;
};
PeakRatio peak_ratio(const model::SystemParams& p,
                     const model::DirectedForce& force);

// Full width at half maximum of the analytic auto spectrum peak near the
// mode frequency, extracted numerically (peak search + half-height
// bisection). This is the operational definition of the total (gas +
// optical) damping rate of a mode.
double auto_peak_fwhm(const model::SystemParams& p,
                      const model::DirectedForce& force, Mode mode);

// Convert a pattern spectrum sampled at +omega / -omega to the one-sided
// omega-normalized classical spectrum matching the Welch estimator applied
// to simulated traces.
double welch_equivalent(double s_at_plus, double s_at_minus);

// Convenience wrappers evaluating the coupled spectra in Welch convention.
SpectrumPoint coupled_welch_equivalent(const model::SystemParams& p,
                                       const model::DirectedForce& force,
                                       double omega);

// Inclusive linear grid of n >= 2 angular frequencies.
std::vector<double> frequency_grid(double omega_min, double omega_max,
                                   std::size_t n);

// Single-spectrum CSV serialization (header "omega_rad_s,value", one row per
// sample, full double precision so that write -> read round-trips exactly).
struct SpectrumTable {
  std::vector<double> omega;
  std::vector<double> value;
};
void write_spectrum_csv(const std::string& path,
                        const std::vector<double>& omega,
                        const std::vector<double>& value);
SpectrumTable read_spectrum_csv(const std::string& path);

} // namespace levixcorr::spectra
