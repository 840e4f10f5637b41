#pragma once

// Spectral estimation from time traces (Welch averaging with Hann windows)
// and inversion of measured spectra for the mode-rotation angle, detector
// misalignment angles, and the orientation/strength of the directed force.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "levixcorr/model.hpp"
#include "levixcorr/simulate.hpp"

namespace levixcorr::estimate {

struct EstimateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One-sided, omega-normalized auto and cross spectra:
// sum_k S(omega_k) d_omega ~= variance, omega_k = 2 pi k / (segment * dt).
struct WelchResult {
  std::vector<double> omega;
  std::vector<double> s_xx;
  std::vector<double> s_yy;
  std::vector<double> s_xy; // Re cross spectrum
  std::size_t n_segments = 0;
};

// Welch estimator settings. segment_length must be a power of two >= 32,
// overlap_fraction in [0, 1), window one of "hann" (periodic) or "rect",
// detrend removes the per-segment mean before windowing.
struct WelchConfig {
  std::size_t segment_length = 16384;
  double overlap_fraction = 0.5;
  std::string window = "hann";
  bool detrend = true;
};

// Welch estimate over one trace; the trace must hold at least 2^14 samples
// and at least one segment.
WelchResult welch_cross(const simulate::Trace& trace, const WelchConfig& cfg);
// Convenience overload: 50% overlap, Hann window.
WelchResult welch_cross(const simulate::Trace& trace,
                        std::size_t segment_length, bool detrend_mean = true);

// Average several Welch results (grids must match); n_segments accumulates.
WelchResult average_spectra(const std::vector<WelchResult>& parts);

// Frequency band used by the fits: both mechanical peaks plus five effective
// linewidths of margin on each side.
struct Band {
  double omega_min = 0.0;
  double omega_max = 0.0;
};
Band fit_band(const model::SystemParams& p);

struct FitResult {
  std::map<std::string, double> estimates;
  double residual_rms = 0.0; // residual norm relative to the data norm
  std::size_t n_points = 0;
  std::string flag; // empty when the fit is well determined
};

// Rotation-only model S_xy = phi (S_yy - S_xx): scalar least squares over the
// band. Estimate key: "phi".
FitResult fit_rotation(const WelchResult& spec, const Band& band);

// Two-angle detector model S_xy = a_x S_yy - a_y S_xx solved by 2x2 normal
// equations; a_j = phi + beta_err_j. Keys: "a_x", "a_y", and, after removing
// the supplied rotation angle, "beta_err_x", "beta_err_y". Throws when the
// two regressors are degenerate (correlation > 0.999) over the band.
FitResult fit_misalignment(const WelchResult& spec, const Band& band,
                           double known_phi = 0.0);

// Directed-force orientation and strength from the measured spectra, using
// the coupled analytic evaluator (in Welch convention) as forward model.
// Grid search over psi in [0, pi) x beta2 in (0, beta2_max], refined by
// coordinate-wise parabolic steps; per-bin weights follow the Welch
// estimator variances with n_avg = spec.n_segments averages. Keys: "psi",
// "beta2". Sets flag "orientation unresolved" when the objective is flat in
// psi (relative variation < 1e-3), e.g. for vanishing directed strength.
FitResult fit_orientation(const WelchResult& spec,
                          const model::SystemParams& p, const Band& band,
                          double beta2_max = 1.0);

} // namespace levixcorr::estimate
