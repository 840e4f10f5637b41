#include "levixcorr/estimate.hpp"
#include "levixcorr/constants.hpp"
#include "levixcorr/response.hpp"
#include "levixcorr/spectra.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace levixcorr::estimate {

namespace {

std::mutex fftw_plan_mutex; // FFTW planner is not thread-safe

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

struct BinSelection {
  std::vector<std::size_t> idx;
};

BinSelection select_bins(const WelchResult& spec, const Band& band) {
  if (spec.omega.size() < 3)
    throw EstimateError("estimate: spectrum has too few bins");
  BinSelection sel;
  for (std::size_t k = 1; k + 1 < spec.omega.size(); ++k) { // skip DC, Nyquist
    const double w = spec.omega[k];
    if (w >= band.omega_min && w <= band.omega_max) sel.idx.push_back(k);
  }
  if (sel.idx.size() < 4)
    throw EstimateError("estimate: fit band contains too few bins");
  return sel;
}

} // namespace

WelchResult welch_cross(const simulate::Trace& trace, const WelchConfig& cfg) {
  const std::size_t n = trace.x.size();
  const std::size_t nseg_len = cfg.segment_length;
  const bool detrend_mean = cfg.detrend;
  if (trace.y.size() != n)
    throw EstimateError("estimate: trace x/y length mismatch");
  if (!is_pow2(nseg_len) || nseg_len < 32)
    throw EstimateError("estimate: segment_length must be a power of two >= 32");
  if (n < (1u << 14))
    throw EstimateError("estimate: trace too short, need at least 2^14 samples");
  if (n < nseg_len)
    throw EstimateError("estimate: trace shorter than one segment");
  if (!(trace.dt > 0.0))
    throw EstimateError("estimate: trace dt must be positive");
  if (!(cfg.overlap_fraction >= 0.0) || !(cfg.overlap_fraction < 1.0))
    throw EstimateError("estimate: overlap_fraction must lie in [0, 1)");
  if (cfg.window != "hann" && cfg.window != "rect")
    throw EstimateError("estimate: unknown window '" + cfg.window +
                        "', expected 'hann' or 'rect'");

  const std::size_t hop = std::max<std::size_t>(
      1, nseg_len - static_cast<std::size_t>(cfg.overlap_fraction *
                                             static_cast<double>(nseg_len)));
  const std::size_t n_segments = (n - nseg_len) / hop + 1;
  const std::size_t n_bins = nseg_len / 2 + 1;

  std::vector<double> window(nseg_len);
  double u_sum = 0.0;
  for (std::size_t i = 0; i < nseg_len; ++i) {
    window[i] = cfg.window == "hann"
                    ? 0.5 * (1.0 - std::cos(constants::two_pi *
                                            static_cast<double>(i) /
                                            static_cast<double>(nseg_len)))
                    : 1.0;
    u_sum += window[i] * window[i];
  }

  double* in = fftw_alloc_real(nseg_len);
  fftw_complex* out = fftw_alloc_complex(n_bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nseg_len), in, out,
                                FFTW_ESTIMATE);
  }
  if (!plan) {
    fftw_free(in);
    fftw_free(out);
    throw EstimateError("estimate: FFTW plan creation failed");
  }

  std::vector<double> xr(n_bins), xi(n_bins);
  std::vector<double> acc_xx(n_bins, 0.0), acc_yy(n_bins, 0.0),
      acc_xy(n_bins, 0.0);

  auto load_segment = [&](const std::vector<double>& src, std::size_t start) {
    double mean = 0.0;
    if (detrend_mean) {
      for (std::size_t i = 0; i < nseg_len; ++i) mean += src[start + i];
      mean /= static_cast<double>(nseg_len);
    }
    for (std::size_t i = 0; i < nseg_len; ++i)
      in[i] = (src[start + i] - mean) * window[i];
  };

  for (std::size_t s = 0; s < n_segments; ++s) {
    const std::size_t start = s * hop;
    load_segment(trace.x, start);
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      xr[k] = out[k][0];
      xi[k] = out[k][1];
    }
    load_segment(trace.y, start);
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double yr = out[k][0];
      const double yi = out[k][1];
      acc_xx[k] += xr[k] * xr[k] + xi[k] * xi[k];
      acc_yy[k] += yr * yr + yi * yi;
      acc_xy[k] += xr[k] * yr + xi[k] * yi;
    }
  }

  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  WelchResult res;
  res.n_segments = n_segments;
  res.omega.resize(n_bins);
  res.s_xx.resize(n_bins);
  res.s_yy.resize(n_bins);
  res.s_xy.resize(n_bins);
  const double base = trace.dt / (constants::two_pi * u_sum *
                                  static_cast<double>(n_segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    res.omega[k] = constants::two_pi * static_cast<double>(k) /
                   (static_cast<double>(nseg_len) * trace.dt);
    const double fold = (k == 0 || k == n_bins - 1) ? 1.0 : 2.0;
    res.s_xx[k] = fold * base * acc_xx[k];
    res.s_yy[k] = fold * base * acc_yy[k];
    res.s_xy[k] = fold * base * acc_xy[k];
  }
  return res;
}

WelchResult welch_cross(const simulate::Trace& trace,
                        std::size_t segment_length, bool detrend_mean) {
  WelchConfig cfg;
  cfg.segment_length = segment_length;
  cfg.detrend = detrend_mean;
  return welch_cross(trace, cfg);
}

WelchResult average_spectra(const std::vector<WelchResult>& parts) {
  if (parts.empty())
    throw EstimateError("estimate: nothing to average");
  WelchResult out = parts.front();
  const std::size_t nb = out.omega.size();
  double total = static_cast<double>(out.n_segments);
  for (double& v : out.s_xx) v *= total;
  for (double& v : out.s_yy) v *= total;
  for (double& v : out.s_xy) v *= total;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const WelchResult& p = parts[i];
    if (p.omega.size() != nb || p.omega != out.omega)
      throw EstimateError("estimate: cannot average spectra on different grids");
    const double w = static_cast<double>(p.n_segments);
    for (std::size_t k = 0; k < nb; ++k) {
      out.s_xx[k] += w * p.s_xx[k];
      out.s_yy[k] += w * p.s_yy[k];
      out.s_xy[k] += w * p.s_xy[k];
    }
    total += w;
  }
  const double inv = 1.0 / total;
  for (std::size_t k = 0; k < nb; ++k) {
    out.s_xx[k] *= inv;
    out.s_yy[k] *= inv;
    out.s_xy[k] *= inv;
  }
  out.n_segments = static_cast<std::size_t>(total);
  return out;
}

Band fit_band(const model::SystemParams& p) {
  const double go_x = response::optical_damping(p, response::Mode::x);
  const double go_y = response::optical_damping(p, response::Mode::y);
  const double width = std::max(p.gamma + go_x, p.gamma + go_y);
  Band b;
  b.omega_min = std::min(p.omega_x, p.omega_y) - 5.0 * width;
  b.omega_max = std::max(p.omega_x, p.omega_y) + 5.0 * width;
  if (b.omega_min < 0.0) b.omega_min = 0.0;
  return b;
}

FitResult fit_rotation(const WelchResult& spec, const Band& band) {
  const BinSelection sel = select_bins(spec, band);
  double num = 0.0, den = 0.0, data2 = 0.0, scale2 = 0.0;
  for (std::size_t k : sel.idx) {
    const double d = spec.s_yy[k] - spec.s_xx[k];
    num += spec.s_xy[k] * d;
    den += d * d;
    data2 += spec.s_xy[k] * spec.s_xy[k];
    const double s = spec.s_xx[k] + spec.s_yy[k];
    scale2 += s * s;
  }
  if (den == 0.0)
    throw EstimateError("estimate: rotation fit degenerate, S_yy - S_xx vanishes");
  const double phi = num / den;

  double resid2 = 0.0;
  for (std::size_t k : sel.idx) {
    const double r = spec.s_xy[k] - phi * (spec.s_yy[k] - spec.s_xx[k]);
    resid2 += r * r;
  }
  FitResult fr;
  fr.estimates["phi"] = phi;
  fr.n_points = sel.idx.size();
  fr.residual_rms = std::sqrt(resid2 / std::max(data2, 1e-300));
  if (den < 1e-10 * scale2) fr.flag = "rotation weakly constrained";
  return fr;
}

FitResult fit_misalignment(const WelchResult& spec, const Band& band,
                           double known_phi) {
  const BinSelection sel = select_bins(spec, band);
  // regressors r1 = S_yy, r2 = -S_xx; model S_xy = a_x r1 + a_y r2
  double g11 = 0.0, g12 = 0.0, g22 = 0.0, b1 = 0.0, b2 = 0.0, data2 = 0.0;
  for (std::size_t k : sel.idx) {
    const double r1 = spec.s_yy[k];
    const double r2 = -spec.s_xx[k];
    g11 += r1 * r1;
    g12 += r1 * r2;
    g22 += r2 * r2;
    b1 += r1 * spec.s_xy[k];
    b2 += r2 * spec.s_xy[k];
    data2 += spec.s_xy[k] * spec.s_xy[k];
  }
  const double corr = g12 / std::sqrt(std::max(g11 * g22, 1e-300));
  if (std::abs(corr) > 0.999)
    throw EstimateError(
        "estimate: misalignment fit ill-conditioned, auto-spectra nearly "
        "proportional over the band");
  const double det = g11 * g22 - g12 * g12;
  const double a_x = (g22 * b1 - g12 * b2) / det;
  const double a_y = (g11 * b2 - g12 * b1) / det;

  double resid2 = 0.0;
  for (std::size_t k : sel.idx) {
    const double m = a_x * spec.s_yy[k] - a_y * spec.s_xx[k];
    const double r = spec.s_xy[k] - m;
    resid2 += r * r;
  }
  FitResult fr;
  fr.estimates["a_x"] = a_x;
  fr.estimates["a_y"] = a_y;
  fr.estimates["beta_err_x"] = a_x - known_phi;
  fr.estimates["beta_err_y"] = a_y - known_phi;
  fr.n_points = sel.idx.size();
  fr.residual_rms = std::sqrt(resid2 / std::max(data2, 1e-300));
  return fr;
}

FitResult fit_orientation(const WelchResult& spec,
                          const model::SystemParams& p, const Band& band,
                          double beta2_max) {
  if (spec.n_segments == 0)
    throw EstimateError("estimate: orientation fit needs averaged spectra");
  if (!(beta2_max > 0.0))
    throw EstimateError("estimate: beta2_max must be positive");
  const BinSelection sel = select_bins(spec, band);
  const double n_avg = static_cast<double>(spec.n_segments);

  const std::size_t nb = sel.idx.size();
  std::vector<double> w(nb), dxx(nb), dyy(nb), dxy(nb);
  std::vector<double> var_xx(nb), var_yy(nb), var_xy(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t k = sel.idx[i];
    w[i] = spec.omega[k];
    dxx[i] = spec.s_xx[k];
    dyy[i] = spec.s_yy[k];
    dxy[i] = spec.s_xy[k];
    var_xx[i] = dxx[i] * dxx[i] / n_avg;
    var_yy[i] = dyy[i] * dyy[i] / n_avg;
    var_xy[i] = (dxx[i] * dyy[i] + dxy[i] * dxy[i]) / (2.0 * n_avg);
  }

  auto chi2 = [&](double psi, double beta2) {
    model::DirectedForce f = model::make_directed_force(psi, beta2, p.gamma);
    double acc = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      const spectra::SpectrumPoint m =
          spectra::coupled_welch_equivalent(p, f, w[i]);
      const double rx = dxx[i] - m.s_xx;
      const double ry = dyy[i] - m.s_yy;
      const double rc = dxy[i] - m.s_xy;
      acc += rx * rx / var_xx[i] + ry * ry / var_yy[i] + rc * rc / var_xy[i];
    }
    return acc;
  };

  const int n_psi = 48, n_beta = 20;
  const double dpsi = constants::pi / n_psi;
  const double dbeta = beta2_max / n_beta;
  double best_psi = 0.0, best_beta = dbeta, best_chi = 0.0;
  bool first = true;
  for (int j = 1; j <= n_beta; ++j) {
    const double b = dbeta * j;
    for (int i = 0; i < n_psi; ++i) {
      const double ps = dpsi * i;
      const double c = chi2(ps, b);
      if (first || c < best_chi) {
        first = false;
        best_chi = c;
        best_psi = ps;
        best_beta = b;
      }
    }
  }

  // coordinate-wise parabolic refinement
  double h_psi = dpsi, h_beta = dbeta;
  for (int iter = 0; iter < 6; ++iter) {
    {
      const double c0 = chi2(best_psi - h_psi, best_beta);
      const double c1 = best_chi;
      const double c2 = chi2(best_psi + h_psi, best_beta);
      const double denom = c0 - 2.0 * c1 + c2;
      double cand = best_psi;
      if (denom > 0.0) cand = best_psi + 0.5 * h_psi * (c0 - c2) / denom;
      const double cc = chi2(cand, best_beta);
      if (cc < best_chi) {
        best_chi = cc;
        best_psi = cand;
      } else if (c0 < best_chi) {
        best_chi = c0;
        best_psi -= h_psi;
      } else if (c2 < best_chi) {
        best_chi = c2;
        best_psi += h_psi;
      }
    }
    {
      const double lo = std::max(1e-6, best_beta - h_beta);
      const double hi = std::min(1.2 * beta2_max, best_beta + h_beta);
      const double c0 = chi2(best_psi, lo);
      const double c1 = best_chi;
      const double c2 = chi2(best_psi, hi);
      const double denom = c0 - 2.0 * c1 + c2;
      double cand = best_beta;
      if (denom > 0.0)
        cand = best_beta + 0.5 * h_beta * (c0 - c2) / denom;
      cand = std::clamp(cand, 1e-6, 1.2 * beta2_max);
      const double cc = chi2(best_psi, cand);
      if (cc < best_chi) {
        best_chi = cc;
        best_beta = cand;
      } else if (c0 < best_chi) {
        best_chi = c0;
        best_beta = lo;
      } else if (c2 < best_chi) {
        best_chi = c2;
        best_beta = hi;
      }
    }
    h_psi *= 0.5;
    h_beta *= 0.5;
  }

  best_psi = std::fmod(best_psi, constants::pi);
  if (best_psi < 0.0) best_psi += constants::pi;

  // flatness of the objective along psi at the fitted strength: when the
  // directed component is absent the orientation carries no information
  double flat_min = 0.0, flat_max = 0.0;
  for (int i = 0; i < n_psi; ++i) {
    const double c = chi2(dpsi * i, best_beta);
    if (i == 0) {
      flat_min = flat_max = c;
    } else {
      flat_min = std::min(flat_min, c);
      flat_max = std::max(flat_max, c);
    }
  }
  const double flat_rel =
      (flat_max - flat_min) / std::max(0.5 * (flat_max + flat_min), 1e-300);

  // norm-relative residual over all three channels
  model::DirectedForce f_best =
      model::make_directed_force(best_psi, best_beta, p.gamma);
  double resid2 = 0.0, data2 = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const spectra::SpectrumPoint m =
        spectra::coupled_welch_equivalent(p, f_best, w[i]);
    resid2 += (dxx[i] - m.s_xx) * (dxx[i] - m.s_xx) +
              (dyy[i] - m.s_yy) * (dyy[i] - m.s_yy) +
              (dxy[i] - m.s_xy) * (dxy[i] - m.s_xy);
    data2 += dxx[i] * dxx[i] + dyy[i] * dyy[i] + dxy[i] * dxy[i];
  }

  FitResult fr;
  fr.estimates["psi"] = best_psi;
  fr.estimates["beta2"] = best_beta;
  fr.n_points = nb;
  fr.residual_rms = std::sqrt(resid2 / std::max(data2, 1e-300));
  if (best_beta <= 2e-6 || flat_rel < 1e-3) fr.flag = "orientation unresolved";
  return fr;
}

} // namespace levixcorr::estimate
