#pragma once

// Time-domain Langevin simulator for the two mechanical modes coupled to the
// cavity quadratures. State vector s = (x, p_x, y, p_y, u, v) in
// dimensionless quadrature units; thermal and directed noises enter as
// momentum kicks, cavity vacuum noise drives both cavity quadratures.
// Propagation uses the exact drift exponential with mid-step noise
// injection (second-order weak accuracy for the covariance).

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "levixcorr/model.hpp"

namespace levixcorr::simulate {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using State6 = std::array<double, 6>;
using Mat6 = std::array<double, 36>; // row-major 6x6

struct SimConfig {
  double dt = 0.0;            // s
  std::size_t n_samples = 0;  // recorded samples after warmup
  std::uint64_t seed = 1;
  double warmup_time = -1.0;  // s; negative -> 8 / min(gamma + gamma_opt_j)
  std::uint64_t params_hash = 0; // carried into the trace metadata
};

struct Trace {
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t params_hash = 0;
  std::vector<double> x;
  std::vector<double> y;
};

// Drift matrix of the coupled linear system (row-major).
Mat6 drift_matrix(const model::SystemParams& p);

// Matrix exponential of a 6x6 (scaling-and-squaring Taylor series).
Mat6 expm6(const Mat6& a, double scale = 1.0);

// Per-step noise standard deviations (sqrt(dt) folded in).
struct NoiseAmplitudes {
  double thermal_x = 0.0; // independent gas bath kick on p_x
  double thermal_y = 0.0; // independent gas bath kick on p_y
  double directed_x = 0.0; // shared directed drive, x projection
  double directed_y = 0.0; // shared directed drive, y projection
  double cavity = 0.0;     // vacuum noise on each cavity quadrature
};
NoiseAmplitudes make_noise_amplitudes(double dt, const model::SystemParams& p,
                                      const model::DirectedForce& force);

// One sampled noise increment. Draws five standard normals in the fixed
// order w_x, w_y, w_c, w_u, w_v; the shared w_c correlates the two momentum
// kicks according to the drive orientation.
struct NoiseStep {
  double fx = 0.0; // -> p_x
  double fy = 0.0; // -> p_y
  double fu = 0.0; // -> u
  double fv = 0.0; // -> v
};
NoiseStep correlated_noise_step(std::mt19937_64& rng,
                                const NoiseAmplitudes& amps);
// Convenience overload building the amplitudes on the fly.
NoiseStep correlated_noise_step(std::mt19937_64& rng, double dt,
                                const model::SystemParams& p,
                                const model::DirectedForce& force);

// Stream-seeding helper: decorrelates nearby seeds / stream indices.
std::uint64_t splitmix64(std::uint64_t z);
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Stochastic integration. Enforces the step-size guard
// dt * max(omega_x, omega_y, kappa, |delta|) / (2 pi) < 0.1 and, since the
// stochastic drive is always active here, the record-length precondition
// n_samples * dt >= 100 * 2 pi / min(gamma + gamma_opt_x, gamma + gamma_opt_y,
// |omega_x - omega_y|). Throws SimError on divergence (checked every 4096
// steps, step index reported).
Trace integrate_trace(const model::SystemParams& p,
                      const model::DirectedForce& force,
                      const SimConfig& cfg);

// Noise-free relaxation from a given initial state; same drift propagator,
// no warmup, no record-length requirement (only the dt guard applies).
Trace integrate_deterministic(const model::SystemParams& p,
                              const State6& initial, double dt,
                              std::size_t n_samples);

// Project a lab-frame trace onto misaligned detector axes:
// x_det = x + (phi + beta_err_x) y, y_det = y - (phi + beta_err_y) x.
// Optionally adds white detector imprecision noise of the given standard
// deviation per sample to each channel (seeded independently of the
// dynamics).
Trace apply_misalignment(const Trace& t, const model::Misalignment& mis,
                         double imprecision_std = 0.0,
                         std::uint64_t noise_seed = 0);

// Binary trace container ("LXTR" magic, version, dt, length, seed,
// params hash, interleaved x/y doubles, little-endian).
void save_trace(const Trace& t, const std::string& path);
Trace load_trace(const std::string& path);

// CSV export with header t,x,y.
void export_trace_csv(const Trace& t, const std::string& path);

} // namespace levixcorr::simulate
