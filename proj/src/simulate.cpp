#include "levixcorr/simulate.hpp"
#include "levixcorr/constants.hpp"
#include "levixcorr/response.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace levixcorr::simulate {

namespace {

Mat6 mat_zero() {
  Mat6 m{};
  return m;
}

Mat6 mat_identity() {
  Mat6 m{};
  for (int i = 0; i < 6; ++i) m[i * 6 + i] = 1.0;
  return m;
}

Mat6 mat_mul(const Mat6& a, const Mat6& b) {
  Mat6 c{};
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k) {
      const double aik = a[i * 6 + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < 6; ++j) c[i * 6 + j] += aik * b[k * 6 + j];
    }
  return c;
}

double norm_inf(const Mat6& a) {
  double best = 0.0;
  for (int i = 0; i < 6; ++i) {
    double row = 0.0;
    for (int j = 0; j < 6; ++j) row += std::abs(a[i * 6 + j]);
    best = std::max(best, row);
  }
  return best;
}

State6 mat_vec(const Mat6& m, const State6& s) {
  State6 r{};
  for (int i = 0; i < 6; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 6; ++j) acc += m[i * 6 + j] * s[j];
    r[i] = acc;
  }
  return r;
}

void check_dt(const model::SystemParams& p, double dt) {
  if (!(dt > 0.0)) throw SimError("simulate: dt must be positive");
  const double w_max = std::max({p.omega_x, p.omega_y, p.kappa,
                                 std::abs(p.delta)});
  if (dt * w_max / constants::two_pi >= 0.1)
    throw SimError("simulate: dt too large, dt*max(omega,kappa)/(2pi) must be < 0.1");
}

} // namespace

Mat6 drift_matrix(const model::SystemParams& p) {
  Mat6 a = mat_zero();
  const double hg = 0.5 * p.gamma;
  const double hk = 0.5 * p.kappa;
  // x, p_x
  a[0 * 6 + 0] = -hg;
  a[0 * 6 + 1] = p.omega_x;
  a[1 * 6 + 0] = -p.omega_x;
  a[1 * 6 + 1] = -hg;
  a[1 * 6 + 2] = 2.0 * p.g_xy;
  a[1 * 6 + 4] = -2.0 * p.g_x;
  // y, p_y
  a[2 * 6 + 2] = -hg;
  a[2 * 6 + 3] = p.omega_y;
  a[3 * 6 + 0] = 2.0 * p.g_xy;
  a[3 * 6 + 2] = -p.omega_y;
  a[3 * 6 + 3] = -hg;
  a[3 * 6 + 4] = -2.0 * p.g_y;
  // u, v
  a[4 * 6 + 4] = -hk;
  a[4 * 6 + 5] = -p.delta;
  a[5 * 6 + 0] = -2.0 * p.g_x;
  a[5 * 6 + 2] = -2.0 * p.g_y;
  a[5 * 6 + 4] = p.delta;
  a[5 * 6 + 5] = -hk;
  return a;
}

Mat6 expm6(const Mat6& a, double scale) {
  Mat6 b = a;
  for (double& v : b) v *= scale;
  // scale so the Taylor series converges quickly, then square back
  int squarings = 0;
  double nrm = norm_inf(b);
  while (nrm > 0.25 && squarings < 60) {
    for (double& v : b) v *= 0.5;
    nrm *= 0.5;
    ++squarings;
  }
  Mat6 sum = mat_identity();
  Mat6 term = mat_identity();
  for (int k = 1; k <= 40; ++k) {
    term = mat_mul(term, b);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (double& v : term) v *= inv_k;
    for (int idx = 0; idx < 36; ++idx) sum[idx] += term[idx];
    if (norm_inf(term) < 1e-19 * std::max(1.0, norm_inf(sum))) break;
  }
  for (int s = 0; s < squarings; ++s) sum = mat_mul(sum, sum);
  return sum;
}

NoiseAmplitudes make_noise_amplitudes(double dt, const model::SystemParams& p,
                                      const model::DirectedForce& force) {
  if (!(dt > 0.0)) throw SimError("simulate: dt must be positive");
  NoiseAmplitudes n;
  const double d_x = p.nbar_x + 0.5;
  const double d_y = p.nbar_y + 0.5;
  n.thermal_x = std::sqrt(2.0 * p.gamma * d_x * dt);
  n.thermal_y = std::sqrt(2.0 * p.gamma * d_y * dt);
  n.directed_x = std::cos(force.psi) *
                 std::sqrt(2.0 * p.gamma * force.beta2 * d_x * dt);
  n.directed_y = std::sin(force.psi) *
                 std::sqrt(2.0 * p.gamma * force.beta2 * d_y * dt);
  n.cavity = std::sqrt(0.5 * p.kappa * dt);
  return n;
}

NoiseStep correlated_noise_step(std::mt19937_64& rng,
                                const NoiseAmplitudes& amps) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double w_x = gauss(rng);
  const double w_y = gauss(rng);
  const double w_c = gauss(rng);
  const double w_u = gauss(rng);
  const double w_v = gauss(rng);
  NoiseStep s;
  s.fx = amps.thermal_x * w_x + amps.directed_x * w_c;
  s.fy = amps.thermal_y * w_y + amps.directed_y * w_c;
  s.fu = amps.cavity * w_u;
  s.fv = amps.cavity * w_v;
  return s;
}

NoiseStep correlated_noise_step(std::mt19937_64& rng, double dt,
                                const model::SystemParams& p,
                                const model::DirectedForce& force) {
  return correlated_noise_step(rng, make_noise_amplitudes(dt, p, force));
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ (0x51a1c9cbULL + stream * 0x9e3779b97f4a7c15ULL)));
}

Trace integrate_trace(const model::SystemParams& p,
                      const model::DirectedForce& force,
                      const SimConfig& cfg) {
  model::validate(p);
  check_dt(p, cfg.dt);
  if (cfg.n_samples == 0) throw SimError("simulate: n_samples must be positive");

  const double g_opt_x = response::optical_damping(p, response::Mode::x);
  const double g_opt_y = response::optical_damping(p, response::Mode::y);
  const double min_rate = std::min({p.gamma + g_opt_x, p.gamma + g_opt_y,
                                    std::abs(p.omega_x - p.omega_y)});
  if (!(min_rate > 0.0))
    throw SimError("simulate: no finite relaxation rate, cannot size the record");
  const double duration = cfg.dt * static_cast<double>(cfg.n_samples);
  const double min_duration = 100.0 * constants::two_pi / min_rate;
  if (duration < min_duration)
    throw SimError("simulate: record too short, need n_samples*dt >= " +
                   std::to_string(min_duration) + " s for converged spectra");

  const Mat6 a = drift_matrix(p);
  const Mat6 e_full = expm6(a, cfg.dt);
  const Mat6 e_half = expm6(a, 0.5 * cfg.dt);
  const NoiseAmplitudes amps = make_noise_amplitudes(cfg.dt, p, force);
  std::mt19937_64 rng = make_rng(cfg.seed);

  // columns of the half-step propagator hit by the noise components
  std::array<double, 6> col_px{}, col_py{}, col_u{}, col_v{};
  for (int i = 0; i < 6; ++i) {
    col_px[i] = e_half[i * 6 + 1];
    col_py[i] = e_half[i * 6 + 3];
    col_u[i] = e_half[i * 6 + 4];
    col_v[i] = e_half[i * 6 + 5];
  }

  double warmup = cfg.warmup_time;
  if (warmup < 0.0)
    warmup = 8.0 / std::min(p.gamma + g_opt_x, p.gamma + g_opt_y);
  const std::size_t warm_steps =
      static_cast<std::size_t>(std::ceil(warmup / cfg.dt));

  Trace tr;
  tr.dt = cfg.dt;
  tr.seed = cfg.seed;
  tr.params_hash = cfg.params_hash;
  tr.x.resize(cfg.n_samples);
  tr.y.resize(cfg.n_samples);

  State6 s{};
  const std::size_t total = warm_steps + cfg.n_samples;
  for (std::size_t k = 0; k < total; ++k) {
    const NoiseStep n = correlated_noise_step(rng, amps);
    State6 next = mat_vec(e_full, s);
    for (int i = 0; i < 6; ++i)
      next[i] += col_px[i] * n.fx + col_py[i] * n.fy + col_u[i] * n.fu +
                 col_v[i] * n.fv;
    s = next;
    if ((k & 0xfffULL) == 0xfffULL) {
      for (int i = 0; i < 6; ++i)
        if (!std::isfinite(s[i]) || std::abs(s[i]) > 1e12)
          throw SimError("simulate: state diverged at step " +
                         std::to_string(k));
    }
    if (k >= warm_steps) {
      tr.x[k - warm_steps] = s[0];
      tr.y[k - warm_steps] = s[2];
    }
  }
  return tr;
}

Trace integrate_deterministic(const model::SystemParams& p,
                              const State6& initial, double dt,
                              std::size_t n_samples) {
  model::validate(p);
  check_dt(p, dt);
  if (n_samples == 0) throw SimError("simulate: n_samples must be positive");
  const Mat6 e_full = expm6(drift_matrix(p), dt);

  Trace tr;
  tr.dt = dt;
  tr.x.resize(n_samples);
  tr.y.resize(n_samples);
  State6 s = initial;
  for (std::size_t k = 0; k < n_samples; ++k) {
    // sample k holds the state at t = k*dt, starting from the initial state
    tr.x[k] = s[0];
    tr.y[k] = s[2];
    s = mat_vec(e_full, s);
  }
  return tr;
}

Trace apply_misalignment(const Trace& t, const model::Misalignment& mis,
                         double imprecision_std, std::uint64_t noise_seed) {
  model::validate(mis);
  if (imprecision_std < 0.0)
    throw SimError("simulate: imprecision noise std must be non-negative");
  const double a_x = mis.phi + mis.beta_err_x;
  const double a_y = mis.phi + mis.beta_err_y;
  Trace out = t;
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    out.x[i] = t.x[i] + a_x * t.y[i];
    out.y[i] = t.y[i] - a_y * t.x[i];
  }
  if (imprecision_std > 0.0) {
    std::mt19937_64 rng = make_rng(noise_seed, 7);
    std::normal_distribution<double> gauss(0.0, imprecision_std);
    for (std::size_t i = 0; i < out.x.size(); ++i) {
      out.x[i] += gauss(rng);
      out.y[i] += gauss(rng);
    }
  }
  return out;
}

namespace {
constexpr char trace_magic[4] = {'L', 'X', 'T', 'R'};
constexpr std::uint32_t trace_version = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
} // namespace

void save_trace(const Trace& t, const std::string& path) {
  if (t.x.size() != t.y.size())
    throw SimError("simulate: trace x/y length mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimError("simulate: cannot open " + path + " for writing");
  out.write(trace_magic, 4);
  write_pod(out, trace_version);
  write_pod(out, t.dt);
  const std::uint64_t n = t.x.size();
  write_pod(out, n);
  write_pod(out, t.seed);
  write_pod(out, t.params_hash);
  for (std::uint64_t i = 0; i < n; ++i) {
    write_pod(out, t.x[i]);
    write_pod(out, t.y[i]);
  }
  if (!out) throw SimError("simulate: write failed for " + path);
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("simulate: cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, trace_magic, 4) != 0)
    throw SimError("simulate: not a trace file (bad magic): " + path);
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != trace_version)
    throw SimError("simulate: unsupported trace version in " + path);
  Trace t;
  std::uint64_t n = 0;
  read_pod(in, t.dt);
  read_pod(in, n);
  read_pod(in, t.seed);
  read_pod(in, t.params_hash);
  t.x.resize(n);
  t.y.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    read_pod(in, t.x[i]);
    read_pod(in, t.y[i]);
  }
  if (!in) throw SimError("simulate: truncated trace file: " + path);
  return t;
}

void export_trace_csv(const Trace& t, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SimError("simulate: cannot open " + path + " for writing");
  out << "t,x,y\n";
  char buf[96];
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n",
                  t.dt * static_cast<double>(i), t.x[i], t.y[i]);
    out << buf;
  }
  if (!out) throw SimError("simulate: write failed for " + path);
}

} // namespace levixcorr::simulate
