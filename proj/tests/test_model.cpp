#include <doctest.h>

#include <cmath>

#include "levixcorr/constants.hpp"
#include "levixcorr/model.hpp"
#include "test_helpers.hpp"

using namespace levixcorr;
using constants::pi;
using constants::two_pi;
using test_helpers::make_env;
using test_helpers::make_system;

TEST_CASE("thermal occupancy is k_B T / (hbar omega)") {
  // direct formula check
  const double n = model::thermal_occupancy(300.0, two_pi * 125.0e3);
  const double expected =
      constants::k_boltzmann * 300.0 / (constants::hbar * two_pi * 125.0e3);
  CHECK(n == doctest::Approx(expected).epsilon(1e-14));
  // frozen values for the reference modes
  CHECK(n == doctest::Approx(50007885.926626973).epsilon(1e-12));
  CHECK(model::thermal_occupancy(300.0, two_pi * 140.0e3) ==
        doctest::Approx(44649898.14877408).epsilon(1e-12));
  // scaling: halving omega doubles the occupancy
  CHECK(model::thermal_occupancy(300.0, two_pi * 62.5e3) ==
        doctest::Approx(2.0 * n).epsilon(1e-14));
  CHECK_THROWS_AS(model::thermal_occupancy(300.0, 0.0), model::ConfigError);
  CHECK_THROWS_AS(model::thermal_occupancy(-1.0, 1.0), model::ConfigError);
}

TEST_CASE("gas damping rate: frozen values and linearity in pressure") {
  const model::PhysicalEnv env = make_env(1e-4, 0.145);
  const double g = model::gas_damping_rate(env);
  CHECK(g == doctest::Approx(0.97825117911834425).epsilon(1e-12));
  CHECK(model::gas_damping_rate(5e-7 * 100.0, 300.0, 60.1e-9, 1850.0,
                                28.97 * constants::atomic_mass_unit) ==
        doctest::Approx(0.0048912558955917212).epsilon(1e-12));
  // linear in pressure
  CHECK(model::gas_damping_rate(2e-2, env.temperature, env.particle_radius,
                                env.particle_density, env.gas_molecule_mass) ==
        doctest::Approx(2.0 * g).epsilon(1e-14));
  CHECK(model::gas_damping_rate(0.0, 300.0, 60.1e-9, 1850.0, 4.8e-26) == 0.0);
  CHECK_THROWS_AS(model::gas_damping_rate(-1.0, 300.0, 60.1e-9, 1850.0, 4.8e-26),
                  model::ConfigError);
  CHECK_THROWS_AS(model::gas_damping_rate(1.0, 300.0, -1.0, 1850.0, 4.8e-26),
                  model::ConfigError);
}

TEST_CASE("particle mass and zero-point displacement") {
  const model::PhysicalEnv env = make_env(1e-4, 0.145);
  const double m = model::particle_mass(env);
  // (4/3) pi R^3 rho
  const double r = env.particle_radius;
  CHECK(m == doctest::Approx(4.0 / 3.0 * pi * r * r * r * 1850.0)
                 .epsilon(1e-14));
  CHECK(m == doctest::Approx(1.6822237250824487e-18).epsilon(1e-12));
  const double xz = model::zero_point_displacement(m, two_pi * 125.0e3);
  CHECK(xz == doctest::Approx(6.3173692921772921e-12).epsilon(1e-12));
  // scaling sqrt(1/omega)
  CHECK(model::zero_point_displacement(m, 4.0 * two_pi * 125.0e3) ==
        doctest::Approx(0.5 * xz).epsilon(1e-14));
  CHECK_THROWS_AS(model::zero_point_displacement(0.0, 1.0), model::ConfigError);
}

TEST_CASE("trap phase maps offsets modulo half a wavelength") {
  model::PhysicalEnv env = make_env(1e-4, 0.145);
  CHECK(env.trap_phase() == doctest::Approx(0.91106186954103985).epsilon(1e-12));
  CHECK(env.trap_phase() == doctest::Approx(two_pi * 0.145).epsilon(1e-12));
  // intensity node at offset lambda/4: phase pi/2
  env.trap_offset = 0.25 * env.wavelength;
  CHECK(env.trap_phase() == doctest::Approx(pi / 2.0).epsilon(1e-12));
  // periodic with period lambda/2
  env.trap_offset = (0.145 + 0.5) * env.wavelength;
  CHECK(env.trap_phase() == doctest::Approx(two_pi * 0.145).epsilon(1e-9));
  env.wavelength = 0.0;
  CHECK_THROWS_AS(env.trap_phase(), model::ConfigError);
}

TEST_CASE("direct coupling from trap phase") {
  // frozen spot value at phi = pi/4
  const double g = model::direct_coupling_gxy(two_pi * 20e3, two_pi * 20e3,
                                              -two_pi * 176e3, two_pi * 400e3,
                                              pi / 4.0);
  CHECK(g == doctest::Approx(-12464.389247786383).epsilon(1e-12));
  // matches the closed form g_x g_y 2 delta cot^2(phi) / (delta^2 + kappa^2/4)
  const double delta = -two_pi * 176e3;
  const double kappa = two_pi * 400e3;
  const double expect = two_pi * 20e3 * two_pi * 20e3 * 2.0 * delta /
                        (delta * delta + kappa * kappa / 4.0);
  CHECK(g == doctest::Approx(expect).epsilon(1e-14)); // cot^2(pi/4) = 1
  // red detuning gives negative coupling; blue flips the sign
  CHECK(model::direct_coupling_gxy(1e3, 1e3, two_pi * 176e3, kappa, pi / 4.0) ==
        doctest::Approx(-model::direct_coupling_gxy(1e3, 1e3, -two_pi * 176e3,
                                                    kappa, pi / 4.0))
            .epsilon(1e-14));
  // vanishes at the intensity node (phase pi/2)
  CHECK(std::abs(model::direct_coupling_gxy(two_pi * 16e3, two_pi * 15e3,
                                            delta, kappa, pi / 2.0)) < 1e-25);
  // diverges at the antinode
  CHECK_THROWS_AS(
      model::direct_coupling_gxy(1e3, 1e3, delta, kappa, 0.0),
      model::ConfigError);
  CHECK_THROWS_AS(
      model::direct_coupling_gxy(1e3, 1e3, delta, kappa, pi),
      model::ConfigError);
}

TEST_CASE("directed rates split gamma beta2 between the axes") {
  const double gamma = 0.5;
  const double beta2 = 0.25;
  for (double psi : {0.0, 0.3, pi / 4.0, 1.2, pi / 2.0}) {
    const model::DirectedRates r = model::directed_rates(gamma, beta2, psi);
    CHECK(r.gamma_x_corr ==
          doctest::Approx(gamma * beta2 * std::cos(psi) * std::cos(psi))
              .epsilon(1e-14));
    CHECK(r.gamma_y_corr ==
          doctest::Approx(gamma * beta2 * std::sin(psi) * std::sin(psi))
              .epsilon(1e-14));
    // the split always sums to the total directed rate
    CHECK(r.gamma_x_corr + r.gamma_y_corr ==
          doctest::Approx(gamma * beta2).epsilon(1e-14));
  }
  const model::DirectedForce f = model::make_directed_force(0.3, beta2, gamma);
  CHECK(f.psi == 0.3);
  CHECK(f.beta2 == beta2);
  CHECK(f.gamma_x_corr ==
        doctest::Approx(model::directed_rates(gamma, beta2, 0.3).gamma_x_corr)
            .epsilon(1e-14));
  CHECK_THROWS_AS(model::directed_rates(-1.0, 0.1, 0.0), model::ConfigError);
  CHECK_THROWS_AS(model::directed_rates(1.0, -0.1, 0.0), model::ConfigError);
}

TEST_CASE("build_system derives rates and occupancies from the environment") {
  const model::SystemParams p = make_system(1e-4, 0.145);
  CHECK(p.omega_x == doctest::Approx(two_pi * 125.0e3).epsilon(1e-14));
  CHECK(p.omega_y == doctest::Approx(two_pi * 140.0e3).epsilon(1e-14));
  CHECK(p.kappa == doctest::Approx(two_pi * 400.0e3).epsilon(1e-14));
  CHECK(p.delta == doctest::Approx(-two_pi * 176.0e3).epsilon(1e-14));
  CHECK(p.gamma == doctest::Approx(0.97825117911834425).epsilon(1e-12));
  CHECK(p.nbar_x == doctest::Approx(50007885.926626973).epsilon(1e-12));
  CHECK(p.nbar_y == doctest::Approx(44649898.14877408).epsilon(1e-12));
  CHECK(p.g_xy == doctest::Approx(-4499.7345402249839).epsilon(1e-12));

  // overrides win over derived values
  model::SystemOverrides ov;
  ov.g_x = two_pi * 16e3;
  ov.g_y = two_pi * 15e3;
  ov.g_xy = 0.0;
  ov.nbar_x = 123.0;
  const model::SystemParams q = model::build_system(make_env(1e-4, 0.145), ov);
  CHECK(q.g_xy == 0.0);
  CHECK(q.nbar_x == 123.0);
  CHECK(q.nbar_y == doctest::Approx(p.nbar_y).epsilon(1e-14));

  // couplings have no derived default
  model::SystemOverrides missing;
  CHECK_THROWS_WITH_AS(model::build_system(make_env(1e-4, 0.145), missing),
                       "model: optomechanical couplings g_x and g_y must be "
                       "specified",
                       model::ConfigError);
}

TEST_CASE("validate rejects unusable parameter sets") {
  model::SystemParams p = make_system(1e-4, 0.145);
  CHECK_NOTHROW(model::validate(p));

  model::SystemParams bad = p;
  bad.kappa = 0.0;
  CHECK_THROWS_AS(model::validate(bad), model::ConfigError);
  bad = p;
  bad.omega_x = -1.0;
  CHECK_THROWS_AS(model::validate(bad), model::ConfigError);
  bad = p;
  bad.omega_y = bad.omega_x; // degenerate mechanical frequencies
  CHECK_THROWS_WITH_AS(model::validate(bad),
                       "model: degenerate mechanical frequencies are not "
                       "supported",
                       model::ConfigError);
  bad = p;
  bad.gamma = -1e-3;
  CHECK_THROWS_AS(model::validate(bad), model::ConfigError);
  bad = p;
  bad.nbar_x = -1.0;
  CHECK_THROWS_AS(model::validate(bad), model::ConfigError);
  bad = p;
  bad.g_x = std::nan("");
  CHECK_THROWS_AS(model::validate(bad), model::ConfigError);

  model::Misalignment m;
  m.phi = 0.05;
  m.beta_err_x = -0.02;
  CHECK_NOTHROW(model::validate(m));
  m.beta_err_y = 0.35; // outside the small-angle regime
  CHECK_THROWS_AS(model::validate(m), model::ConfigError);
}
