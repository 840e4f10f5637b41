#pragma once

// Scenario configuration (JSON), builtin parameter sets, and the drivers
// behind the command-line tool: run (analytic spectra, optional simulation
// and comparison), calibrate (parameter recovery from traces), and sweep
// (parameter scans). All serialized outputs carry a hash of the resolved
// configuration so artifacts from different configurations cannot be mixed.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "levixcorr/estimate.hpp"
#include "levixcorr/model.hpp"
#include "levixcorr/simulate.hpp"

namespace levixcorr::scenario {

using json = nlohmann::ordered_json;

enum class RunMode { analytic, simulate, both };

struct SimSettings {
  double dt = 2e-7;                 // s
  std::size_t n_samples = 524288;   // per seed, after warmup
  std::size_t segment_length = 16384;
  std::size_t n_seeds = 8;
  std::uint64_t base_seed = 12345;
  bool save_traces = false;
};

struct Scenario {
  std::string name;
  model::PhysicalEnv env;
  model::SystemParams system;
  model::DirectedForce force;
  model::Misalignment mis;
  std::vector<double> grid; // rad/s
  RunMode mode = RunMode::analytic;
  SimSettings sim;
  std::string output_dir;
  std::string config_hash_hex; // FNV-1a 64 of the canonical config
  std::uint64_t config_hash = 0;
  json canonical; // fully resolved configuration
};

// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

// Builtin parameter sets.
std::vector<std::string> builtin_names();
json builtin_config(const std::string& name);

// Resolve a configuration: defaults + user values, unknown keys rejected
// with JSON-pointer-addressed messages (model::ConfigError).
Scenario scenario_from_json(const json& user);

// Raw configuration by builtin name or JSON file path (parse errors are
// reported with line/column positions).
json load_config(const std::string& name_or_path);

// Accepts a builtin name or a path to a JSON file.
Scenario load_scenario(const std::string& name_or_path);

enum class OutputFormat { csv, json_only, both };

// Execute a scenario: writes the analytic spectra table and report, and in
// simulate/both mode the Welch-averaged simulated spectra, the model
// prediction at the same bins, and the comparison report. Returns the
// summary document (also written to <name>_summary.json).
json run_scenario(const Scenario& s, OutputFormat format = OutputFormat::both);

// Root-mean-square relative deviation between simulated and model spectra
// inside the fit band; refuses reports whose config hashes differ.
json compare_reports(const json& analytic_report, const json& sim_report);

// Parameter recovery. calibrate_simulated generates traces per the scenario,
// applies the configured detector misalignment, and runs the rotation,
// misalignment and orientation fits; calibrate_from_traces runs the same
// fits on stored traces (whose params_hash must match the scenario).
json calibrate_simulated(const Scenario& s);
json calibrate_from_traces(const std::vector<simulate::Trace>& traces,
                           const Scenario& s);

// Scan a numeric configuration entry (dotted path, e.g. "force.psi_deg")
// over n equally spaced values in [a, b]; points are evaluated concurrently.
json sweep_scenario(const json& base_config, const std::string& dotted_param,
                    double a, double b, std::size_t n);

} // namespace levixcorr::scenario
