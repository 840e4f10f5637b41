// Command-line front end: run scenarios, calibrate from traces, sweep
// parameters. Exit codes: 0 success, 2 configuration/usage error,
// 3 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "levixcorr/model.hpp"
#include "levixcorr/scenario.hpp"
#include "levixcorr/simulate.hpp"

namespace {

using levixcorr::scenario::json;

void emit(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
  if (!out)
    throw levixcorr::model::ConfigError("cli: cannot open " + out_path +
                                        " for writing");
  out << doc.dump(2) << "\n";
  if (!out)
    throw levixcorr::model::ConfigError("cli: write failed for " + out_path);
  std::cout << "wrote " << out_path << "\n";
}

int run_command(const std::string& target, const std::string& out_dir,
                bool seed_given, std::uint64_t seed,
                const std::string& format) {
  json cfg = levixcorr::scenario::load_config(target);
  if (!out_dir.empty()) cfg["output_dir"] = out_dir;
  if (seed_given) cfg["sim"]["base_seed"] = seed;
  const levixcorr::scenario::Scenario s =
      levixcorr::scenario::scenario_from_json(cfg);
  levixcorr::scenario::OutputFormat fmt =
      levixcorr::scenario::OutputFormat::both;
  if (format == "csv") fmt = levixcorr::scenario::OutputFormat::csv;
  if (format == "json") fmt = levixcorr::scenario::OutputFormat::json_only;
  const json summary = levixcorr::scenario::run_scenario(s, fmt);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int calibrate_command(const std::string& traces_dir,
                      const std::string& sim_target,
                      const std::string& out_path) {
  if (traces_dir.empty() == sim_target.empty())
    throw levixcorr::model::ConfigError(
        "cli: give exactly one of --traces or --simulate");

  json result;
  if (!sim_target.empty()) {
    const levixcorr::scenario::Scenario s =
        levixcorr::scenario::load_scenario(sim_target);
    result = levixcorr::scenario::calibrate_simulated(s);
  } else {
    namespace fs = std::filesystem;
    if (!fs::is_directory(traces_dir))
      throw levixcorr::model::ConfigError("cli: not a directory: " + traces_dir);
    std::vector<std::string> trace_files;
    std::vector<std::string> summaries;
    for (const auto& entry : fs::directory_iterator(traces_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.size() > 5 && name.substr(name.size() - 5) == ".lxtr")
        trace_files.push_back(entry.path().string());
      else if (name.size() > 13 &&
               name.substr(name.size() - 13) == "_summary.json")
        summaries.push_back(entry.path().string());
    }
    if (summaries.size() != 1)
      throw levixcorr::model::ConfigError(
          "cli: trace directory must contain exactly one *_summary.json "
          "describing the configuration");
    if (trace_files.empty())
      throw levixcorr::model::ConfigError("cli: no .lxtr traces in " +
                                          traces_dir);
    std::sort(trace_files.begin(), trace_files.end());

    std::ifstream in(summaries.front());
    json summary;
    try {
      summary = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw levixcorr::model::ConfigError(std::string("cli: ") + e.what());
    }
    if (!summary.contains("config"))
      throw levixcorr::model::ConfigError(
          "cli: summary file lacks a config section");
    const levixcorr::scenario::Scenario s =
        levixcorr::scenario::scenario_from_json(summary.at("config"));
    std::vector<levixcorr::simulate::Trace> traces;
    traces.reserve(trace_files.size());
    for (const auto& f : trace_files)
      traces.push_back(levixcorr::simulate::load_trace(f));
    result = levixcorr::scenario::calibrate_from_traces(traces, s);
  }
  emit(result, out_path);
  return 0;
}

int sweep_command(const std::string& target, const std::string& param,
                  const std::string& range, const std::string& out_path) {
  double a = 0.0, b = 0.0;
  unsigned long long n = 0;
  if (std::sscanf(range.c_str(), "%lf:%lf:%llu", &a, &b, &n) != 3 || n == 0)
    throw levixcorr::model::ConfigError(
        "cli: --range must look like start:stop:count with count >= 1");
  const json base = levixcorr::scenario::load_config(target);
  const json result = levixcorr::scenario::sweep_scenario(
      base, param, a, b, static_cast<std::size_t>(n));
  emit(result, out_path);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "levixcorr: analytic and simulated displacement cross-spectra of a "
      "cavity-levitated nanoparticle under an oriented stochastic force"};
  app.require_subcommand(1);

  std::string run_target, run_out, run_format = "both";
  std::uint64_t run_seed = 0;
  CLI::App* run = app.add_subcommand(
      "run", "evaluate a scenario (analytic spectra, optional simulation and "
             "comparison)");
  run->add_option("scenario", run_target,
                  "builtin scenario name or path to a JSON config")
      ->required();
  run->add_option("--out", run_out, "override the output directory");
  CLI::Option* seed_opt =
      run->add_option("--seed", run_seed, "override the base RNG seed");
  run->add_option("--format", run_format, "output format")
      ->check(CLI::IsMember({"csv", "json", "both"}));

  std::string cal_traces, cal_sim, cal_out;
  CLI::App* cal = app.add_subcommand(
      "calibrate",
      "recover rotation, misalignment and force orientation from traces");
  cal->add_option("--traces", cal_traces,
                  "directory with .lxtr traces and their *_summary.json");
  cal->add_option("--simulate", cal_sim,
                  "scenario to simulate and then calibrate");
  cal->add_option("--out", cal_out, "write the calibration report here");

  std::string sw_target, sw_param, sw_range, sw_out;
  CLI::App* sw = app.add_subcommand("sweep", "scan one configuration entry");
  sw->add_option("scenario", sw_target,
                 "builtin scenario name or path to a JSON config")
      ->required();
  sw->add_option("--param", sw_param, "dotted path, e.g. force.psi_deg")
      ->required();
  sw->add_option("--range", sw_range, "start:stop:count")->required();
  sw->add_option("--out", sw_out, "write the sweep report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed())
      return run_command(run_target, run_out, seed_opt->count() > 0, run_seed,
                         run_format);
    if (cal->parsed()) return calibrate_command(cal_traces, cal_sim, cal_out);
    if (sw->parsed()) return sweep_command(sw_target, sw_param, sw_range, sw_out);
  } catch (const levixcorr::model::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
