// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
//
// Batch CLI: scenario configs in, Monte Carlo sweep CSVs out.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "risnoma/experiments.hpp"

namespace {

risnoma::ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(f);

  risnoma::ExperimentConfig cfg;
  for (auto& [key, value] : j.items()) {
    if (key == "scenario") cfg.scenario = value.get<std::string>();
    else if (key == "sweep_var") cfg.sweep_var = value.get<std::string>();
    else if (key == "sweep_values") cfg.sweep_values = value.get<std::vector<double>>();
    else if (key == "cells") cfg.cells_list = value.get<std::vector<int>>();
    else if (key == "r_min") cfg.r_min_list = value.get<std::vector<double>>();
    else if (key == "ris_elements") cfg.ris_elements = value.get<int>();
    else if (key == "p_tot_dbm") cfg.p_tot_dbm = value.get<double>();
    else if (key == "beta") cfg.beta = value.get<double>();
    else if (key == "realizations") cfg.realizations = value.get<int>();
    else if (key == "base_seed") cfg.base_seed = value.get<uint64_t>();
    else if (key == "workers") cfg.workers = value.get<int>();
    else if (key == "max_outer") cfg.max_outer = value.get<int>();
    else if (key == "noise_power") cfg.noise_power = value.get<double>();
    else if (key == "path_loss_exponent") cfg.path_loss_exponent = value.get<double>();
    else if (key == "rician_factor") cfg.rician_factor = value.get<double>();
    else throw std::runtime_error("unknown config key: " + key);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risnoma - multi-cell RIS-NOMA sum-rate optimization experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a batch experiment from a config file");
  std::string config_path, experiment = "sweep", out_path;
  int seed_override = -1, realizations_override = -1, workers_override = -1;
  bool emit_traces = false;
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--experiment", experiment, "convergence | sweep")
      ->check(CLI::IsMember({"convergence", "sweep"}));
  run->add_option("--out", out_path, "output CSV path")->required();
  run->add_option("--seed", seed_override, "override base seed");
  run->add_option("--realizations", realizations_override, "override realization count");
  run->add_option("--workers", workers_override, "override worker count");
  run->add_flag("--emit-traces", emit_traces, "write per-iteration traces alongside the CSV");

  CLI11_PARSE(app, argc, argv);

  risnoma::ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed_override >= 0) cfg.base_seed = static_cast<uint64_t>(seed_override);
    if (realizations_override > 0) cfg.realizations = realizations_override;
    if (workers_override > 0) cfg.workers = workers_override;
    if (emit_traces) cfg.emit_traces = true;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    risnoma::SweepResult result;
    if (experiment == "convergence") {
      result = risnoma::run_convergence(cfg).sweep;
    } else {
      result = risnoma::run_sweep(cfg);
    }
    risnoma::write_csv(result.rows, out_path);
    if (cfg.emit_traces) risnoma::write_traces(result, out_path + ".traces.csv");

    bool any_infeasible = false;
    for (const auto& row : result.rows)
      if (row.status == risnoma::SolveStatus::infeasible) any_infeasible = true;
    std::cout << "wrote " << result.rows.size() << " rows to " << out_path << "\n";
    return any_infeasible ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
