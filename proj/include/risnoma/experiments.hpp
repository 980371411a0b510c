// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "risnoma/driver.hpp"
#include "risnoma/oracle.hpp"

namespace risnoma {

/// Batch experiment description. Sweeps are long-format: one solved
/// realization per (sweep value x cell count x rate floor x seed), with
/// matched seeds across scenarios so trend comparisons pair cleanly.
struct ExperimentConfig {
  std::string scenario = "framework1";  // framework1 | framework2 | framework3
  std::string sweep_var = "K";          // iterations | K | P_tot_dBm | beta
  std::vector<double> sweep_values;
  std::vector<int> cells_list = {10};
  std::vector<double> r_min_list = {0.5};
  int ris_elements = 16;
  double p_tot_dbm = 20.0;
  double beta = 0.1;  // applies to framework3 (and to beta sweeps)
  int realizations = 100;
  uint64_t base_seed = 1;
  int workers = 0;  // 0: hardware concurrency
  int max_outer = 15;
  bool emit_traces = false;

  // propagation overrides (defaults match the channel module)
  double noise_power = 0.1;
  double path_loss_exponent = 3.0;
  double rician_factor = 3.0;

  void validate() const {
    if (scenario != "framework1" && scenario != "framework2" && scenario != "framework3")
      throw std::invalid_argument("config: unknown scenario " + scenario);
    if (sweep_var != "iterations" && sweep_var != "K" && sweep_var != "P_tot_dBm" &&
        sweep_var != "beta")
      throw std::invalid_argument("config: unknown sweep_var " + sweep_var);
    if (cells_list.empty() || r_min_list.empty())
      throw std::invalid_argument("config: cells and r_min lists must be nonempty");
    if (realizations < 1) throw std::invalid_argument("config: realizations must be >= 1");
  }
};

struct SweepRow {
  std::string scenario;
  int cells = 0;
  int elements = 0;
  double r_min = 0.0;
  double p_tot_dbm = 0.0;
  double beta = 0.0;
  std::string sweep_var;
  double sweep_value = 0.0;
  uint64_t seed = 0;
  double sum_rate = 0.0;
  int outer_iters = 0;
  SolveStatus status = SolveStatus::optimal;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::vector<double>> traces;  // aligned with rows
};

struct ConvergenceResult {
  SweepResult sweep;
  struct MeanTrace {
    int cells = 0;
    double r_min = 0.0;
    std::vector<double> trace;  // mean exact sum rate per outer iteration
  };
  std::vector<MeanTrace> means;
};

namespace detail_exp {

/// One fully-resolved configuration point.
struct TaskSpec {
  std::string scenario;
  int cells = 0;
  int elements = 0;
  double r_min = 0.0;
  double p_tot_dbm = 0.0;
  double beta = 0.0;
  std::string sweep_var;
  double sweep_value = 0.0;
  uint64_t seed = 0;
  int max_outer = 15;
  double noise_power = 0.1;
  double path_loss_exponent = 3.0;
  double rician_factor = 3.0;
};

struct TaskResult {
  SweepRow row;
  std::vector<double> trace;
};

inline TaskResult run_task(const TaskSpec& task) {
  TopologyConfig topo_cfg;
  topo_cfg.cells = task.cells;
  topo_cfg.ris_elements = task.elements;
  topo_cfg.noise_power = task.noise_power;
  topo_cfg.path_loss_exponent = task.path_loss_exponent;
  topo_cfg.rician_factor = task.rician_factor;
  topo_cfg.seed = task.seed;
  Topology topo = build_topology(topo_cfg);
  ChannelRealization ch = sample_channels(topo, task.seed);
  if (task.scenario == "framework2") ch = zero_near_user_ris(ch);

  SicModel sic;
  sic.residual_fraction = (task.scenario == "framework3") ? task.beta : 0.0;
  if (task.sweep_var == "beta") sic.residual_fraction = task.sweep_value;

  DriverConfig cfg;
  cfg.power.total_power = dbm_to_watt(task.p_tot_dbm);
  cfg.power.min_rate = task.r_min;
  cfg.max_outer = task.max_outer;

  Solution sol = optimize(ch, sic, cfg);

  TaskResult res;
  res.row.scenario = task.scenario;
  res.row.cells = task.cells;
  res.row.elements = task.elements;
  res.row.r_min = task.r_min;
  res.row.p_tot_dbm = task.p_tot_dbm;
  res.row.beta = sic.residual_fraction;
  res.row.sweep_var = task.sweep_var;
  res.row.sweep_value = task.sweep_value;
  res.row.seed = task.seed;
  res.row.sum_rate = (sol.status == SolveStatus::infeasible)
                         ? std::numeric_limits<double>::quiet_NaN()
                         : sol.rates.sum_rate;
  res.row.outer_iters = sol.outer_iterations;
  res.row.status = sol.status;
  res.trace = sol.rate_trace;
  return res;
}

/// Fans tasks over a worker pool; results land in task order regardless of
/// scheduling, keeping output deterministic.
inline std::vector<TaskResult> run_all(const std::vector<TaskSpec>& tasks, int workers) {
  std::vector<TaskResult> results(tasks.size());
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (workers == 1) {
    for (size_t i = 0; i < tasks.size(); ++i) results[i] = run_task(tasks[i]);
    return results;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      results[i] = run_task(tasks[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail_exp

/// Long-format sweep: one optimize run per configuration point and seed.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<detail_exp::TaskSpec> tasks;
  std::vector<double> values = cfg.sweep_values;
  if (values.empty()) values = {static_cast<double>(cfg.ris_elements)};
  for (double value : values)
    for (int cells : cfg.cells_list)
      for (double r_min : cfg.r_min_list)
        for (int r = 0; r < cfg.realizations; ++r) {
          detail_exp::TaskSpec t;
          t.scenario = cfg.scenario;
          t.cells = cells;
          t.elements = cfg.ris_elements;
          t.r_min = r_min;
          t.p_tot_dbm = cfg.p_tot_dbm;
          t.beta = cfg.beta;
          t.sweep_var = cfg.sweep_var;
          t.sweep_value = value;
          t.seed = cfg.base_seed + static_cast<uint64_t>(r);
          t.max_outer = cfg.max_outer;
          t.noise_power = cfg.noise_power;
          t.path_loss_exponent = cfg.path_loss_exponent;
          t.rician_factor = cfg.rician_factor;
          if (cfg.sweep_var == "K") t.elements = static_cast<int>(value);
          if (cfg.sweep_var == "P_tot_dBm") t.p_tot_dbm = value;
          if (cfg.sweep_var == "iterations") t.max_outer = static_cast<int>(value);
          tasks.push_back(std::move(t));
        }
  auto results = detail_exp::run_all(tasks, cfg.workers);
  SweepResult out;
  out.rows.reserve(results.size());
  out.traces.reserve(results.size());
  for (auto& r : results) {
    out.rows.push_back(std::move(r.row));
    out.traces.push_back(std::move(r.trace));
  }
  return out;
}

/// Convergence experiment: fixed iteration budget, per-iteration traces
/// averaged over seeds for each (cell count, rate floor) point. Runs that
/// stop early are padded with their final value.
inline ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentConfig c = cfg;
  c.sweep_var = "iterations";
  if (c.sweep_values.empty()) c.sweep_values = {static_cast<double>(cfg.max_outer)};
  c.sweep_values = {*std::max_element(c.sweep_values.begin(), c.sweep_values.end())};

  ConvergenceResult res;
  res.sweep = run_sweep(c);

  int budget = static_cast<int>(c.sweep_values.front());
  std::map<std::pair<int, double>, std::pair<std::vector<double>, int>> acc;
  for (size_t i = 0; i < res.sweep.rows.size(); ++i) {
    const auto& row = res.sweep.rows[i];
    if (row.status == SolveStatus::infeasible) continue;
    auto& slot = acc[{row.cells, row.r_min}];
    auto& mean = slot.first;
    mean.resize(budget + 1, 0.0);
    const auto& trace = res.sweep.traces[i];
    for (int k = 0; k <= budget; ++k) {
      double v = (k < static_cast<int>(trace.size())) ? trace[k] : trace.back();
      mean[k] += v;
    }
    slot.second += 1;
  }
  for (auto& [key, slot] : acc) {
    ConvergenceResult::MeanTrace m;
    m.cells = key.first;
    m.r_min = key.second;
    m.trace = slot.first;
    for (auto& v : m.trace) v /= std::max(1, slot.second);
    res.means.push_back(std::move(m));
  }
  return res;
}

// ---------------------------------------------------------------------------
// CSV output. The schema and number formatting are stable: decimal '.'
// separator, 9 significant digits, one row per solved realization.

inline constexpr const char* kCsvHeader =
    "scenario,N,K,Rmin,Ptot_dBm,beta,sweep_var,sweep_value,seed,sum_rate_bps_hz,outer_iters,"
    "status";

inline void write_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  f << kCsvHeader << "\n";
  for (const auto& r : rows) {
    f << r.scenario << ',' << r.cells << ',' << r.elements << ','
      << detail_exp::format_g(r.r_min) << ',' << detail_exp::format_g(r.p_tot_dbm) << ','
      << detail_exp::format_g(r.beta) << ',' << r.sweep_var << ','
      << detail_exp::format_g(r.sweep_value) << ',' << r.seed << ','
      << detail_exp::format_g(r.sum_rate) << ',' << r.outer_iters << ','
      << to_string(r.status) << "\n";
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

/// Per-iteration traces alongside a sweep CSV, one row per trace entry.
inline void write_traces(const SweepResult& result, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  f << "scenario,N,K,Rmin,Ptot_dBm,beta,sweep_var,sweep_value,seed,iter,sum_rate_bps_hz\n";
  for (size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    for (size_t k = 0; k < result.traces[i].size(); ++k) {
      f << r.scenario << ',' << r.cells << ',' << r.elements << ','
        << detail_exp::format_g(r.r_min) << ',' << detail_exp::format_g(r.p_tot_dbm) << ','
        << detail_exp::format_g(r.beta) << ',' << r.sweep_var << ','
        << detail_exp::format_g(r.sweep_value) << ',' << r.seed << ',' << k << ','
        << detail_exp::format_g(result.traces[i][k]) << "\n";
    }
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace risnoma
