// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>

#include "risnoma/beamforming.hpp"

namespace risnoma {

struct DriverConfig {
  PowerConfig power;
  BeamConfig beam;
  double outer_tol = 1e-3;  // bits; stop on sum-rate change
  int max_outer = 20;
  bool single_pass = false;   // one power step + one beam step, no outer loop
  bool random_init_beams = false;
  uint64_t init_seed = 0;
};

/// Final state of one alternating optimization run. Rates are always
/// recomputed exactly from (channels, allocation, beams, sic), never from
/// surrogate objectives.
struct Solution {
  Allocation allocation;
  BeamState beams;
  RateReport rates;
  std::vector<double> rate_trace;  // exact sum rate per outer iteration
  SolveStatus status = SolveStatus::optimal;
  int outer_iterations = 0;
  int failed_cell = -1;
  double wall_seconds = 0.0;
};

/// Alternates the power and beam subsolvers to a sum-rate fixed point.
/// Both subsolvers only accept improving iterates, so the trace is
/// nondecreasing up to solver tolerance; the best iterate is returned.
inline Solution optimize(const ChannelRealization& ch, const SicModel& sic,
                         const DriverConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  const int cells = ch.cells;
  Solution sol;

  BeamState beams = BeamState::flat_phases(cells, ch.elements);
  if (cfg.random_init_beams) {
    Rng rng(mix_seed(cfg.init_seed, 0x1B17));
    for (auto& d : beams.reflect)
      for (int k = 0; k < d.size(); ++k)
        d[k] = std::exp(cxd(0.0, rng.uniform(0.0, 2.0 * kPi)));
  }
  Allocation alloc = Allocation::uniform(cells, cfg.power.total_power, 0.25);

  sol.rate_trace.push_back(sum_rate(ch, alloc, beams, sic).sum_rate);
  double best_rate = -1.0;
  double prev_rate = sol.rate_trace.front();
  sol.status = SolveStatus::max_iterations;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    auto [alloc_new, power_report] =
        solve_power(ch, beams, sic, cfg.power, outer > 0 ? &alloc : nullptr);
    if (power_report.status == SolveStatus::infeasible) {
      if (outer == 0) {
        sol.status = SolveStatus::infeasible;
        sol.failed_cell = power_report.failed_cell;
      }
      break;
    }
    // accept only improving allocations (exact rate, same beams)
    if (sum_rate(ch, alloc_new, beams, sic).sum_rate >= prev_rate - 1e-9) alloc = alloc_new;

    auto [beams_new, beam_report] =
        solve_beams(ch, alloc, sic, cfg.beam, cfg.power.min_rate, beams);
    if (beam_report.status == SolveStatus::infeasible) {
      if (outer == 0) {
        sol.status = SolveStatus::infeasible;
        sol.failed_cell = beam_report.failed_cell;
      }
      break;
    }
    beams = beams_new;

    double rate = sum_rate(ch, alloc, beams, sic).sum_rate;
    sol.rate_trace.push_back(rate);
    sol.outer_iterations = outer + 1;
    if (rate > best_rate) {
      best_rate = rate;
      sol.allocation = alloc;
      sol.beams = beams;
    }
    if (cfg.single_pass) {
      sol.status = SolveStatus::optimal;
      break;
    }
    if (std::abs(rate - prev_rate) <= cfg.outer_tol) {
      sol.status = SolveStatus::optimal;
      break;
    }
    prev_rate = rate;
  }

  if (sol.allocation.total_power.size() == 0) {
    sol.allocation = alloc;
    sol.beams = beams;
  }
  sol.rates = sum_rate(ch, sol.allocation, sol.beams, sic);
  sol.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

// ---------------------------------------------------------------------------
// constraint audit

struct ConstraintAudit {
  struct Violation {
    std::string constraint;
    int cell = -1;
    double magnitude = 0.0;
  };
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Re-evaluates every problem constraint exactly at a solution: rate floors,
/// the power budget, unit-modulus reflection entries, and the power-split
/// simplex. Used by every acceptance test.
inline ConstraintAudit verify(const Solution& sol, const ChannelRealization& ch,
                              const SicModel& sic, const DriverConfig& cfg,
                              double tol = 1e-3) {
  ConstraintAudit audit;
  auto add = [&](const std::string& name, int cell, double mag) {
    if (mag > tol) audit.violations.push_back({name, cell, mag});
  };
  RateReport rates = sum_rate(ch, sol.allocation, sol.beams, sic);
  for (int n = 0; n < ch.cells; ++n) {
    add("min_rate_near", n, cfg.power.min_rate - rates.rate_near[n]);
    add("min_rate_far", n, cfg.power.min_rate - rates.rate_far[n]);
    add("power_budget", n, sol.allocation.total_power[n] - cfg.power.total_power);
    add("power_nonneg", n, -sol.allocation.total_power[n]);
    double an = sol.allocation.split_near[n], af = sol.allocation.split_far[n];
    add("split_range", n, std::max({-an, an - 1.0, -af, af - 1.0}));
    add("split_sum", n, std::abs(an + af - 1.0));
    double worst_mod = 0.0;
    for (int k = 0; k < sol.beams.reflect[n].size(); ++k)
      worst_mod = std::max(worst_mod, std::abs(std::abs(sol.beams.reflect[n][k]) - 1.0));
    add("unit_modulus", n, worst_mod);
  }
  return audit;
}

}  // namespace risnoma
