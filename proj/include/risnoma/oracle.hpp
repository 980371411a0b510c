// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "risnoma/rates.hpp"

namespace risnoma {

/// Brute-force search resolutions. Joint enumeration is only tractable at
/// desk scale; the caps below are enforced by the oracles.
struct GridSpec {
  int power_points = 200;  // per power axis, endpoints included
  int phase_levels = 64;   // L uniformly spaced phases per element

  void validate() const {
    if (power_points < 2) throw std::invalid_argument("grid: power_points must be >= 2");
    if (phase_levels < 4) throw std::invalid_argument("grid: phase_levels must be >= 4");
  }
};

struct BrutePowerResult {
  bool feasible_found = false;
  Allocation allocation;
  double rate = 0.0;
};

struct BrutePhaseResult {
  BeamState beams;
  double rate = 0.0;
};

namespace detail_oracle {

/// Exact sum rate from precomputed effective gains, same arithmetic as the
/// rates module at fixed beams.
inline double rate_at(const detail_power::Coefficients& co, const SicModel& sic, double noise,
                      const Eigen::VectorXd& qn, const Eigen::VectorXd& qf, double min_rate,
                      bool* feasible) {
  const int cells = static_cast<int>(qn.size());
  double total = 0.0;
  bool ok = true;
  for (int cell = 0; cell < cells; ++cell) {
    double in = 0.0, jf = 0.0;
    for (int s = 0; s < cells; ++s) {
      if (s == cell) continue;
      in += (qn[s] + qf[s]) * co.cross_near(cell, s);
      jf += (qn[s] + qf[s]) * co.cross_far(cell, s);
    }
    double sn = qn[cell] * co.gain_near[cell] /
                (qf[cell] * co.gain_near[cell] * sic.residual_fraction + in + noise);
    double sf = qf[cell] * co.gain_far[cell] /
                (qn[cell] * co.gain_far[cell] + jf + noise);
    double rn = std::log2(1.0 + sn), rf = std::log2(1.0 + sf);
    if (rn < min_rate || rf < min_rate) ok = false;
    total += rn + rf;
  }
  if (feasible) *feasible = ok;
  return total;
}

}  // namespace detail_oracle

/// Exhaustive power-grid baseline at fixed beams: joint enumeration of the
/// per-user signal powers for up to two cells, per-cell best-response sweeps
/// for three. Rejects rate-floor violations; ties resolve to the first grid
/// point scanned.
inline BrutePowerResult brute_power(const ChannelRealization& ch, const BeamState& beams,
                                    const SicModel& sic, const PowerConfig& cfg,
                                    const GridSpec& grid) {
  grid.validate();
  const int cells = ch.cells;
  if (cells > 3) throw std::invalid_argument("brute_power: cells must be <= 3");
  auto co = detail_power::gather(ch, beams);
  const int res = grid.power_points;
  Eigen::VectorXd levels(res);
  for (int i = 0; i < res; ++i)
    levels[i] = cfg.total_power * static_cast<double>(i) / (res - 1);

  BrutePowerResult out;
  Eigen::VectorXd qn = Eigen::VectorXd::Zero(cells), qf = Eigen::VectorXd::Zero(cells);
  double best = -1.0;

  auto consider = [&](const Eigen::VectorXd& n, const Eigen::VectorXd& f) {
    bool feas = false;
    double r = detail_oracle::rate_at(co, sic, ch.noise_power, n, f, cfg.min_rate, &feas);
    if (feas && r > best) {
      best = r;
      out.feasible_found = true;
      qn = n;
      qf = f;
    }
  };

  if (cells == 1) {
    Eigen::VectorXd n(1), f(1);
    for (int i = 0; i < res; ++i)
      for (int j = 0; j + i < res; ++j) {
        n[0] = levels[i];
        f[0] = levels[j];
        consider(n, f);
      }
  } else if (cells == 2) {
    Eigen::VectorXd n(2), f(2);
    for (int i0 = 0; i0 < res; ++i0)
      for (int j0 = 0; j0 + i0 < res; ++j0)
        for (int i1 = 0; i1 < res; ++i1)
          for (int j1 = 0; j1 + i1 < res; ++j1) {
            n[0] = levels[i0];
            f[0] = levels[j0];
            n[1] = levels[i1];
            f[1] = levels[j1];
            consider(n, f);
          }
  } else {
    // best-response sweep to a fixed point
    Eigen::VectorXd n = Eigen::VectorXd::Constant(cells, 0.25 * cfg.total_power);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(cells, 0.75 * cfg.total_power);
    for (int pass = 0; pass < 20; ++pass) {
      bool changed = false;
      for (int cell = 0; cell < cells; ++cell) {
        double cell_best = -1.0;
        double bi = n[cell], bj = f[cell];
        for (int i = 0; i < res; ++i)
          for (int j = 0; j + i < res; ++j) {
            n[cell] = levels[i];
            f[cell] = levels[j];
            bool feas = false;
            double r =
                detail_oracle::rate_at(co, sic, ch.noise_power, n, f, cfg.min_rate, &feas);
            if (feas && r > cell_best) {
              cell_best = r;
              bi = levels[i];
              bj = levels[j];
            }
          }
        if (bi != n[cell] || bj != f[cell]) changed = true;
        n[cell] = bi;
        f[cell] = bj;
        if (cell_best > best) {
          best = cell_best;
          out.feasible_found = true;
          qn = n;
          qf = f;
        }
      }
      if (!changed) break;
    }
  }

  if (!out.feasible_found) return out;
  out.allocation.total_power = qn + qf;
  out.allocation.split_near.resize(cells);
  out.allocation.split_far.resize(cells);
  for (int c = 0; c < cells; ++c) {
    double p = out.allocation.total_power[c];
    out.allocation.split_near[c] = (p > 0.0) ? qn[c] / p : 0.0;
    out.allocation.split_far[c] = 1.0 - out.allocation.split_near[c];
  }
  // exact recomputation through the rates module
  out.rate = sum_rate(ch, out.allocation, beams, sic).sum_rate;
  return out;
}

/// Exhaustive phase-grid baseline at a fixed allocation. A cell's reflection
/// vector only enters its own users' SINRs, so per-cell enumeration yields
/// the joint grid optimum. Falls back to per-element coordinate sweeps for
/// element counts beyond exhaustive reach.
inline BrutePhaseResult brute_phases(const ChannelRealization& ch, const Allocation& alloc,
                                     const SicModel& sic, const GridSpec& grid) {
  grid.validate();
  const int cells = ch.cells, k = ch.elements;
  const int levels = grid.phase_levels;
  if (k > 8) throw std::invalid_argument("brute_phases: elements must be <= 8");
  BrutePhaseResult out;
  out.beams = BeamState::flat_phases(cells, k);
  SicModel sic_local = sic;

  Eigen::VectorXcd phase(levels);
  for (int l = 0; l < levels; ++l)
    phase[l] = std::exp(cxd(0.0, 2.0 * kPi * l / levels));

  auto cell_rate = [&](int cell) {
    auto [sn, sf] = sinr_pair(ch, alloc, out.beams, sic_local, cell);
    return std::log2(1.0 + sn) + std::log2(1.0 + sf);
  };

  for (int cell = 0; cell < cells; ++cell) {
    if (k <= 2) {
      // exhaustive over levels^k combinations
      Eigen::VectorXcd best_delta = out.beams.reflect[cell];
      double best = -1.0;
      std::vector<int> idx(k, 0);
      while (true) {
        for (int e = 0; e < k; ++e) out.beams.reflect[cell][e] = phase[idx[e]];
        double r = cell_rate(cell);
        if (r > best) {
          best = r;
          best_delta = out.beams.reflect[cell];
        }
        int carry = 0;
        while (carry < k && ++idx[carry] == levels) idx[carry++] = 0;
        if (carry == k) break;
      }
      out.beams.reflect[cell] = best_delta;
    } else {
      // coordinate sweep to a fixed point
      for (int pass = 0; pass < 10; ++pass) {
        bool changed = false;
        for (int e = 0; e < k; ++e) {
          cxd keep = out.beams.reflect[cell][e];
          double best = cell_rate(cell);
          cxd best_phase = keep;
          for (int l = 0; l < levels; ++l) {
            out.beams.reflect[cell][e] = phase[l];
            double r = cell_rate(cell);
            if (r > best) {
              best = r;
              best_phase = phase[l];
            }
          }
          if (best_phase != keep) changed = true;
          out.beams.reflect[cell][e] = best_phase;
        }
        if (!changed) break;
      }
    }
  }
  out.rate = sum_rate(ch, alloc, out.beams, sic).sum_rate;
  return out;
}

}  // namespace risnoma
