// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "risnoma/rates.hpp"

namespace risnoma {

/// Iterate of the power-allocation subproblem. The bilinear pair
/// (P_n, split) is carried as per-user signal powers q = P * split, which
/// makes every constraint argument affine; the pair is recovered exactly
/// at the end from q.
struct PowerIterate {
  Eigen::VectorXd power_near, power_far;        // q_i, q_j per cell (watts)
  Eigen::VectorXd rate_aux_near, rate_aux_far;  // auxiliary rate variables (bits)
  Eigen::VectorXd logden_near, logden_far;      // auxiliary log-interference variables
  int iteration = 0;
  double objective = 0.0;                       // sum of rate auxiliaries
};

struct PowerConfig {
  double total_power = 0.1;   // per-BS budget, watts
  double min_rate = 0.0;      // per-user rate floor, bits/s/Hz
  double tol = 1e-5;          // max-abs iterate change stop
  int max_iters = 50;
  // Ablation: freeze cross-cell interference at the anchor instead of
  // keeping it affine in the other cells' powers.
  bool frozen_interference = false;
};

namespace detail_power {

/// Channel coefficients entering the power program: serving effective gains
/// and cross-cell gains, all evaluated at fixed beams.
struct Coefficients {
  Eigen::VectorXd gain_near, gain_far;   // chi per cell
  Eigen::MatrixXd cross_near, cross_far; // [cell][source], zero diagonal
};

inline Coefficients gather(const ChannelRealization& ch, const BeamState& beams) {
  const int n = ch.cells;
  Coefficients c;
  c.gain_near.resize(n);
  c.gain_far.resize(n);
  c.cross_near = Eigen::MatrixXd::Zero(n, n);
  c.cross_far = Eigen::MatrixXd::Zero(n, n);
  for (int cell = 0; cell < n; ++cell) {
    const auto& cc = ch.cell[cell];
    const auto& delta = beams.reflect[cell];
    c.gain_near[cell] =
        effective_gain(cc.near_user.direct[cell], cc.near_user.cascaded.col(cell), delta);
    c.gain_far[cell] =
        effective_gain(cc.far_user.direct[cell], cc.far_user.cascaded.col(cell), delta);
    for (int s = 0; s < n; ++s) {
      if (s == cell) continue;
      c.cross_near(cell, s) =
          effective_gain(cc.near_user.direct[s], cc.near_user.cascaded.col(s), delta);
      c.cross_far(cell, s) =
          effective_gain(cc.far_user.direct[s], cc.far_user.cascaded.col(s), delta);
    }
  }
  return c;
}

struct Layout {
  int cells;
  int q_near(int n) const { return n; }
  int q_far(int n) const { return cells + n; }
  int psi_near(int n) const { return 2 * cells + n; }
  int psi_far(int n) const { return 3 * cells + n; }
  int logden_near(int n) const { return 4 * cells + n; }
  int logden_far(int n) const { return 5 * cells + n; }
  int dim() const { return 6 * cells; }
};

/// Interference-plus-self-noise denominators at a concrete q iterate.
inline void denominators(const Coefficients& co, const SicModel& sic, double noise,
                         const Eigen::VectorXd& qn, const Eigen::VectorXd& qf,
                         Eigen::VectorXd& den_near, Eigen::VectorXd& den_far) {
  const int n = static_cast<int>(qn.size());
  den_near.resize(n);
  den_far.resize(n);
  for (int cell = 0; cell < n; ++cell) {
    double in = 0.0, jf = 0.0;
    for (int s = 0; s < n; ++s) {
      if (s == cell) continue;
      in += (qn[s] + qf[s]) * co.cross_near(cell, s);
      jf += (qn[s] + qf[s]) * co.cross_far(cell, s);
    }
    den_near[cell] = qf[cell] * co.gain_near[cell] * sic.residual_fraction + in + noise;
    den_far[cell] = qn[cell] * co.gain_far[cell] + jf + noise;
  }
}

inline Eigen::VectorXd pack(const PowerIterate& it) {
  const Layout lay{static_cast<int>(it.power_near.size())};
  Eigen::VectorXd x(lay.dim());
  for (int n = 0; n < lay.cells; ++n) {
    x[lay.q_near(n)] = it.power_near[n];
    x[lay.q_far(n)] = it.power_far[n];
    x[lay.psi_near(n)] = it.rate_aux_near[n];
    x[lay.psi_far(n)] = it.rate_aux_far[n];
    x[lay.logden_near(n)] = it.logden_near[n];
    x[lay.logden_far(n)] = it.logden_far[n];
  }
  return x;
}

inline PowerIterate unpack(const Eigen::VectorXd& x, int cells) {
  const Layout lay{cells};
  PowerIterate it;
  it.power_near.resize(cells);
  it.power_far.resize(cells);
  it.rate_aux_near.resize(cells);
  it.rate_aux_far.resize(cells);
  it.logden_near.resize(cells);
  it.logden_far.resize(cells);
  for (int n = 0; n < cells; ++n) {
    it.power_near[n] = x[lay.q_near(n)];
    it.power_far[n] = x[lay.q_far(n)];
    it.rate_aux_near[n] = x[lay.psi_near(n)];
    it.rate_aux_far[n] = x[lay.psi_far(n)];
    it.logden_near[n] = x[lay.logden_near(n)];
    it.logden_far[n] = x[lay.logden_far(n)];
  }
  it.objective = it.rate_aux_near.sum() + it.rate_aux_far.sum();
  return it;
}

}  // namespace detail_power

/// Starting iterate: a fixed 1:3 near/far power split, rate auxiliaries at
/// the true rates and log auxiliaries at the exact denominators, so the
/// first linearization is tight.
inline PowerIterate init_power(const ChannelRealization& ch, const BeamState& beams,
                               const SicModel& sic, const PowerConfig& cfg) {
  const int n = ch.cells;
  PowerIterate it;
  it.power_near = Eigen::VectorXd::Constant(n, 0.25 * cfg.total_power);
  it.power_far = Eigen::VectorXd::Constant(n, 0.75 * cfg.total_power);

  Allocation alloc = Allocation::uniform(n, cfg.total_power, 0.25);
  RateReport rates = sum_rate(ch, alloc, beams, sic);
  it.rate_aux_near = rates.rate_near;
  it.rate_aux_far = rates.rate_far;

  auto co = detail_power::gather(ch, beams);
  Eigen::VectorXd dn, df;
  detail_power::denominators(co, sic, ch.noise_power, it.power_near, it.power_far, dn, df);
  it.logden_near = dn.array().log();
  it.logden_far = df.array().log();
  it.objective = it.rate_aux_near.sum() + it.rate_aux_far.sum();
  return it;
}

/// Inner-approximation program around an anchor iterate. Per cell:
///   ln(den + signal) >= psi ln2 + logden          (log rows, near and far)
///   den(q) <= e^{anchor}(logden - anchor + 1)     (tangent rows)
///   q_near + q_far <= P_tot, q >= 0, psi >= R_min
/// with cross-cell interference affine in all cells' q.
inline LogAffineProgram build_power_program(const ChannelRealization& ch,
                                            const BeamState& beams, const SicModel& sic,
                                            const PowerConfig& cfg,
                                            const PowerIterate& anchor) {
  using detail_power::Layout;
  const int cells = ch.cells;
  const Layout lay{cells};
  const double noise = ch.noise_power;
  auto co = detail_power::gather(ch, beams);

  LogAffineProgram p;
  p.dim = lay.dim();
  p.objective = Eigen::VectorXd::Zero(p.dim);
  p.lower = Eigen::VectorXd::Constant(p.dim, -detail::kInf);
  p.upper = Eigen::VectorXd::Constant(p.dim, detail::kInf);
  for (int n = 0; n < cells; ++n) {
    p.objective[lay.psi_near(n)] = 1.0;
    p.objective[lay.psi_far(n)] = 1.0;
    p.lower[lay.q_near(n)] = 0.0;
    p.upper[lay.q_near(n)] = cfg.total_power;
    p.lower[lay.q_far(n)] = 0.0;
    p.upper[lay.q_far(n)] = cfg.total_power;
    p.lower[lay.psi_near(n)] = cfg.min_rate;
    p.lower[lay.psi_far(n)] = cfg.min_rate;
  }

  Eigen::VectorXd anchor_dn, anchor_df;
  detail_power::denominators(co, sic, noise, anchor.power_near, anchor.power_far, anchor_dn,
                             anchor_df);

  // den(q) coefficient stencils; frozen mode keeps cross terms at the anchor
  auto den_coeffs = [&](int cell, bool near, Eigen::VectorXd& coeff, double& cst) {
    coeff = Eigen::VectorXd::Zero(lay.dim());
    cst = noise;
    if (near) {
      coeff[lay.q_far(cell)] = co.gain_near[cell] * sic.residual_fraction;
    } else {
      coeff[lay.q_near(cell)] = co.gain_far[cell];
    }
    const Eigen::MatrixXd& cross = near ? co.cross_near : co.cross_far;
    for (int s = 0; s < cells; ++s) {
      if (s == cell) continue;
      if (cfg.frozen_interference) {
        cst += (anchor.power_near[s] + anchor.power_far[s]) * cross(cell, s);
      } else {
        coeff[lay.q_near(s)] += cross(cell, s);
        coeff[lay.q_far(s)] += cross(cell, s);
      }
    }
  };

  for (int n = 0; n < cells; ++n) {
    for (bool near : {true, false}) {
      Eigen::VectorXd den;
      double den_cst;
      den_coeffs(n, near, den, den_cst);
      double anchor_log = near ? anchor.logden_near[n] : anchor.logden_far[n];
      double expo = std::exp(anchor_log);
      int logden_idx = near ? lay.logden_near(n) : lay.logden_far(n);
      int psi_idx = near ? lay.psi_near(n) : lay.psi_far(n);
      double gain = near ? co.gain_near[n] : co.gain_far[n];
      int q_idx = near ? lay.q_near(n) : lay.q_far(n);

      // tangent row: den(q) - e^a * logden <= e^a (1 - a) - noise-part
      LogAffineProgram::AffineRow tangent;
      tangent.coeff = den;
      tangent.coeff[logden_idx] -= expo;
      tangent.bound = expo * (1.0 - anchor_log) - den_cst;
      tangent.sense = RowSense::less_equal;
      p.rows.push_back(std::move(tangent));

      // rate row: ln(den + signal) >= psi ln2 + logden
      LogAffineProgram::LogRow rate_row;
      rate_row.arg_coeff = den;
      rate_row.arg_coeff[q_idx] += gain;
      rate_row.arg_const = den_cst;
      rate_row.rhs_coeff = Eigen::VectorXd::Zero(lay.dim());
      rate_row.rhs_coeff[psi_idx] = kLn2;
      rate_row.rhs_coeff[logden_idx] = 1.0;
      rate_row.rhs_const = 0.0;
      p.log_rows.push_back(std::move(rate_row));
    }
    LogAffineProgram::AffineRow budget;
    budget.coeff = Eigen::VectorXd::Zero(lay.dim());
    budget.coeff[lay.q_near(n)] = 1.0;
    budget.coeff[lay.q_far(n)] = 1.0;
    budget.bound = cfg.total_power;
    budget.sense = RowSense::less_equal;
    p.rows.push_back(std::move(budget));
  }
  p.start = detail_power::pack(anchor);
  return p;
}

/// Maps an infeasibility row index reported by the solver to a cell.
inline int power_row_to_cell(int worst_row, int cells) {
  if (worst_row < 0) return -1;
  int affine_rows = 3 * cells;
  if (worst_row < affine_rows) return worst_row / 3;
  int log_idx = worst_row - affine_rows;
  if (log_idx < 2 * cells) return log_idx / 2;
  return -1;
}

/// Iterate built from a concrete allocation: signal powers from the split,
/// rate auxiliaries at the exact rates, log auxiliaries at the exact
/// denominators. Used to resume from an incumbent so the inner ascent
/// guarantee extends across outer iterations.
inline PowerIterate iterate_from_allocation(const ChannelRealization& ch,
                                            const BeamState& beams, const SicModel& sic,
                                            const Allocation& alloc) {
  PowerIterate it;
  it.power_near = alloc.total_power.cwiseProduct(alloc.split_near);
  it.power_far = alloc.total_power.cwiseProduct(alloc.split_far);
  RateReport rates = sum_rate(ch, alloc, beams, sic);
  it.rate_aux_near = rates.rate_near;
  it.rate_aux_far = rates.rate_far;
  auto co = detail_power::gather(ch, beams);
  Eigen::VectorXd dn, df;
  detail_power::denominators(co, sic, ch.noise_power, it.power_near, it.power_far, dn, df);
  it.logden_near = dn.array().log();
  it.logden_far = df.array().log();
  it.objective = it.rate_aux_near.sum() + it.rate_aux_far.sum();
  return it;
}

/// Iterative inner approximation of the power subproblem at fixed beams.
/// Re-anchors the log auxiliaries at the exact denominators of each new
/// iterate; the objective trace is nondecreasing up to solver tolerance.
/// A warm-start allocation replaces the cold initial-point rule when given.
inline std::pair<Allocation, SolveReport> solve_power(const ChannelRealization& ch,
                                                      const BeamState& beams,
                                                      const SicModel& sic,
                                                      const PowerConfig& cfg,
                                                      const Allocation* warm = nullptr) {
  const int cells = ch.cells;
  SolveReport report;
  PowerIterate it = (warm && warm->total_power.size() == cells)
                        ? iterate_from_allocation(ch, beams, sic, *warm)
                        : init_power(ch, beams, sic, cfg);
  report.objective_trace.push_back(it.objective);

  auto co = detail_power::gather(ch, beams);
  Eigen::VectorXd prev = detail_power::pack(it);
  SolveStatus status = SolveStatus::max_iterations;

  for (int outer = 0; outer < cfg.max_iters; ++outer) {
    LogAffineProgram prog = build_power_program(ch, beams, sic, cfg, it);
    SolverOutcome out = solve_log_affine(prog, kSolverTol);
    if (out.status == SolveStatus::infeasible) {
      report.status = SolveStatus::infeasible;
      report.failed_cell = power_row_to_cell(out.residuals.worst_row, cells);
      report.iterations = outer;
      Allocation alloc = Allocation::uniform(cells, cfg.total_power, 0.25);
      report.final_rates = sum_rate(ch, alloc, beams, sic);
      return {alloc, report};
    }
    if (out.status == SolveStatus::numerical_failure) {
      status = SolveStatus::numerical_failure;
      break;
    }
    PowerIterate next = detail_power::unpack(out.x, cells);
    next.iteration = outer + 1;
    // re-anchor the log auxiliaries exactly
    Eigen::VectorXd dn, df;
    detail_power::denominators(co, sic, ch.noise_power, next.power_near, next.power_far, dn, df);
    next.logden_near = dn.array().log();
    next.logden_far = df.array().log();

    report.objective_trace.push_back(next.objective);
    Eigen::VectorXd cur = detail_power::pack(next);
    double change = (cur - prev).cwiseAbs().maxCoeff();
    prev = cur;
    it = std::move(next);
    if (change <= cfg.tol) {
      status = SolveStatus::optimal;
      report.iterations = outer + 1;
      break;
    }
    report.iterations = outer + 1;
  }

  Allocation alloc;
  alloc.total_power = it.power_near + it.power_far;
  alloc.split_near.resize(cells);
  alloc.split_far.resize(cells);
  for (int n = 0; n < cells; ++n) {
    double p = alloc.total_power[n];
    alloc.split_near[n] = (p > 0.0) ? it.power_near[n] / p : 0.0;
    alloc.split_far[n] = 1.0 - alloc.split_near[n];
  }
  report.status = status;
  report.final_rates = sum_rate(ch, alloc, beams, sic);
  return {alloc, report};
}

}  // namespace risnoma
