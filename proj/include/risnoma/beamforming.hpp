// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "risnoma/power_alloc.hpp"

namespace risnoma {

/// Affine functional of a Hermitian matrix: value(A) = constant + <gradient, A>.
struct AffineMatrixFunctional {
  Eigen::MatrixXcd gradient;
  double constant = 0.0;
  double value_at(const Eigen::MatrixXcd& A) const { return constant + herm_inner(gradient, A); }
};

/// Tolerance requested from the per-cell SDP solves. Looser than the global
/// solver default: the surrogate values only need to resolve well below the
/// 1e-4 rank-one residual target, and the lifted programs condition the
/// barrier harder than the scalar power programs do.
inline constexpr double kBeamSdpTol = 1e-6;

/// Internal slack on the surrogate rate floors, orders of magnitude below
/// the 1e-3 audit tolerance. Keeps re-anchored iterates strictly interior:
/// the power step pins users exactly at the floor, and a boundary anchor
/// would force a feasibility phase on every solve.
inline constexpr double kFloorSlack = 2.5e-4;

struct BeamConfig {
  double sca_tol = 1e-3;        // bits; exact-rate change stop for the SCA loop
  int max_sca_iters = 12;
  // Prepend a penalty-free relaxation solve. Pays off from cold rank-one
  // anchors; wasteful when re-entering at a carried surrogate fixed point.
  bool relaxation_warmup = true;
  double penalty_init = 10.0;   // rank-one penalty weight schedule
  double penalty_growth = 10.0;
  double penalty_cap = 1e6;
  double rank1_target = 1e-4;   // trace minus spectral norm at termination
  int randomization_samples = 50;
  double keep_rule_slack = 1e-3;  // bits; extraction may not lose more
};

/// One cell's data for the beam subproblem at a fixed allocation, with
/// cross-cell interference frozen into the effective noise floors.
struct BeamCellProblem {
  Eigen::MatrixXcd lifted_near, lifted_far;  // (K+1)x(K+1) channel blocks
  double gain2_near = 0.0, gain2_far = 0.0;  // |direct gain|^2
  double power = 0.0;
  double split_near = 0.0, split_far = 0.0;
  double noise_floor_near = 0.0, noise_floor_far = 0.0;  // interference + noise
  double residual_fraction = 0.0;
  double min_rate = 0.0;
};

/// Tangent upper bound of the concave map
/// A -> log2(coeff*(tr(G A) + gain2) + floor) at an anchor.
inline AffineMatrixFunctional linearize_log_term(const Eigen::MatrixXcd& G, double gain2,
                                                 double coeff, double floor,
                                                 const Eigen::MatrixXcd& anchor) {
  double arg = coeff * (herm_inner(G, anchor) + gain2) + floor;
  if (!(arg > 0.0)) throw std::domain_error("linearize_log_term: nonpositive argument");
  AffineMatrixFunctional f;
  f.gradient = (coeff / (kLn2 * arg)) * G;
  f.constant = std::log2(arg) - herm_inner(f.gradient, anchor);
  return f;
}

/// Far-user second-log tangent (the DC-linearized term).
inline AffineMatrixFunctional linearize_far_term(const Eigen::MatrixXcd& lifted_far,
                                                 cxd direct_far, double power_split_near,
                                                 double noise_floor,
                                                 const Eigen::MatrixXcd& anchor) {
  return linearize_log_term(lifted_far, std::norm(direct_far), power_split_near, noise_floor,
                            anchor);
}

/// Subgradient lower bound of the spectral norm at an anchor, built from a
/// principal eigenvector with a deterministic phase fix.
inline AffineMatrixFunctional linearize_spectral_norm(const Eigen::MatrixXcd& anchor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(anchor);
  const int m = static_cast<int>(anchor.rows());
  Eigen::VectorXcd u = eig.eigenvectors().col(m - 1);
  int pivot = 0;
  double best = -1.0;
  for (int k = 0; k < m; ++k) {
    if (std::abs(u[k]) > best + 1e-15) { best = std::abs(u[k]); pivot = k; }
  }
  if (best > 0.0) u *= std::conj(u[pivot]) / std::abs(u[pivot]);
  AffineMatrixFunctional f;
  f.gradient = u * u.adjoint();
  f.constant = eig.eigenvalues()[m - 1] - herm_inner(f.gradient, anchor);
  return f;
}

/// SCA surrogate SDP of problem: maximize the two users' surrogate rates
/// minus the rank-one penalty, subject to surrogate rate floors, unit
/// diagonal caps, and A PSD. The concave log terms enter through epigraph
/// auxiliaries bound by log rows.
inline SdpProgram build_beam_sdp(const BeamCellProblem& prob, const ScaPoint& sca_near,
                                 const ScaPoint& sca_far, const Eigen::MatrixXcd& anchor,
                                 double penalty_weight) {
  const int m = static_cast<int>(prob.lifted_near.rows());
  SdpProgram p;
  p.dim = m;
  p.diag_cap = Eigen::VectorXd::Ones(m);
  p.aux_dim = 2;  // epigraphs of the numerator logs, in bits

  AffineMatrixFunctional den_near = linearize_log_term(
      prob.lifted_near, prob.gain2_near, prob.power * prob.split_far * prob.residual_fraction,
      prob.noise_floor_near, anchor);
  AffineMatrixFunctional den_far =
      linearize_far_term(prob.lifted_far, std::sqrt(cxd(prob.gain2_far, 0.0)),
                         prob.power * prob.split_near, prob.noise_floor_far, anchor);
  AffineMatrixFunctional spec = linearize_spectral_norm(anchor);

  p.aux_objective.resize(2);
  p.aux_objective << sca_near.log_slope, sca_far.log_slope;
  p.objective = -sca_near.log_slope * den_near.gradient - sca_far.log_slope * den_far.gradient -
                penalty_weight * (Eigen::MatrixXcd::Identity(m, m) - spec.gradient);
  p.objective_const = sca_near.intercept + sca_far.intercept -
                      sca_near.log_slope * den_near.constant -
                      sca_far.log_slope * den_far.constant + penalty_weight * spec.constant;

  // numerator log rows: ln(c_e (tr(G_e A) + |g_e|^2)) >= s_e ln2
  auto push_log_row = [&](const Eigen::MatrixXcd& G, double gain2, double coeff, int aux) {
    SdpProgram::LogTraceRow row;
    row.arg_G = coeff * G;
    row.arg_const = coeff * gain2;
    row.rhs_aux = Eigen::VectorXd::Zero(2);
    row.rhs_aux[aux] = kLn2;
    p.log_rows.push_back(std::move(row));
  };
  push_log_row(prob.lifted_near, prob.gain2_near, prob.power * prob.split_near, 0);
  push_log_row(prob.lifted_far, prob.gain2_far, prob.power * prob.split_far, 1);

  // surrogate rate floors: zeta_e (s_e - den_e(A)) + omega_e >= min_rate
  auto push_floor = [&](const ScaPoint& sca, const AffineMatrixFunctional& den, int aux) {
    SdpProgram::TraceRow row;
    row.G = sca.log_slope * den.gradient;
    row.aux_coeff = Eigen::VectorXd::Zero(2);
    row.aux_coeff[aux] = -sca.log_slope;
    row.bound = sca.intercept - (prob.min_rate - kFloorSlack) - sca.log_slope * den.constant;
    row.sense = RowSense::less_equal;
    p.rows.push_back(std::move(row));
  };
  push_floor(sca_near, den_near, 0);
  push_floor(sca_far, den_far, 1);

  p.start_A = anchor;
  p.start_aux.resize(2);
  double u_near = prob.power * prob.split_near * (herm_inner(prob.lifted_near, anchor) + prob.gain2_near);
  double u_far = prob.power * prob.split_far * (herm_inner(prob.lifted_far, anchor) + prob.gain2_far);
  p.start_aux << std::log2(std::max(u_near, 1e-300)) - 1e-4,
      std::log2(std::max(u_far, 1e-300)) - 1e-4;
  return p;
}

/// Unit-modulus reflection vector from a lifted solution: principal
/// eigenvector scaled so its reference entry is one, then per-entry phase
/// projection. Zero entries map to phase zero.
inline Eigen::VectorXcd extract_reflection(const Eigen::MatrixXcd& A) {
  const int m = static_cast<int>(A.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(A);
  Eigen::VectorXcd v = eig.eigenvectors().col(m - 1);
  if (std::abs(v[m - 1]) > 1e-9) {
    v /= v[m - 1];
  } else {
    int pivot = 0;
    double best = -1.0;
    for (int k = 0; k < m; ++k)
      if (std::abs(v[k]) > best + 1e-15) { best = std::abs(v[k]); pivot = k; }
    if (best > 0.0) v *= std::conj(v[pivot]) / std::abs(v[pivot]);
  }
  Eigen::VectorXcd delta(m - 1);
  for (int k = 0; k < m - 1; ++k)
    delta[k] = (std::abs(v[k]) > 1e-12) ? v[k] / std::abs(v[k]) : cxd(1.0, 0.0);
  return delta;
}

namespace detail_beam {

inline BeamCellProblem make_problem(const ChannelRealization& ch, const Allocation& alloc,
                                    const BeamState& incoming, const SicModel& sic,
                                    double min_rate, int cell) {
  const auto& c = ch.cell[cell];
  BeamCellProblem prob;
  prob.lifted_near = build_lifted(c.near_user.direct[cell], c.near_user.cascaded.col(cell));
  prob.lifted_far = build_lifted(c.far_user.direct[cell], c.far_user.cascaded.col(cell));
  prob.gain2_near = std::norm(c.near_user.direct[cell]);
  prob.gain2_far = std::norm(c.far_user.direct[cell]);
  prob.power = alloc.total_power[cell];
  prob.split_near = alloc.split_near[cell];
  prob.split_far = alloc.split_far[cell];
  prob.noise_floor_near =
      interference(ch, alloc, incoming, UserKind::near_user, cell) + ch.noise_power;
  prob.noise_floor_far =
      interference(ch, alloc, incoming, UserKind::far_user, cell) + ch.noise_power;
  prob.residual_fraction = sic.residual_fraction;
  prob.min_rate = min_rate;
  return prob;
}

inline std::pair<double, double> cell_sinrs_at(const BeamCellProblem& prob, double gain_near,
                                               double gain_far) {
  double sn = prob.power * prob.split_near * gain_near /
              (prob.power * prob.split_far * gain_near * prob.residual_fraction +
               prob.noise_floor_near);
  double sf = prob.power * prob.split_far * gain_far /
              (prob.power * prob.split_near * gain_far + prob.noise_floor_far);
  return {sn, sf};
}

inline double cell_rate_at_gains(const BeamCellProblem& prob, double gain_near, double gain_far) {
  auto [sn, sf] = cell_sinrs_at(prob, gain_near, gain_far);
  return std::log2(1.0 + sn) + std::log2(1.0 + sf);
}

inline double cell_rate_at_delta(const BeamCellProblem& prob, const ChannelRealization& ch,
                                 int cell, const Eigen::VectorXcd& delta) {
  const auto& c = ch.cell[cell];
  double gn = effective_gain(c.near_user.direct[cell], c.near_user.cascaded.col(cell), delta);
  double gf = effective_gain(c.far_user.direct[cell], c.far_user.cascaded.col(cell), delta);
  return cell_rate_at_gains(prob, gn, gf);
}

inline double rank1_residual(const Eigen::MatrixXcd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(A);
  return A.trace().real() - eig.eigenvalues().maxCoeff();
}

struct CellOutcome {
  Eigen::VectorXcd delta;
  Eigen::MatrixXcd final_A;
  double residual = 0.0;
  int sca_iters = 0;
  bool keep_rule = false;
  SolveStatus status = SolveStatus::optimal;
  std::vector<double> trace;          // SDP optimal surrogate objectives
  std::vector<double> anchor_values;  // same objective evaluated at the anchor
};

inline CellOutcome solve_cell(const ChannelRealization& ch, const Allocation& alloc,
                              const SicModel& sic, const BeamConfig& cfg, double min_rate,
                              const BeamState& incoming, int cell) {
  CellOutcome out;
  BeamCellProblem prob = make_problem(ch, alloc, incoming, sic, min_rate, cell);
  const Eigen::VectorXcd& delta_in = incoming.reflect[cell];
  Eigen::MatrixXcd A = (cell < static_cast<int>(incoming.lifted.size()) &&
                        incoming.lifted[cell].rows() == delta_in.size() + 1)
                           ? incoming.lifted[cell]
                           : lift_reflection(delta_in);

  // The first solve can run the plain relaxation; the penalty would
  // otherwise restrict every iterate to a small rotation of the lifted
  // matrix and the loop would crawl from a cold anchor. The penalty
  // schedule starts after the warm-up.
  double penalty = cfg.relaxation_warmup ? 0.0 : cfg.penalty_init;
  double prev_rate = -detail::kInf;
  bool fallback = false;

  for (int it = 0; it < cfg.max_sca_iters; ++it) {
    out.sca_iters = it + 1;
    double gain_near =
        std::max(herm_inner(prob.lifted_near, A) + prob.gain2_near, 0.0);
    double gain_far = std::max(herm_inner(prob.lifted_far, A) + prob.gain2_far, 0.0);
    auto [sn, sf] = cell_sinrs_at(prob, gain_near, gain_far);
    ScaPoint sca_near = sca_expand(std::max(sn, kSinrFloor));
    ScaPoint sca_far = sca_expand(std::max(sf, kSinrFloor));

    SdpProgram prog = build_beam_sdp(prob, sca_near, sca_far, A, penalty);
    double anchor_value = prog.objective_const + herm_inner(prog.objective, A) +
                          prog.aux_objective[0] * (prog.start_aux[0] + 1e-4) +
                          prog.aux_objective[1] * (prog.start_aux[1] + 1e-4);
    SolverOutcome sol = solve_sdp(prog, kBeamSdpTol, /*economy=*/true);
    if (sol.status == SolveStatus::infeasible) {
      // The surrogate floor can be unattainable at a conservative anchor
      // even though the incumbent vector meets the exact floors; only a
      // floor-violating incumbent makes the cell genuinely infeasible.
      double rate_in = cell_rate_at_delta(prob, ch, cell, delta_in);
      const auto& cc = ch.cell[cell];
      double gn_in =
          effective_gain(cc.near_user.direct[cell], cc.near_user.cascaded.col(cell), delta_in);
      double gf_in =
          effective_gain(cc.far_user.direct[cell], cc.far_user.cascaded.col(cell), delta_in);
      auto [sn_in, sf_in] = cell_sinrs_at(prob, gn_in, gf_in);
      bool incumbent_ok = std::log2(1.0 + sn_in) >= min_rate - 1e-3 &&
                          std::log2(1.0 + sf_in) >= min_rate - 1e-3;
      (void)rate_in;
      if (!incumbent_ok) out.status = SolveStatus::infeasible;
      break;
    }
    if (sol.status == SolveStatus::numerical_failure) {
      out.status = SolveStatus::max_iterations;
      break;
    }
    // Solves run in economy mode, so audit the outcome here: a usable point
    // must not lose real objective against its own anchor.
    if (sol.objective < anchor_value - 1e-2 * std::max(1.0, std::abs(anchor_value))) {
      out.status = SolveStatus::max_iterations;
      break;
    }
    if (sol.status == SolveStatus::max_iterations && sol.objective < anchor_value) {
      out.status = SolveStatus::max_iterations;
      break;
    }
    A = sol.A;
    symmetrize(A);
    out.trace.push_back(sol.objective);
    out.anchor_values.push_back(anchor_value);
    out.residual = rank1_residual(A);

    // settle on the exact cell rate consistent with the lifted iterate; the
    // surrogate optimal value jitters with each re-linearization
    double gn = std::max(herm_inner(prob.lifted_near, A) + prob.gain2_near, 0.0);
    double gf = std::max(herm_inner(prob.lifted_far, A) + prob.gain2_far, 0.0);
    double rate_now = cell_rate_at_gains(prob, gn, gf);
    bool settled = penalty > 0.0 && std::abs(rate_now - prev_rate) <= cfg.sca_tol;
    prev_rate = rate_now;
    if (penalty == 0.0) {
      penalty = cfg.penalty_init;
      continue;
    }
    if (!settled) continue;
    if (out.residual <= cfg.rank1_target) break;
    if (penalty < cfg.penalty_cap) {
      penalty *= cfg.penalty_growth;
      prev_rate = -detail::kInf;
    } else {
      fallback = true;  // penalty exhausted; lean on randomized extraction
      break;
    }
  }
  if (out.status == SolveStatus::infeasible) {
    out.delta = delta_in;
    out.final_A = lift_reflection(out.delta);
    return out;
  }

  // Extraction candidates: principal eigenvector, Gaussian randomization
  // when the lifted iterate is not numerically rank-one, plus the incumbent.
  // Floor satisfaction ranks ahead of rate so an extraction cannot trade a
  // user's rate floor away for sum rate.
  const auto& c = ch.cell[cell];
  auto floors_ok = [&](const Eigen::VectorXcd& delta) {
    double gn = effective_gain(c.near_user.direct[cell], c.near_user.cascaded.col(cell), delta);
    double gf = effective_gain(c.far_user.direct[cell], c.far_user.cascaded.col(cell), delta);
    auto [sn, sf] = cell_sinrs_at(prob, gn, gf);
    return std::log2(1.0 + sn) >= min_rate - 1e-3 && std::log2(1.0 + sf) >= min_rate - 1e-3;
  };
  Eigen::VectorXcd best_delta = extract_reflection(A);
  double best_rate = cell_rate_at_delta(prob, ch, cell, best_delta);
  bool best_ok = floors_ok(best_delta);
  auto offer = [&](const Eigen::VectorXcd& cand) {
    double rate = cell_rate_at_delta(prob, ch, cell, cand);
    bool ok = floors_ok(cand);
    if ((ok && !best_ok) || (ok == best_ok && rate > best_rate)) {
      best_rate = rate;
      best_ok = ok;
      best_delta = cand;
    }
  };
  if (fallback || out.residual > cfg.rank1_target || !best_ok) {
    Eigen::LLT<Eigen::MatrixXcd> llt(
        A + 1e-12 * A.trace().real() * Eigen::MatrixXcd::Identity(A.rows(), A.cols()));
    if (llt.info() == Eigen::Success) {
      Rng rng(mix_seed(0xBEA3F0, static_cast<uint64_t>(cell)));
      const int m = static_cast<int>(A.rows());
      for (int s = 0; s < cfg.randomization_samples; ++s) {
        Eigen::VectorXcd w(m);
        for (int k = 0; k < m; ++k) w[k] = rng.complex_gaussian();
        Eigen::VectorXcd z = llt.matrixL() * w;
        if (std::abs(z[m - 1]) < 1e-12) continue;
        z /= z[m - 1];
        Eigen::VectorXcd cand(m - 1);
        for (int k = 0; k < m - 1; ++k)
          cand[k] = (std::abs(z[k]) > 1e-12) ? z[k] / std::abs(z[k]) : cxd(1.0, 0.0);
        offer(cand);
      }
    }
  }

  double incoming_rate = cell_rate_at_delta(prob, ch, cell, delta_in);
  bool incoming_ok = floors_ok(delta_in);
  if ((incoming_ok && !best_ok) ||
      (incoming_ok == best_ok && best_rate < incoming_rate - cfg.keep_rule_slack)) {
    out.keep_rule = true;
    best_delta = delta_in;
    best_rate = incoming_rate;
    best_ok = incoming_ok;
    out.final_A = lift_reflection(best_delta);
  } else {
    // carry the terminal lifted iterate: the next solve re-anchors at the
    // surrogate fixed point instead of re-walking from a rank-one lift
    out.final_A = A;
  }
  out.delta = best_delta;

  // rate-floor audit at the kept vector (frozen interference)
  if (!best_ok && out.status == SolveStatus::optimal)
    out.status = SolveStatus::max_iterations;
  return out;
}

}  // namespace detail_beam

/// Per-cell passive-beamforming step at a fixed allocation. Every cell is
/// solved against interference frozen at the incoming beam state; candidate
/// reflection vectors are then accepted in cell order only if the exact
/// system sum rate does not decrease.
inline std::pair<BeamState, SolveReport> solve_beams(const ChannelRealization& ch,
                                                     const Allocation& alloc,
                                                     const SicModel& sic, const BeamConfig& cfg,
                                                     double min_rate,
                                                     const BeamState& incoming) {
  const int cells = ch.cells;
  SolveReport report;
  report.rank1_residuals.resize(cells);
  report.sca_iterations.resize(cells);
  report.keep_rule_fired.resize(cells);

  std::vector<detail_beam::CellOutcome> outcomes(cells);
  for (int n = 0; n < cells; ++n) {
    outcomes[n] = detail_beam::solve_cell(ch, alloc, sic, cfg, min_rate, incoming, n);
    if (outcomes[n].status == SolveStatus::infeasible) {
      report.status = SolveStatus::infeasible;
      report.failed_cell = n;
      report.final_rates = sum_rate(ch, alloc, incoming, sic);
      return {incoming, report};
    }
  }

  BeamState accepted = incoming;
  accepted.lifted.resize(cells);
  for (int n = 0; n < cells; ++n) accepted.lifted[n] = lift_reflection(accepted.reflect[n]);
  RateReport current_rates = sum_rate(ch, alloc, accepted, sic);
  double current = current_rates.sum_rate;
  for (int n = 0; n < cells; ++n) {
    BeamState trial = accepted;
    trial.reflect[n] = outcomes[n].delta;
    trial.lifted[n] = outcomes[n].final_A;
    RateReport trial_rates = sum_rate(ch, alloc, trial, sic);
    // a cell's reflection vector only enters its own users' exact rates, so
    // the floor check is local; never trade a satisfied floor for sum rate
    double floor_near = std::min(min_rate - 1e-3, current_rates.rate_near[n]);
    double floor_far = std::min(min_rate - 1e-3, current_rates.rate_far[n]);
    bool floors_kept =
        trial_rates.rate_near[n] >= floor_near && trial_rates.rate_far[n] >= floor_far;
    if (trial_rates.sum_rate >= current - 1e-12 && floors_kept) {
      accepted = std::move(trial);
      current_rates = std::move(trial_rates);
      current = current_rates.sum_rate;
    } else {
      outcomes[n].keep_rule = true;
    }
    report.rank1_residuals[n] = outcomes[n].residual;
    report.sca_iterations[n] = outcomes[n].sca_iters;
    report.keep_rule_fired[n] = outcomes[n].keep_rule;
    report.iterations = std::max(report.iterations, outcomes[n].sca_iters);
    if (outcomes[n].status != SolveStatus::optimal && report.status == SolveStatus::optimal)
      report.status = outcomes[n].status;
    report.objective_trace.insert(report.objective_trace.end(), outcomes[n].trace.begin(),
                                  outcomes[n].trace.end());
    report.cell_traces.push_back(outcomes[n].trace);
    report.cell_anchor_values.push_back(outcomes[n].anchor_values);
  }
  report.final_rates = sum_rate(ch, alloc, accepted, sic);
  return {accepted, report};
}

}  // namespace risnoma
