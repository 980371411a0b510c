// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "risnoma/detail/barrier.hpp"

namespace risnoma {

enum class SolveStatus { optimal, infeasible, max_iterations, numerical_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

enum class RowSense { less_equal, greater_equal };

struct Residuals {
  double max_violation = 0.0;
  double gap = 0.0;            // duality-gap estimate from the barrier path
  double min_eigenvalue = 0.0; // of the returned matrix block, when present
  int worst_row = -1;          // most violated row when infeasible
};

/// Result of one convex solve: primal point, achieved objective, residual
/// metrics. status == optimal implies every constraint holds within the
/// requested tolerance at the returned point.
struct SolverOutcome {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::MatrixXcd A;
  double objective = 0.0;
  Residuals residuals;
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Program over a real decision vector: linear objective (maximize), affine
// rows, and rows of the form ln(arg) >= rhs with both sides affine.

struct LogAffineProgram {
  int dim = 0;
  Eigen::VectorXd objective;

  struct AffineRow {
    Eigen::VectorXd coeff;
    double bound = 0.0;
    RowSense sense = RowSense::less_equal;
  };
  struct LogRow {
    Eigen::VectorXd arg_coeff;  // ln(arg_coeff'x + arg_const) >= rhs_coeff'x + rhs_const
    double arg_const = 0.0;
    Eigen::VectorXd rhs_coeff;
    double rhs_const = 0.0;
  };

  std::vector<AffineRow> rows;
  std::vector<LogRow> log_rows;
  Eigen::VectorXd lower, upper;  // box bounds, +-inf entries allowed
  Eigen::VectorXd start;         // optional interior start hint

  void validate() const {
    if (dim <= 0) throw std::invalid_argument("LogAffineProgram: dim must be positive");
    if (objective.size() != dim) throw std::invalid_argument("LogAffineProgram: objective size");
    if (lower.size() != dim || upper.size() != dim)
      throw std::invalid_argument("LogAffineProgram: box size");
    for (const auto& r : rows)
      if (r.coeff.size() != dim) throw std::invalid_argument("LogAffineProgram: row size");
    for (const auto& l : log_rows)
      if (l.arg_coeff.size() != dim || l.rhs_coeff.size() != dim)
        throw std::invalid_argument("LogAffineProgram: log row size");
    if (start.size() > 0) {
      if (start.size() != dim) throw std::invalid_argument("LogAffineProgram: start size");
      for (const auto& l : log_rows)
        if (l.arg_coeff.dot(start) + l.arg_const <= 0.0)
          throw std::invalid_argument("LogAffineProgram: log argument not positive at start");
    }
  }
};

// ---------------------------------------------------------------------------
// Linear SDP over a Hermitian PSD matrix with diagonal caps, optionally
// composed with auxiliary scalar variables and log rows over trace-affine
// forms (the epigraph encoding used by the beamforming step).

struct SdpProgram {
  int dim = 0;                    // matrix dimension m
  Eigen::MatrixXcd objective;     // maximize <objective, A> + aux terms + const
  double objective_const = 0.0;
  Eigen::VectorXd diag_cap;       // size m; empty means no caps

  int aux_dim = 0;
  Eigen::VectorXd aux_objective, aux_lower, aux_upper;

  struct TraceRow {
    Eigen::MatrixXcd G;           // Hermitian coefficient (may be empty)
    Eigen::VectorXd aux_coeff;    // may be empty
    double bound = 0.0;
    RowSense sense = RowSense::less_equal;
  };
  struct LogTraceRow {
    Eigen::MatrixXcd arg_G;       // ln(<arg_G,A> + arg_aux'y + arg_const) >=
    Eigen::VectorXd arg_aux;      //    <rhs_G,A> + rhs_aux'y + rhs_const
    double arg_const = 0.0;
    Eigen::MatrixXcd rhs_G;
    Eigen::VectorXd rhs_aux;
    double rhs_const = 0.0;
  };

  std::vector<TraceRow> rows;
  std::vector<LogTraceRow> log_rows;

  Eigen::MatrixXcd start_A;       // optional hints
  Eigen::VectorXd start_aux;

  void validate() const {
    if (dim <= 0) throw std::invalid_argument("SdpProgram: dim must be positive");
    auto check_herm = [&](const Eigen::MatrixXcd& M, const char* what) {
      if (M.size() == 0) return;
      if (M.rows() != dim || M.cols() != dim) throw std::invalid_argument(what);
      if ((M - M.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("SdpProgram: coefficient matrix not Hermitian");
    };
    check_herm(objective, "SdpProgram: objective size");
    for (const auto& r : rows) check_herm(r.G, "SdpProgram: row size");
    for (const auto& l : log_rows) {
      check_herm(l.arg_G, "SdpProgram: log row size");
      check_herm(l.rhs_G, "SdpProgram: log row size");
    }
    if (diag_cap.size() > 0 && diag_cap.size() != dim)
      throw std::invalid_argument("SdpProgram: diag cap size");
  }
};

// ---------------------------------------------------------------------------

namespace detail {

inline SolveStatus map_status(BarrierStatus s) {
  switch (s) {
    case BarrierStatus::optimal: return SolveStatus::optimal;
    case BarrierStatus::infeasible: return SolveStatus::infeasible;
    case BarrierStatus::max_iterations: return SolveStatus::max_iterations;
    default: return SolveStatus::numerical_failure;
  }
}

inline SolverOutcome from_barrier(const BarrierResult& r) {
  SolverOutcome out;
  out.status = map_status(r.status);
  out.x = r.x;
  out.A = r.A;
  out.objective = r.objective;
  out.residuals.max_violation = r.max_violation;
  out.residuals.gap = r.gap;
  out.residuals.min_eigenvalue = r.min_eigenvalue;
  out.residuals.worst_row = r.worst_row;
  out.iterations = r.newton_steps;
  return out;
}

}  // namespace detail

/// Solves a log-affine program to relative objective accuracy tol. Interior
/// iterates keep every returned constraint violation at (numerical) zero.
inline SolverOutcome solve_log_affine(const LogAffineProgram& p, double tol = kSolverTol) {
  p.validate();
  detail::CanonicalProgram c;
  c.nx = p.dim;
  c.cx = p.objective;
  c.lo = p.lower;
  c.hi = p.upper;
  for (const auto& r : p.rows) {
    detail::AffineRow row;
    if (r.sense == RowSense::less_equal) {
      row.ax = r.coeff;
      row.b = r.bound;
    } else {
      row.ax = -r.coeff;
      row.b = -r.bound;
    }
    c.rows.push_back(std::move(row));
  }
  for (const auto& l : p.log_rows) {
    detail::LogRow lr;
    lr.px = l.arg_coeff;
    lr.pc = l.arg_const;
    lr.qx = l.rhs_coeff;
    lr.qc = l.rhs_const;
    c.logs.push_back(std::move(lr));
  }
  detail::BarrierOptions opts;
  opts.tol = tol;
  detail::Point hint;
  if (p.start.size() == p.dim) hint.x = p.start;
  return detail::from_barrier(detail::solve_canonical(c, opts, hint));
}

/// Solves a (possibly log-row composed) SDP to relative objective accuracy
/// tol; the returned matrix is PSD within tol (min eigenvalue >= -tol).
/// economy mode trades certificate rigor for throughput; callers using it
/// must validate the returned point themselves.
inline SolverOutcome solve_sdp(const SdpProgram& p, double tol = kSolverTol,
                               bool economy = false) {
  p.validate();
  detail::CanonicalProgram c;
  c.m = p.dim;
  c.nx = p.aux_dim;
  c.CA = (p.objective.size() > 0) ? p.objective
                                  : Eigen::MatrixXcd::Zero(p.dim, p.dim).eval();
  symmetrize(c.CA);
  c.c0 = p.objective_const;
  if (p.aux_dim > 0) {
    c.cx = (p.aux_objective.size() == p.aux_dim) ? p.aux_objective
                                                 : Eigen::VectorXd::Zero(p.aux_dim).eval();
    c.lo = (p.aux_lower.size() == p.aux_dim)
               ? p.aux_lower
               : Eigen::VectorXd::Constant(p.aux_dim, -detail::kInf).eval();
    c.hi = (p.aux_upper.size() == p.aux_dim)
               ? p.aux_upper
               : Eigen::VectorXd::Constant(p.aux_dim, detail::kInf).eval();
  }
  c.diag_cap = p.diag_cap;
  for (const auto& r : p.rows) {
    detail::AffineRow row;
    double sign = (r.sense == RowSense::less_equal) ? 1.0 : -1.0;
    if (r.G.size() > 0) {
      row.GA = sign * r.G;
      symmetrize(row.GA);
    }
    if (r.aux_coeff.size() > 0) row.ax = sign * r.aux_coeff;
    row.b = sign * r.bound;
    c.rows.push_back(std::move(row));
  }
  for (const auto& l : p.log_rows) {
    detail::LogRow lr;
    if (l.arg_G.size() > 0) { lr.PA = l.arg_G; symmetrize(lr.PA); }
    if (l.arg_aux.size() > 0) lr.px = l.arg_aux;
    lr.pc = l.arg_const;
    if (l.rhs_G.size() > 0) { lr.QA = l.rhs_G; symmetrize(lr.QA); }
    if (l.rhs_aux.size() > 0) lr.qx = l.rhs_aux;
    lr.qc = l.rhs_const;
    c.logs.push_back(std::move(lr));
  }
  detail::BarrierOptions opts;
  opts.tol = tol;
  opts.economy = economy;
  if (economy) opts.t_init = 50.0;  // warm anchors skip the early path
  detail::Point hint;
  if (p.start_A.rows() == p.dim && p.start_A.cols() == p.dim) hint.A = p.start_A;
  if (p.aux_dim > 0 && p.start_aux.size() == p.aux_dim) hint.x = p.start_aux;
  return detail::from_barrier(detail::solve_canonical(c, opts, hint));
}

}  // namespace risnoma
