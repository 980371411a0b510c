// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "risnoma/solver_core.hpp"

using namespace risnoma;

namespace {

LogAffineProgram unbounded_box(int dim) {
  LogAffineProgram p;
  p.dim = dim;
  p.objective = Eigen::VectorXd::Zero(dim);
  p.lower = Eigen::VectorXd::Constant(dim, -detail::kInf);
  p.upper = Eigen::VectorXd::Constant(dim, detail::kInf);
  return p;
}

// exact max violation at the returned point
double recheck_violation(const LogAffineProgram& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (const auto& r : p.rows) {
    double lhs = r.coeff.dot(x);
    v = std::max(v, r.sense == RowSense::less_equal ? lhs - r.bound : r.bound - lhs);
  }
  for (const auto& l : p.log_rows) {
    double arg = l.arg_coeff.dot(x) + l.arg_const;
    double rhs = l.rhs_coeff.dot(x) + l.rhs_const;
    v = std::max(v, arg > 0.0 ? rhs - std::log(arg) : detail::kInf);
  }
  for (int i = 0; i < p.dim; ++i) {
    if (std::isfinite(p.lower[i])) v = std::max(v, p.lower[i] - x[i]);
    if (std::isfinite(p.upper[i])) v = std::max(v, x[i] - p.upper[i]);
  }
  return v;
}

// Splitting oracle for caps-only SDPs: alternating projections with dual
// correction (Douglas-Rachford style), independent of the barrier path.
double splitting_sdp_oracle(const Eigen::MatrixXcd& C, int iters = 60000) {
  const int m = static_cast<int>(C.rows());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(m, m) * 0.5;
  Eigen::MatrixXcd B = A, U = Eigen::MatrixXcd::Zero(m, m);
  const double rho = 1.0;
  for (int it = 0; it < iters; ++it) {
    // A-step: argmax <C,A> - rho/2 ||A - B + U||^2 over PSD
    Eigen::MatrixXcd target = B - U + C / rho;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (target + target.adjoint()));
    Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    A = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
    // B-step: project A + U onto diag <= 1
    B = A + U;
    for (int k = 0; k < m; ++k)
      if (B(k, k).real() > 1.0) B(k, k) = cxd(1.0, B(k, k).imag());
    U += A - B;
  }
  return herm_inner(C, B);
}

}  // namespace

TEST_CASE("log-affine: single log row with active box bound") {
  // maximize t s.t. ln(x+1) >= t, 0 <= x <= e-1; optimum t*=1 at x=e-1
  LogAffineProgram p = unbounded_box(2);
  p.objective << 0, 1;
  p.lower[0] = 0.0;
  p.upper[0] = std::exp(1.0) - 1.0;
  LogAffineProgram::LogRow lr;
  lr.arg_coeff = Eigen::Vector2d(1, 0);
  lr.arg_const = 1.0;
  lr.rhs_coeff = Eigen::Vector2d(0, 1);
  p.log_rows.push_back(lr);

  auto out = solve_log_affine(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(out.x[0] == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-6));
  CHECK(recheck_violation(p, out.x) <= 1e-7);
}

TEST_CASE("log-affine: pure LP degenerate case") {
  LogAffineProgram p = unbounded_box(1);
  p.objective << 1;
  LogAffineProgram::AffineRow r;
  r.coeff = Eigen::VectorXd::Ones(1);
  r.bound = 5.0;
  p.rows.push_back(r);

  auto out = solve_log_affine(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.objective == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(recheck_violation(p, out.x) <= 1e-7);
}

TEST_CASE("log-affine: single-cell rate constraint, closed form and bisection") {
  // maximize psi s.t. ln(2q+0.1) >= psi ln2 + ln(0.1), 0<=q<=1; psi*=log2(21)
  LogAffineProgram p = unbounded_box(2);
  p.objective << 0, 1;
  p.lower[0] = 0.0;
  p.upper[0] = 1.0;
  LogAffineProgram::LogRow lr;
  lr.arg_coeff = Eigen::Vector2d(2, 0);
  lr.arg_const = 0.1;
  lr.rhs_coeff = Eigen::Vector2d(0, std::log(2.0));
  lr.rhs_const = std::log(0.1);
  p.log_rows.push_back(lr);

  auto out = solve_log_affine(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  double closed_form = std::log2(21.0);

  // scalar bisection oracle on psi feasibility: best q is always q=1
  double lo = 0.0, hi = 20.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    bool feasible = std::log(2.1) >= mid * std::log(2.0) + std::log(0.1);
    (feasible ? lo : hi) = mid;
  }
  CHECK(lo == doctest::Approx(closed_form).epsilon(1e-12));
  CHECK(out.objective == doctest::Approx(closed_form).epsilon(1e-7));
}

TEST_CASE("log-affine: infeasibility is detected and localized") {
  LogAffineProgram p = unbounded_box(1);
  p.objective << 1;
  LogAffineProgram::AffineRow r1, r2;
  r1.coeff = Eigen::VectorXd::Ones(1);
  r1.bound = 1.0;
  r2.coeff = Eigen::VectorXd::Ones(1);
  r2.bound = 2.0;
  r2.sense = RowSense::greater_equal;
  p.rows = {r1, r2};
  auto out = solve_log_affine(p, 1e-7);
  CHECK(out.status == SolveStatus::infeasible);
  CHECK(out.residuals.worst_row >= 0);
}

TEST_CASE("log-affine: solver determinism") {
  LogAffineProgram p = unbounded_box(2);
  p.objective << 0, 1;
  p.lower[0] = 0.0;
  p.upper[0] = 1.0;
  LogAffineProgram::LogRow lr;
  lr.arg_coeff = Eigen::Vector2d(2, 0);
  lr.arg_const = 0.1;
  lr.rhs_coeff = Eigen::Vector2d(0, std::log(2.0));
  lr.rhs_const = std::log(0.1);
  p.log_rows.push_back(lr);
  auto a = solve_log_affine(p, 1e-7);
  auto b = solve_log_affine(p, 1e-7);
  CHECK(a.status == b.status);
  CHECK(a.objective == b.objective);  // bitwise identical code path
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sdp: identity objective with unit caps") {
  SdpProgram p;
  p.dim = 3;
  p.objective = Eigen::MatrixXcd::Identity(3, 3);
  p.diag_cap = Eigen::VectorXd::Ones(3);
  auto out = solve_sdp(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.objective == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(out.residuals.min_eigenvalue >= -1e-7);
  CHECK((out.A - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("sdp: indefinite diagonal objective") {
  SdpProgram p;
  p.dim = 2;
  p.objective = Eigen::MatrixXcd::Zero(2, 2);
  p.objective(0, 0) = 1.0;
  p.objective(1, 1) = -1.0;
  p.diag_cap = Eigen::VectorXd::Ones(2);
  auto out = solve_sdp(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(out.A(0, 0).real() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.A(1, 1).real() == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("sdp: random Hermitian objective matches splitting oracle") {
  const int m = 4;
  Rng rng(99);
  Eigen::MatrixXcd C(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) C(i, j) = rng.complex_gaussian();
  C = 0.5 * (C + C.adjoint()).eval();

  SdpProgram p;
  p.dim = m;
  p.objective = C;
  p.diag_cap = Eigen::VectorXd::Ones(m);
  auto out = solve_sdp(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);

  double oracle = splitting_sdp_oracle(C);
  CHECK(out.objective == doctest::Approx(oracle).epsilon(2e-6));
  CHECK(out.residuals.min_eigenvalue >= -1e-7);
  CHECK(out.residuals.max_violation <= 1e-7);
}

TEST_CASE("sdp: optimality certificate and determinism") {
  const int m = 5;
  Rng rng(1234);
  Eigen::MatrixXcd C(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) C(i, j) = rng.complex_gaussian();
  C = 0.5 * (C + C.adjoint()).eval();
  SdpProgram p;
  p.dim = m;
  p.objective = C;
  p.diag_cap = Eigen::VectorXd::Ones(m);
  SdpProgram::TraceRow row;  // tr(A) >= 0.3
  row.G = Eigen::MatrixXcd::Identity(m, m);
  row.bound = 0.3;
  row.sense = RowSense::greater_equal;
  p.rows.push_back(row);

  auto a = solve_sdp(p, 1e-7);
  auto b = solve_sdp(p, 1e-7);
  REQUIRE(a.status == SolveStatus::optimal);
  CHECK(a.objective == b.objective);
  CHECK(a.residuals.max_violation <= 1e-7);
  CHECK(a.A.trace().real() >= 0.3 - 1e-7);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(a.A);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-7);
}

TEST_CASE("sdp: log rows over trace-affine forms compose with aux variables") {
  // maximize s s.t. ln(<E00, A> + 0.5) >= s, caps 1 -> s* = ln(1.5)
  SdpProgram p;
  p.dim = 2;
  p.objective = Eigen::MatrixXcd::Zero(2, 2);
  p.diag_cap = Eigen::VectorXd::Ones(2);
  p.aux_dim = 1;
  p.aux_objective = Eigen::VectorXd::Ones(1);
  SdpProgram::LogTraceRow lr;
  lr.arg_G = Eigen::MatrixXcd::Zero(2, 2);
  lr.arg_G(0, 0) = 1.0;
  lr.arg_const = 0.5;
  lr.rhs_aux = Eigen::VectorXd::Ones(1);
  p.log_rows.push_back(lr);
  auto out = solve_sdp(p, 1e-7);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.objective == doctest::Approx(std::log(1.5)).epsilon(1e-7));
}

TEST_CASE("program validation rejects malformed inputs") {
  LogAffineProgram p;
  p.dim = 2;
  p.objective = Eigen::VectorXd::Zero(1);  // wrong size
  p.lower = Eigen::VectorXd::Zero(2);
  p.upper = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(solve_log_affine(p), std::invalid_argument);

  SdpProgram s;
  s.dim = 2;
  s.objective = Eigen::MatrixXcd::Zero(2, 2);
  s.objective(0, 1) = cxd(1.0, 0.0);  // not Hermitian
  CHECK_THROWS_AS(solve_sdp(s), std::invalid_argument);
}
