// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "risnoma/common.hpp"

#ifdef RISNOMA_BARRIER_TRACE
#include <cstdio>
#define RISNOMA_TRACE(...) std::fprintf(stderr, __VA_ARGS__)
#else
#define RISNOMA_TRACE(...) ((void)0)
#endif

namespace risnoma::detail {

// Canonical convex program handled by the barrier engine:
//
//   maximize   cx'x + <CA, A> + c0
//   over       x in R^nx (box lo <= x <= hi), A Hermitian m x m, A >= 0
//   subject to ax_r'x + <GA_r, A> <= b_r                   (affine rows)
//              ln(u_l(z)) >= v_l(z), u/v affine in (x, A)  (log rows)
//              A_kk <= cap_k                               (diagonal caps)
//
// All <.,.> pairings are real Frobenius inner products of Hermitian
// matrices. The engine is a plain primal log-barrier path-following method
// with an exact Newton step; the PSD block is handled natively through the
// log-det barrier whose Hessian inverts in closed form (V -> A V A), so a
// Newton step costs O(q m^3) for q constraint terms instead of O(m^6).

constexpr double kInf = std::numeric_limits<double>::infinity();

struct AffineRow {
  Eigen::VectorXd ax;    // size nx (may be zero-size if nx == 0)
  Eigen::MatrixXcd GA;   // m x m Hermitian (zero-size if m == 0)
  double b = 0.0;
};

struct LogRow {
  Eigen::VectorXd px;    // u(z) = px'x + <PA, A> + pc
  Eigen::MatrixXcd PA;
  double pc = 0.0;
  Eigen::VectorXd qx;    // v(z) = qx'x + <QA, A> + qc
  Eigen::MatrixXcd QA;
  double qc = 0.0;
};

struct CanonicalProgram {
  int nx = 0;
  int m = 0;
  Eigen::VectorXd cx;
  Eigen::MatrixXcd CA;
  double c0 = 0.0;
  Eigen::VectorXd lo, hi;          // size nx, entries may be +-inf
  std::vector<AffineRow> rows;
  std::vector<LogRow> logs;
  Eigen::VectorXd diag_cap;        // size m, or empty for no caps

  bool has_matrix() const { return m > 0; }
  bool has_caps() const { return diag_cap.size() > 0; }
};

enum class BarrierStatus { optimal, infeasible, max_iterations, numerical_failure };

struct BarrierResult {
  BarrierStatus status = BarrierStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::MatrixXcd A;
  double objective = 0.0;
  double gap = 0.0;           // barrier duality-gap estimate at exit
  double max_violation = 0.0; // exact re-evaluation at the returned point
  double min_eigenvalue = 0.0;
  int newton_steps = 0;
  int worst_row = -1;         // most violated row on infeasibility (rows then logs)
};

struct BarrierOptions {
  double tol = 1e-7;          // relative objective accuracy target
  double t_init = 1.0;
  double t_mult = 10.0;
  int max_newton_per_stage = 120;
  int max_total_newton = 4000;
  int max_stages = 120;
  // Early exit once the objective reaches this value (used by phase I).
  double stop_objective = kInf;
  // Skip the extended-precision certificate machinery. Meant for callers
  // that validate solution quality themselves and accept best-effort
  // statuses in exchange for throughput.
  bool economy = false;

  BarrierOptions() = default;
};

struct Point {
  Eigen::VectorXd x;
  Eigen::MatrixXcd A;
};

// ---------------------------------------------------------------------------
// evaluation helpers

struct Slacks {
  Eigen::VectorXd row;     // b - a(z) per affine row
  Eigen::VectorXd log_u;   // u(z)
  Eigen::VectorXd log_w;   // ln(u) - v
  Eigen::VectorXd cap;     // cap_k - A_kk
  bool psd_ok = false;
  bool ok = false;         // everything strictly positive and A > 0
};

inline double affine_value(const CanonicalProgram& p, const AffineRow& r, const Point& z) {
  double val = 0.0;
  if (p.nx > 0 && r.ax.size() > 0) val += r.ax.dot(z.x);
  if (p.has_matrix() && r.GA.size() > 0) val += herm_inner(r.GA, z.A);
  return val;
}

inline double lin_value(const CanonicalProgram& p, const Eigen::VectorXd& vx,
                        const Eigen::MatrixXcd& VA, double vc, const Point& z) {
  double val = vc;
  if (p.nx > 0 && vx.size() > 0) val += vx.dot(z.x);
  if (p.has_matrix() && VA.size() > 0) val += herm_inner(VA, z.A);
  return val;
}

inline Slacks eval_slacks(const CanonicalProgram& p, const Point& z,
                          Eigen::LLT<Eigen::MatrixXcd>* llt_out = nullptr) {
  Slacks s;
  s.row.resize(static_cast<int>(p.rows.size()));
  s.log_u.resize(static_cast<int>(p.logs.size()));
  s.log_w.resize(static_cast<int>(p.logs.size()));
  s.ok = true;
  for (size_t r = 0; r < p.rows.size(); ++r) {
    s.row[static_cast<int>(r)] = p.rows[r].b - affine_value(p, p.rows[r], z);
  }
  for (size_t l = 0; l < p.logs.size(); ++l) {
    const auto& lr = p.logs[l];
    double u = lin_value(p, lr.px, lr.PA, lr.pc, z);
    double v = lin_value(p, lr.qx, lr.QA, lr.qc, z);
    s.log_u[static_cast<int>(l)] = u;
    s.log_w[static_cast<int>(l)] = (u > 0.0) ? std::log(u) - v : -kInf;
  }
  if (p.has_caps()) {
    s.cap.resize(p.m);
    for (int k = 0; k < p.m; ++k) s.cap[k] = p.diag_cap[k] - z.A(k, k).real();
  }
  if (s.row.size() > 0 && s.row.minCoeff() <= 0.0) s.ok = false;
  if (s.log_u.size() > 0 && s.log_u.minCoeff() <= 0.0) s.ok = false;
  if (s.log_w.size() > 0 && s.log_w.minCoeff() <= 0.0) s.ok = false;
  if (s.cap.size() > 0 && s.cap.minCoeff() <= 0.0) s.ok = false;
  for (int i = 0; i < p.nx; ++i) {
    if (std::isfinite(p.lo[i]) && z.x[i] - p.lo[i] <= 0.0) s.ok = false;
    if (std::isfinite(p.hi[i]) && p.hi[i] - z.x[i] <= 0.0) s.ok = false;
  }
  s.psd_ok = true;
  if (p.has_matrix()) {
    Eigen::LLT<Eigen::MatrixXcd> llt(z.A);
    s.psd_ok = (llt.info() == Eigen::Success);
    if (llt_out) *llt_out = llt;
  }
  if (!s.psd_ok) s.ok = false;
  return s;
}

inline double objective_value(const CanonicalProgram& p, const Point& z) {
  double f = p.c0;
  if (p.nx > 0) f += p.cx.dot(z.x);
  if (p.has_matrix()) f += herm_inner(p.CA, z.A);
  return f;
}

// Barrier value, +inf outside the domain.
inline double barrier_value(const CanonicalProgram& p, const Point& z, double t) {
  Slacks s = eval_slacks(p, z);
  if (!s.ok) return kInf;
  double phi = -t * objective_value(p, z);
  for (int r = 0; r < s.row.size(); ++r) phi -= std::log(s.row[r]);
  for (int l = 0; l < s.log_w.size(); ++l)
    phi -= std::log(s.log_w[l]) + std::log(s.log_u[l]);
  for (int k = 0; k < s.cap.size(); ++k) phi -= std::log(s.cap[k]);
  for (int i = 0; i < p.nx; ++i) {
    if (std::isfinite(p.lo[i])) phi -= std::log(z.x[i] - p.lo[i]);
    if (std::isfinite(p.hi[i])) phi -= std::log(p.hi[i] - z.x[i]);
  }
  if (p.has_matrix()) {
    Eigen::LLT<Eigen::MatrixXcd> llt(z.A);
    if (llt.info() != Eigen::Success) return kInf;
    double logdet = 0.0;
    for (int k = 0; k < p.m; ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k).real());
    phi -= logdet;
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Newton step machinery

// One rank-one curvature term kappa * y y' with y split into a scalar part
// and a Hermitian matrix part. Diagonal-cap terms keep only (cap_index).
struct CurvTerm {
  double kappa = 0.0;
  Eigen::VectorXd yx;      // may be empty
  Eigen::MatrixXcd YA;     // may be empty
  int cap_index = -1;      // >= 0: YA is E_kk, stored implicitly
  bool has_x = false, has_A = false;
};

struct NewtonContext {
  // gradient of phi_t
  Eigen::VectorXd gx;
  Eigen::MatrixXcd gA;
  Eigen::MatrixXcd B;      // A^{-1} at the current point
  std::vector<CurvTerm> terms;
  Eigen::VectorXd dbox;    // diagonal x curvature from box bounds
};

inline void accumulate_gradient_terms(const CanonicalProgram& p, const Point& z,
                                      const Slacks& s, double t, NewtonContext& ctx) {
  const int nx = p.nx;
  const bool mat = p.has_matrix();
  ctx.gx = Eigen::VectorXd::Zero(std::max(nx, 0));
  if (nx > 0) ctx.gx = -t * p.cx;
  if (mat) {
    ctx.B = z.A.inverse();
    ctx.gA = -t * p.CA;
    ctx.gA -= ctx.B;  // log-det barrier gradient
  }
  ctx.dbox = Eigen::VectorXd::Zero(std::max(nx, 0));
  ctx.terms.clear();
  ctx.terms.reserve(p.rows.size() + 2 * p.logs.size() + (p.has_caps() ? p.m : 0));

  for (size_t r = 0; r < p.rows.size(); ++r) {
    const auto& row = p.rows[r];
    double inv_s = 1.0 / s.row[static_cast<int>(r)];
    CurvTerm term;
    term.kappa = inv_s * inv_s;
    if (nx > 0 && row.ax.size() > 0) {
      ctx.gx += inv_s * row.ax;
      term.yx = row.ax;
      term.has_x = true;
    }
    if (mat && row.GA.size() > 0) {
      ctx.gA += inv_s * row.GA;
      term.YA = row.GA;
      term.has_A = true;
    }
    ctx.terms.push_back(std::move(term));
  }

  for (size_t l = 0; l < p.logs.size(); ++l) {
    const auto& lr = p.logs[l];
    double u = s.log_u[static_cast<int>(l)];
    double w = s.log_w[static_cast<int>(l)];
    double inv_u = 1.0 / u;
    double inv_w = 1.0 / w;
    // grad w = grad(u)/u - grad(v); barrier -log(w) - log(u)
    CurvTerm tw;  // (1/w^2) grad_w grad_w'
    tw.kappa = inv_w * inv_w;
    CurvTerm tu;  // (1 + 1/w) / u^2 grad_u grad_u'
    tu.kappa = (1.0 + inv_w) * inv_u * inv_u;
    if (nx > 0) {
      Eigen::VectorXd wx = Eigen::VectorXd::Zero(nx);
      if (lr.px.size() > 0) wx += inv_u * lr.px;
      if (lr.qx.size() > 0) wx -= lr.qx;
      ctx.gx += -inv_w * wx;
      if (lr.px.size() > 0) ctx.gx += -inv_u * lr.px;
      if (wx.squaredNorm() > 0) { tw.yx = wx; tw.has_x = true; }
      if (lr.px.size() > 0 && lr.px.squaredNorm() > 0) { tu.yx = lr.px; tu.has_x = true; }
    }
    if (mat) {
      Eigen::MatrixXcd wA = Eigen::MatrixXcd::Zero(p.m, p.m);
      bool any = false;
      if (lr.PA.size() > 0) { wA += inv_u * lr.PA; any = true; }
      if (lr.QA.size() > 0) { wA -= lr.QA; any = true; }
      if (any) {
        ctx.gA += -inv_w * wA;
        tw.YA = wA;
        tw.has_A = true;
      }
      if (lr.PA.size() > 0) {
        ctx.gA += -inv_u * lr.PA;
        tu.YA = lr.PA;
        tu.has_A = true;
      }
    }
    ctx.terms.push_back(std::move(tw));
    ctx.terms.push_back(std::move(tu));
  }

  if (p.has_caps()) {
    for (int k = 0; k < p.m; ++k) {
      double inv_c = 1.0 / s.cap[k];
      ctx.gA(k, k) += cxd(inv_c, 0.0);
      CurvTerm term;
      term.kappa = inv_c * inv_c;
      term.cap_index = k;
      term.has_A = true;
      ctx.terms.push_back(std::move(term));
    }
  }

  for (int i = 0; i < nx; ++i) {
    if (std::isfinite(p.lo[i])) {
      double d = z.x[i] - p.lo[i];
      ctx.gx[i] += -1.0 / d;
      ctx.dbox[i] += 1.0 / (d * d);
    }
    if (std::isfinite(p.hi[i])) {
      double d = p.hi[i] - z.x[i];
      ctx.gx[i] += 1.0 / d;
      ctx.dbox[i] += 1.0 / (d * d);
    }
  }
}

/// Solves H d = r with H = blkdiag(Dbox, L_B) + sum_t kappa_t y_t y_t',
/// where L_B V = A^{-1} V A^{-1} (so L_B^{-1} V = A V A).
///
/// The matrix block is eliminated in closed form through L_B^{-1} and the
/// rank-one terms are kept as multipliers gamma_t = kappa_t (y_t . d),
/// yielding the quasi-definite augmented system
///
///   [ Dbox  U      ] [dx   ]   [ rx    ]
///   [ U'   -(T+K^-1)] [gamma] = [ -betaR]
///
/// with T_ts = <Y_t, A Y_s A>, U(:,t) = yx_t, betaR_t = <Y_t, A RA A>, and
/// dA = A (RA - sum_t gamma_t Y_t) A. Extreme barrier weights enter only
/// through the tiny diagonal K^-1, which keeps the factorization stable
/// where a Schur-complement form cancels catastrophically.
inline bool solve_newton(const CanonicalProgram& p, const Point& z,
                         const NewtonContext& ctx, const Eigen::VectorXd& rx,
                         const Eigen::MatrixXcd& RA, Eigen::VectorXd& dx,
                         Eigen::MatrixXcd& dA) {
  const int nx = p.nx;
  const bool mat = p.has_matrix();
  const int q = static_cast<int>(ctx.terms.size());

  if (!mat) {
    // dense scalar path
    Eigen::MatrixXd H = ctx.dbox.asDiagonal();
    for (const auto& term : ctx.terms)
      if (term.has_x) H.noalias() += term.kappa * term.yx * term.yx.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) return false;
    dx = ldlt.solve(rx);
    dA.resize(0, 0);
    return dx.allFinite();
  }

  const int m = p.m;
  std::vector<Eigen::MatrixXcd> S(q);
  for (int ti = 0; ti < q; ++ti) {
    const auto& term = ctx.terms[ti];
    if (!term.has_A) {
      S[ti].resize(0, 0);
      continue;
    }
    if (term.cap_index >= 0) {
      const auto col = z.A.col(term.cap_index);
      S[ti] = col * col.adjoint();
    } else {
      S[ti] = z.A * term.YA * z.A;
    }
  }
  auto inner_with_Y = [&](int ti, const Eigen::MatrixXcd& V) -> double {
    const auto& term = ctx.terms[ti];
    if (!term.has_A) return 0.0;
    if (term.cap_index >= 0) return V(term.cap_index, term.cap_index).real();
    return herm_inner(term.YA, V);
  };

  Eigen::MatrixXcd R0 = z.A * RA * z.A;
  const int dim = nx + q;
  Eigen::MatrixXd Maug = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (int i = 0; i < nx; ++i) {
    Maug(i, i) = ctx.dbox[i];
    rhs[i] = rx[i];
  }
  for (int ti = 0; ti < q; ++ti) {
    const auto& term = ctx.terms[ti];
    if (term.has_x) {
      for (int i = 0; i < nx; ++i) {
        Maug(i, nx + ti) = term.yx[i];
        Maug(nx + ti, i) = term.yx[i];
      }
    }
    for (int si = 0; si < q; ++si) {
      double tts = (term.has_A && ctx.terms[si].has_A) ? inner_with_Y(ti, S[si]) : 0.0;
      Maug(nx + ti, nx + si) -= tts;
    }
    Maug(nx + ti, nx + ti) -= 1.0 / term.kappa;
    rhs[nx + ti] = -inner_with_Y(ti, R0);
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Maug);
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  dx = sol.head(nx);

  Eigen::MatrixXcd R2 = RA;
  for (int ti = 0; ti < q; ++ti) {
    const auto& term = ctx.terms[ti];
    if (!term.has_A) continue;
    double gamma = sol[nx + ti];
    if (term.cap_index >= 0)
      R2(term.cap_index, term.cap_index) -= gamma;
    else
      R2.noalias() -= gamma * term.YA;
  }
  dA = z.A * R2 * z.A;
  symmetrize(dA);
  (void)m;
  return dA.allFinite();
}

/// Extended-precision augmented solve, used as a rescue when the double
/// solve cannot be certified (near rank-deficient optima the (2,2) block of
/// the augmented system becomes numerically singular).
inline bool solve_newton_extended(const CanonicalProgram& p, const Point& z,
                                  const NewtonContext& ctx, const Eigen::VectorXd& rx,
                                  const Eigen::MatrixXcd& RA, Eigen::VectorXd& dx,
                                  Eigen::MatrixXcd& dA) {
  using cxl = std::complex<long double>;
  using MatL = Eigen::Matrix<cxl, Eigen::Dynamic, Eigen::Dynamic>;
  using MatRL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const int nx = p.nx;
  if (!p.has_matrix()) return false;
  const int q = static_cast<int>(ctx.terms.size());
  MatL Al = z.A.cast<cxl>();

  std::vector<MatL> S(q);
  std::vector<MatL> Yl(q);
  for (int ti = 0; ti < q; ++ti) {
    const auto& term = ctx.terms[ti];
    if (!term.has_A) continue;
    if (term.cap_index >= 0) {
      Yl[ti] = MatL::Zero(p.m, p.m);
      Yl[ti](term.cap_index, term.cap_index) = 1.0L;
    } else {
      Yl[ti] = term.YA.cast<cxl>();
    }
    S[ti] = Al * Yl[ti] * Al;
  }
  auto inner_l = [](const MatL& a, const MatL& b) -> long double {
    return (a.array().conjugate() * b.array()).sum().real();
  };

  MatL R0 = Al * RA.cast<cxl>() * Al;
  const int dim = nx + q;
  MatRL Maug = MatRL::Zero(dim, dim);
  VecL rhs(dim);
  for (int i = 0; i < nx; ++i) {
    Maug(i, i) = static_cast<long double>(ctx.dbox[i]);
    rhs[i] = static_cast<long double>(rx[i]);
  }
  for (int ti = 0; ti < q; ++ti) {
    const auto& term = ctx.terms[ti];
    if (term.has_x) {
      for (int i = 0; i < nx; ++i) {
        Maug(i, nx + ti) = static_cast<long double>(term.yx[i]);
        Maug(nx + ti, i) = static_cast<long double>(term.yx[i]);
      }
    }
    if (term.has_A) {
      for (int si = 0; si < q; ++si)
        if (ctx.terms[si].has_A) Maug(nx + ti, nx + si) -= inner_l(Yl[ti], S[si]);
      rhs[nx + ti] = -inner_l(Yl[ti], R0);
    } else {
      rhs[nx + ti] = 0.0L;
    }
    Maug(nx + ti, nx + ti) -= 1.0L / static_cast<long double>(term.kappa);
  }
  Eigen::PartialPivLU<MatRL> lu(Maug);
  VecL sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  dx.resize(nx);
  for (int i = 0; i < nx; ++i) dx[i] = static_cast<double>(sol[i]);
  MatL R2 = RA.cast<cxl>();
  for (int ti = 0; ti < q; ++ti) {
    if (!ctx.terms[ti].has_A) continue;
    R2 -= sol[nx + ti] * Yl[ti];
  }
  MatL dAl = Al * R2 * Al;
  dA = dAl.cast<cxd>();
  symmetrize(dA);
  return dA.allFinite();
}

/// Audit residual of a Newton direction computed in extended precision.
/// Used when the double-precision audit is ambiguous: at rank-deficient
/// optima the double residual saturates at eps * cond(A)^2 and can no
/// longer distinguish breakdown from an exact solve.
inline void audit_extended(const CanonicalProgram& p, const Point& z,
                           const NewtonContext& ctx, const Eigen::VectorXd& dx,
                           const Eigen::MatrixXcd& dA, const Eigen::VectorXd& rx,
                           const Eigen::MatrixXcd& RA, double& res_out, double& scale_out) {
  using cxl = std::complex<long double>;
  using MatL = Eigen::Matrix<cxl, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const int nx = p.nx;
  const bool mat = p.has_matrix();

  VecL hx = VecL::Zero(std::max(nx, 0));
  MatL hA;
  MatL dAl;
  if (nx > 0) hx = ctx.dbox.cast<long double>().cwiseProduct(dx.cast<long double>());
  if (mat) {
    MatL Al = z.A.cast<cxl>();
    dAl = dA.cast<cxl>();
    MatL Bl = Al.inverse();
    hA = Bl * dAl * Bl;
  }
  for (const auto& term : ctx.terms) {
    long double yd = 0.0L;
    if (term.has_x && nx > 0)
      yd += term.yx.cast<long double>().dot(dx.cast<long double>());
    if (term.has_A) {
      if (term.cap_index >= 0) {
        yd += static_cast<long double>(dA(term.cap_index, term.cap_index).real());
      } else {
        MatL Yl = term.YA.cast<cxl>();
        yd += (Yl.array().conjugate() * dAl.array()).sum().real();
      }
    }
    long double c = static_cast<long double>(term.kappa) * yd;
    if (c == 0.0L) continue;
    if (term.has_x && nx > 0) hx += c * term.yx.cast<long double>();
    if (term.has_A) {
      if (term.cap_index >= 0)
        hA(term.cap_index, term.cap_index) += c;
      else
        hA += c * term.YA.cast<cxl>();
    }
  }
  long double res2 = 0.0L, h2 = 0.0L, r2 = 0.0L;
  if (nx > 0) {
    VecL rxl = rx.cast<long double>();
    res2 += (hx - rxl).squaredNorm();
    h2 += hx.squaredNorm();
    r2 += rxl.squaredNorm();
  }
  if (mat) {
    MatL RAl = RA.cast<cxl>();
    res2 += (hA - RAl).squaredNorm();
    h2 += hA.squaredNorm();
    r2 += RAl.squaredNorm();
  }
  res_out = static_cast<double>(std::sqrt(res2));
  scale_out = static_cast<double>(std::sqrt(h2) + std::sqrt(r2)) + 1e-300;
}

/// Exact Hessian-vector product, used to audit Newton directions: the
/// Woodbury/Schur solve can silently lose accuracy at extreme conditioning.
inline void apply_hessian(const CanonicalProgram& p, const NewtonContext& ctx,
                          const Eigen::VectorXd& dx, const Eigen::MatrixXcd& dA,
                          Eigen::VectorXd& hx, Eigen::MatrixXcd& hA) {
  if (p.nx > 0) hx = ctx.dbox.cwiseProduct(dx);
  if (p.has_matrix()) hA = ctx.B * dA * ctx.B;
  for (const auto& term : ctx.terms) {
    double yd = 0.0;
    if (term.has_x && p.nx > 0) yd += term.yx.dot(dx);
    if (term.has_A) {
      yd += (term.cap_index >= 0) ? dA(term.cap_index, term.cap_index).real()
                                  : herm_inner(term.YA, dA);
    }
    double c = term.kappa * yd;
    if (c == 0.0) continue;
    if (term.has_x && p.nx > 0) hx.noalias() += c * term.yx;
    if (term.has_A) {
      if (term.cap_index >= 0)
        hA(term.cap_index, term.cap_index) += c;
      else
        hA.noalias() += c * term.YA;
    }
  }
}

// ---------------------------------------------------------------------------
// engine

class BarrierEngine {
 public:
  BarrierResult solve(const CanonicalProgram& p, const BarrierOptions& opts,
                      const Point& hint) {
    RISNOMA_TRACE("[barrier] === solve nx=%d m=%d rows=%zu logs=%zu stop=%.2e\n", p.nx, p.m,
                  p.rows.size(), p.logs.size(), opts.stop_objective);
    Point z = prepare_start(p, hint);
    Slacks s = eval_slacks(p, z);
    BarrierResult res;
    if (!s.ok) {
      RISNOMA_TRACE("[barrier] --- phase 1\n");
      bool feasible = run_phase1(p, opts, z, res);
      if (!feasible) return res;
      RISNOMA_TRACE("[barrier] --- phase 2\n");
    }
    return run_path(p, opts, z);
  }

 private:
  static double nu_of(const CanonicalProgram& p) {
    double nu = static_cast<double>(p.rows.size()) + 2.0 * static_cast<double>(p.logs.size());
    if (p.has_caps()) nu += p.m;
    if (p.has_matrix()) nu += p.m;
    for (int i = 0; i < p.nx; ++i) {
      if (std::isfinite(p.lo[i])) nu += 1.0;
      if (std::isfinite(p.hi[i])) nu += 1.0;
    }
    return std::max(nu, 1.0);
  }

  static Point prepare_start(const CanonicalProgram& p, const Point& hint) {
    Point z;
    z.x = Eigen::VectorXd::Zero(std::max(p.nx, 0));
    if (hint.x.size() == p.nx) z.x = hint.x;
    for (int i = 0; i < p.nx; ++i) {
      double lo = p.lo[i], hi = p.hi[i];
      if (!std::isfinite(z.x[i])) z.x[i] = 0.0;
      if (std::isfinite(lo) && std::isfinite(hi)) {
        double margin = 1e-7 * (hi - lo);
        z.x[i] = std::min(std::max(z.x[i], lo + margin), hi - margin);
      } else if (std::isfinite(lo)) {
        z.x[i] = std::max(z.x[i], lo + 1e-7 * (1.0 + std::abs(lo)));
      } else if (std::isfinite(hi)) {
        z.x[i] = std::min(z.x[i], hi - 1e-7 * (1.0 + std::abs(hi)));
      }
    }
    if (p.has_matrix()) {
      const int m = p.m;
      double cap_floor = p.has_caps() ? p.diag_cap.minCoeff() : 1.0;
      if (hint.A.rows() == m && hint.A.cols() == m) {
        // Floor small eigenvalues of the hint: rank-deficient hints would
        // otherwise start the path pressed against the cone boundary, where
        // centering crawls. The eigenbasis and the dominant eigenvalue stay
        // untouched so hint-derived scalar starts remain nearly consistent.
        Eigen::MatrixXcd A = hint.A;
        symmetrize(A);
        double mean_eig = std::max(A.trace().real() / m, 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(A);
        double floor = std::max(0.05 * mean_eig, 1e-12);
        Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
        z.A = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().adjoint();
        symmetrize(z.A);
        if (p.has_caps()) {
          double shrink = 1.0;
          for (int k = 0; k < m; ++k) {
            double dk = z.A(k, k).real();
            if (dk > 0.999 * p.diag_cap[k]) shrink = std::min(shrink, 0.999 * p.diag_cap[k] / dk);
          }
          if (shrink < 1.0) z.A *= shrink;
        }
      } else {
        z.A = 0.5 * cap_floor * Eigen::MatrixXcd::Identity(m, m);
      }
    }
    // The blend above moves the matrix block, which can invalidate log-row
    // hints computed at the raw anchor. Restore strict slack through any
    // unboxed scalar on the right-hand side instead of forcing a phase-I run.
    for (const auto& lr : p.logs) {
      if (p.nx == 0 || lr.qx.size() == 0) continue;
      double qn2 = lr.qx.squaredNorm();
      if (qn2 <= 0.0) continue;
      bool unboxed = true;
      for (int i = 0; i < p.nx; ++i)
        if (lr.qx[i] != 0.0 && (std::isfinite(p.lo[i]) || std::isfinite(p.hi[i])))
          unboxed = false;
      if (!unboxed) continue;
      double u = lin_value(p, lr.px, lr.PA, lr.pc, z);
      if (!(u > 0.0)) continue;
      double v = lin_value(p, lr.qx, lr.QA, lr.qc, z);
      double w = std::log(u) - v;
      const double margin = 1e-6;
      if (w < margin) z.x -= ((margin - w) / qn2) * lr.qx;
    }
    return z;
  }

  // Phase I: maximize a uniform slack variable tau; success once tau clears a
  // small positive margin. Returns false (and fills res) on infeasibility.
  bool run_phase1(const CanonicalProgram& p, const BarrierOptions& opts, Point& z,
                  BarrierResult& res) {
    CanonicalProgram p1;
    p1.nx = p.nx + 1;
    p1.m = p.m;
    p1.cx = Eigen::VectorXd::Zero(p1.nx);
    p1.cx[p.nx] = 1.0;
    if (p.has_matrix()) p1.CA = Eigen::MatrixXcd::Zero(p.m, p.m);
    // Synthetic finite boxes keep the relaxed barrier bounded: free variables
    // otherwise let the relaxation run away instead of lifting tau. The
    // bounds are generous multiples of the start scale; an interior point of
    // the original program at that scale stays interior here.
    p1.lo = Eigen::VectorXd::Constant(p1.nx, -kInf);
    p1.hi = Eigen::VectorXd::Constant(p1.nx, kInf);
    for (int i = 0; i < p.nx; ++i) {
      double radius = 1e4 * (1.0 + std::abs(z.x[i]));
      p1.lo[i] = std::isfinite(p.lo[i]) ? p.lo[i] : z.x[i] - radius;
      p1.hi[i] = std::isfinite(p.hi[i]) ? p.hi[i] : z.x[i] + radius;
    }
    p1.hi[p.nx] = 1.0;
    p1.diag_cap = p.diag_cap;

    std::vector<double> row_scale(p.rows.size(), 1.0);
    for (size_t r = 0; r < p.rows.size(); ++r) {
      const auto& row = p.rows[r];
      double norm2 = 0.0;
      if (row.ax.size() > 0) norm2 += row.ax.squaredNorm();
      if (row.GA.size() > 0) norm2 += row.GA.squaredNorm();
      row_scale[r] = std::max(1.0, std::sqrt(norm2));
      AffineRow nr = row;
      Eigen::VectorXd ax = Eigen::VectorXd::Zero(p1.nx);
      if (row.ax.size() > 0) ax.head(p.nx) = row.ax;
      ax[p.nx] = row_scale[r];
      nr.ax = std::move(ax);
      p1.rows.push_back(std::move(nr));
    }
    for (const auto& lr : p.logs) {
      LogRow nl = lr;
      Eigen::VectorXd px = Eigen::VectorXd::Zero(p1.nx);
      if (lr.px.size() > 0) px.head(p.nx) = lr.px;
      nl.px = std::move(px);
      Eigen::VectorXd qx = Eigen::VectorXd::Zero(p1.nx);
      if (lr.qx.size() > 0) qx.head(p.nx) = lr.qx;
      qx[p.nx] = 1.0;  // ln(u) >= v + tau
      nl.qx = std::move(qx);
      p1.logs.push_back(std::move(nl));
    }

    // initial tau strictly below every current slack
    Point z1;
    z1.A = z.A;
    z1.x = Eigen::VectorXd::Zero(p1.nx);
    if (p.nx > 0) z1.x.head(p.nx) = z.x;
    double tau0 = 0.0;
    {
      Point zp{z.x, z.A};
      Slacks s = eval_slacks(p, zp);
      for (int r = 0; r < s.row.size(); ++r)
        tau0 = std::min(tau0, s.row[r] / row_scale[static_cast<size_t>(r)]);
      for (int l = 0; l < s.log_w.size(); ++l) {
        if (!(s.log_u[l] > 0.0)) {
          // log argument not positive at the prepared start: no valid
          // starting domain for the relaxation
          res.status = BarrierStatus::numerical_failure;
          res.worst_row = static_cast<int>(p.rows.size()) + l;
          return false;
        }
        tau0 = std::min(tau0, s.log_w[l]);
      }
      tau0 -= 1.0;
    }
    z1.x[p.nx] = tau0;

    BarrierOptions o1 = opts;
    o1.tol = 1e-6;
    o1.stop_objective = kPhase1Margin;
    BarrierResult r1 = run_path(p1, o1, z1);
    res.newton_steps += r1.newton_steps;
    double tau = (r1.x.size() == p1.nx) ? r1.x[p.nx] : -1.0;
    if (r1.status == BarrierStatus::numerical_failure || !std::isfinite(tau)) {
      res.status = BarrierStatus::numerical_failure;
      return false;
    }
    if (tau <= kInfeasTol && r1.status != BarrierStatus::optimal) {
      // underconverged relaxation: feasibility undetermined, do not claim
      // infeasibility off a stalled bound
      res.status = BarrierStatus::numerical_failure;
      res.x = r1.x.head(p.nx);
      res.A = r1.A;
      return false;
    }
    if (tau <= -kInfeasTol) {
      res.status = BarrierStatus::infeasible;
      // report the tightest row at the relaxed optimum
      Point zo{r1.x.head(p.nx), r1.A};
      Slacks s = eval_slacks(p, zo);
      double worst = kInf;
      for (int r = 0; r < s.row.size(); ++r) {
        double ns = s.row[r] / row_scale[static_cast<size_t>(r)];
        if (ns < worst) { worst = ns; res.worst_row = r; }
      }
      for (int l = 0; l < s.log_w.size(); ++l) {
        if (s.log_w[l] < worst) {
          worst = s.log_w[l];
          res.worst_row = static_cast<int>(p.rows.size()) + l;
        }
      }
      res.max_violation = std::max(0.0, -worst);
      res.x = zo.x;
      res.A = zo.A;
      return false;
    }
    z.x = r1.x.head(p.nx);
    z.A = r1.A;
    Slacks s = eval_slacks(p, z);
    if (!s.ok) {
      res.status = BarrierStatus::numerical_failure;
      res.x = z.x;
      res.A = z.A;
      return false;
    }
    return true;
  }

  BarrierResult run_path(const CanonicalProgram& p, const BarrierOptions& opts, Point z) {
    BarrierResult res;
    const double nu = nu_of(p);
    double t = opts.t_init;
    int total_newton = 0;
    int consecutive_stalls = 0;
    int rescues = 0;
    int capout_repeats = 0;
    int extended_rescues_left = 8;
    // Gap certificates are only valid at centered points; stages that end in
    // a line-search stall do not update this. Soft certificates come from
    // in-tolerance Newton decrements whose directions passed only a loose
    // audit; they are trusted at a three-fold stricter gap.
    double certified_gap = kInf;
    double soft_gap = kInf;
    NewtonContext ctx;

    for (int stage = 0; stage < opts.max_stages; ++stage) {
      // Loose centering mid-path, tight once the gap target is within reach
      // of the next stage; over-polishing intermediate centers buys nothing.
      double fest = objective_value(p, z);
      bool last_stage =
          nu / t <= opts.t_mult * 0.5 * opts.tol * std::max(1.0, std::abs(fest));
      bool stage_centered = false;
      bool stage_stalled = false;
      for (int it = 0; it < opts.max_newton_per_stage; ++it) {
        if (total_newton >= opts.max_total_newton) {
          finalize(p, z, nu / t, total_newton, BarrierStatus::max_iterations, res);
          return res;
        }
        Slacks s = eval_slacks(p, z);
        if (!s.ok) {  // should not happen: line search preserves the domain
          finalize(p, z, nu / t, total_newton, BarrierStatus::numerical_failure, res);
          return res;
        }
        accumulate_gradient_terms(p, z, s, t, ctx);
        Eigen::VectorXd dx;
        Eigen::MatrixXcd dA;
        Eigen::VectorXd rx = -ctx.gx;
        Eigen::MatrixXcd RA = p.has_matrix() ? (-ctx.gA).eval() : Eigen::MatrixXcd();
        if (!solve_newton(p, z, ctx, rx, RA, dx, dA)) {
          // fp breakdown at extreme conditioning; the point is still feasible,
          // let the stall logic decide from the gap
          ++consecutive_stalls;
          ++total_newton;
          break;
        }
        // Audit the direction against the exact Hessian and refine once.
        // Stepping tolerates an imperfect direction (the line search guards
        // it); declaring a point centered does not, since a garbage-small
        // direction understates the Newton decrement.
        bool reliable = true;
        double audit_ratio = 0.0;
        if (!opts.economy) {
          auto residual_scales = [&](const Eigen::VectorXd& hx, const Eigen::MatrixXcd& hA,
                                     double& res, double& scale) {
            double res2 = 0.0, h2 = 0.0, r2 = 0.0;
            if (p.nx > 0) {
              res2 += (hx - rx).squaredNorm();
              h2 += hx.squaredNorm();
              r2 += rx.squaredNorm();
            }
            if (p.has_matrix()) {
              res2 += (hA - RA).squaredNorm();
              h2 += hA.squaredNorm();
              r2 += RA.squaredNorm();
            }
            res = std::sqrt(res2);
            scale = std::sqrt(h2) + std::sqrt(r2) + 1e-300;
          };
          Eigen::VectorXd hx;
          Eigen::MatrixXcd hA;
          apply_hessian(p, ctx, dx, dA, hx, hA);
          double res, scale;
          residual_scales(hx, hA, res, scale);
          audit_ratio = res / scale;
          if (res > 1e-9 * scale && res < 0.3 * scale) {
            for (int pass = 0; pass < 4 && res > 1e-11 * scale; ++pass) {
              Eigen::VectorXd ex;
              Eigen::MatrixXcd eA;
              Eigen::VectorXd r2x = p.nx > 0 ? (rx - hx).eval() : rx;
              Eigen::MatrixXcd r2A = p.has_matrix() ? (RA - hA).eval() : RA;
              if (!solve_newton(p, z, ctx, r2x, r2A, ex, eA)) break;
              Eigen::VectorXd cx = p.nx > 0 ? (dx + ex).eval() : dx;
              Eigen::MatrixXcd cA = p.has_matrix() ? (dA + eA).eval() : dA;
              Eigen::VectorXd hx2;
              Eigen::MatrixXcd hA2;
              apply_hessian(p, ctx, cx, cA, hx2, hA2);
              double res2, scale2;
              residual_scales(hx2, hA2, res2, scale2);
              if (res2 >= res) break;  // refinement no longer contracts
              dx = std::move(cx);
              dA = std::move(cA);
              hx = std::move(hx2);
              hA = std::move(hA2);
              res = res2;
              scale = scale2;
            }
            // healthy directions keep a small backward error even at harsh
            // conditioning; breakdown jumps to O(1)
            audit_ratio = res / scale;
            reliable = res <= 2e-2 * scale;
            RISNOMA_TRACE("[barrier] t=%.3e refine res/scale=%.3e reliable=%d\n", t,
                          res / scale, (int)reliable);
          } else if (res >= 0.3 * scale) {
            reliable = false;
            audit_ratio = 1.0;
          }
          if (!reliable && !opts.economy) {
            // the double audit saturates at eps * cond(A)^2; re-measure in
            // extended precision before distrusting the direction
            double res_ld, scale_ld;
            audit_extended(p, z, ctx, dx, dA, rx, RA, res_ld, scale_ld);
            audit_ratio = res_ld / scale_ld;
            reliable = audit_ratio <= 2e-2;
            if (!reliable && extended_rescues_left > 0) {
              // last resort: redo the solve itself in extended precision
              --extended_rescues_left;
              Eigen::VectorXd ex;
              Eigen::MatrixXcd eA;
              if (solve_newton_extended(p, z, ctx, rx, RA, ex, eA)) {
                audit_extended(p, z, ctx, ex, eA, rx, RA, res_ld, scale_ld);
                if (res_ld / scale_ld < audit_ratio) {
                  dx = std::move(ex);
                  dA = std::move(eA);
                  audit_ratio = res_ld / scale_ld;
                  reliable = audit_ratio <= 2e-2;
                }
              }
            }
            if (!reliable) {
              // numerically stationary points leave only noise on both sides
              double rhs_raw = std::sqrt(rx.squaredNorm() +
                                         (p.has_matrix() ? RA.squaredNorm() : 0.0));
              double obj_norm = (p.nx > 0 ? p.cx.norm() : 0.0) +
                                (p.has_matrix() ? p.CA.norm() : 0.0);
              double bnorm = p.has_matrix() ? ctx.B.norm() : 0.0;
              double noise_floor = 1e-12 * (1.0 + t * obj_norm + bnorm);
              if (rhs_raw <= noise_floor) {
                reliable = true;
                audit_ratio = 0.0;
              }
            }
            RISNOMA_TRACE("[barrier] t=%.3e extended audit ratio=%.3e reliable=%d\n", t,
                          audit_ratio, (int)reliable);
          }
        }
        double descent = 0.0;
        if (p.nx > 0) descent += ctx.gx.dot(dx);
        if (p.has_matrix()) descent += herm_inner(ctx.gA, dA);
        double lambda2 = -descent;  // Newton decrement^2
        double fval = objective_value(p, z);
        double center_tol = last_stage ? 1e-3 : 3e-3;
        double fscale = std::max(1.0, std::abs(fval));
        if (lambda2 >= 0.0 && lambda2 * 0.5 <= center_tol) {
          if (reliable) {
            stage_centered = true;
            break;
          }
          RISNOMA_TRACE("[barrier] t=%.3e it=%d uncertified center l2=%.3e\n", t, it, lambda2);
          if (audit_ratio <= 0.2) soft_gap = std::min(soft_gap, nu / t);
          // cannot trust the certificate; count as a stall
          ++consecutive_stalls;
          ++total_newton;
          stage_stalled = true;
          if (std::min(certified_gap, soft_gap * 3.0) <= opts.tol * fscale) {
            finalize(p, z, std::min(certified_gap, soft_gap), total_newton,
                     BarrierStatus::optimal, res);
            return res;
          }
          break;
        }

        if (!(descent < 0.0)) {
          // not a descent direction: fp breakdown, never a step
          RISNOMA_TRACE("[barrier] t=%.3e it=%d non-descent l2=%.3e\n", t, it, lambda2);
          ++consecutive_stalls;
          ++total_newton;
          stage_stalled = true;
          if (std::min(certified_gap, soft_gap * 3.0) <= opts.tol * fscale) {
            finalize(p, z, std::min(certified_gap, soft_gap), total_newton,
                     BarrierStatus::optimal, res);
            return res;
          }
          break;
        }
        // backtracking line search on the barrier merit
        double phi0 = barrier_value(p, z, t);
        double alpha = 1.0;
        bool stepped = false;
        for (int ls = 0; ls < 60; ++ls) {
          Point zn;
          if (p.nx > 0) zn.x = z.x + alpha * dx;
          if (p.has_matrix()) {
            zn.A = z.A + alpha * dA;
            symmetrize(zn.A);
          }
          double phin = barrier_value(p, zn, t);
          if (std::isfinite(phin) && phin <= phi0 + 0.01 * alpha * descent) {
            z = std::move(zn);
            stepped = true;
            break;
          }
          alpha *= 0.5;
        }
        ++total_newton;
        if (!stepped) {
          // fp-limited; keep the (feasible) point and move along the path,
          // the gap estimate still shrinks with t
          RISNOMA_TRACE("[barrier] t=%.3e it=%d line-search stall l2=%.3e\n", t, it, lambda2);
          ++consecutive_stalls;
          stage_stalled = true;
          break;
        }
        consecutive_stalls = 0;
        if (std::isfinite(opts.stop_objective) &&
            objective_value(p, z) >= opts.stop_objective) {
          finalize(p, z, nu / t, total_newton, BarrierStatus::optimal, res);
          return res;
        }
      }
      if (stage_centered) certified_gap = nu / t;
      if (!stage_centered && !stage_stalled && capout_repeats < 2) {
        // ran out of per-stage budget while still making progress: repeat
        // this stage instead of advancing t uncentered
        ++capout_repeats;
        RISNOMA_TRACE("[barrier] stage %d t=%.3e repeat (cap-out)\n", stage, t);
        continue;
      }
      if (stage_centered) capout_repeats = 0;
      double fval = objective_value(p, z);
      double scale = std::max(1.0, std::abs(fval));
      RISNOMA_TRACE("[barrier] stage %d t=%.3e f=%.9f centered=%d stalls=%d gap=%.2e nt=%d\n",
                    stage, t, fval, (int)stage_centered, consecutive_stalls, nu / t,
                    total_newton);
      if (!stage_centered && !std::isfinite(certified_gap) && rescues < 2) {
        // never centered and already stalling: the start is too close to the
        // boundary for this objective weight; lean on the barrier instead
        ++rescues;
        consecutive_stalls = 0;
        t = std::max(t / 400.0, 1e-6);
        continue;
      }
      if (consecutive_stalls >= 4) {
        double best_gap = std::min(certified_gap, soft_gap);
        BarrierStatus st = BarrierStatus::numerical_failure;
        if (std::min(certified_gap, soft_gap * 3.0) <= opts.tol * scale)
          st = BarrierStatus::optimal;
        else if (best_gap <= 1e4 * opts.tol * scale)
          st = BarrierStatus::max_iterations;
        finalize(p, z, best_gap, total_newton, st, res);
        return res;
      }
      if (std::isfinite(opts.stop_objective) && fval >= opts.stop_objective) {
        finalize(p, z, nu / t, total_newton, BarrierStatus::optimal, res);
        return res;
      }
      if (stage_centered && nu / t <= 0.5 * opts.tol * scale) {
        finalize(p, z, nu / t, total_newton, BarrierStatus::optimal, res);
        return res;
      }
      // land the final stage at the needed parameter instead of overshooting
      // into harsher conditioning than the certificate requires
      double t_needed = nu / (0.45 * opts.tol * scale);
      if (t < t_needed && t * opts.t_mult > t_needed)
        t = t_needed;
      else
        t *= opts.t_mult;
    }
    finalize(p, z, std::min({certified_gap, soft_gap, nu / t}), total_newton,
             BarrierStatus::max_iterations, res);
    return res;
  }

  static void finalize(const CanonicalProgram& p, const Point& z, double gap,
                       int steps, BarrierStatus st, BarrierResult& res) {
    res.status = st;
    res.x = z.x;
    res.A = z.A;
    res.objective = objective_value(p, z);
    res.gap = gap;
    res.newton_steps += steps;
    // exact residuals at the returned point
    double viol = 0.0;
    Point zz = z;
    for (const auto& row : p.rows)
      viol = std::max(viol, affine_value(p, row, zz) - row.b);
    for (const auto& lr : p.logs) {
      double u = lin_value(p, lr.px, lr.PA, lr.pc, zz);
      double v = lin_value(p, lr.qx, lr.QA, lr.qc, zz);
      viol = std::max(viol, (u > 0.0) ? v - std::log(u) : kInf);
    }
    for (int i = 0; i < p.nx; ++i) {
      if (std::isfinite(p.lo[i])) viol = std::max(viol, p.lo[i] - z.x[i]);
      if (std::isfinite(p.hi[i])) viol = std::max(viol, z.x[i] - p.hi[i]);
    }
    res.min_eigenvalue = 0.0;
    if (p.has_matrix()) {
      for (int k = 0; k < p.m; ++k)
        if (p.has_caps()) viol = std::max(viol, z.A(k, k).real() - p.diag_cap[k]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(z.A);
      res.min_eigenvalue = eig.eigenvalues().minCoeff();
      viol = std::max(viol, -res.min_eigenvalue);
    }
    res.max_violation = viol;
  }

  static constexpr double kPhase1Margin = 1e-4;
  static constexpr double kInfeasTol = 1e-9;
  static constexpr double kThinInterior = 1e-12;
};

inline BarrierResult solve_canonical(const CanonicalProgram& p, const BarrierOptions& opts,
                                     const Point& hint = {}) {
  BarrierEngine engine;
  return engine.solve(p, opts, hint);
}

}  // namespace risnoma::detail
