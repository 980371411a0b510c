// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "risnoma/channel.hpp"
#include "risnoma/solver_core.hpp"

namespace risnoma {

/// Per-cell transmit power and NOMA power-split coefficients.
struct Allocation {
  Eigen::VectorXd total_power;  // P_n, watts
  Eigen::VectorXd split_near;   // fraction carried by the strong user's signal
  Eigen::VectorXd split_far;

  static Allocation uniform(int cells, double power, double near_fraction) {
    Allocation a;
    a.total_power = Eigen::VectorXd::Constant(cells, power);
    a.split_near = Eigen::VectorXd::Constant(cells, near_fraction);
    a.split_far = Eigen::VectorXd::Constant(cells, 1.0 - near_fraction);
    return a;
  }
};

/// Residual fraction of the intra-cell partner signal left after SIC at the
/// strong user; 0 models perfect cancellation.
struct SicModel {
  double residual_fraction = 0.0;
};

struct RateReport {
  Eigen::VectorXd sinr_near, sinr_far;
  Eigen::VectorXd rate_near, rate_far;            // bits/s/Hz
  Eigen::VectorXd interference_near, interference_far;
  double sum_rate = 0.0;
};

/// First-order expansion of log2(1 + sinr) around an expansion point:
/// rate >= log_slope * log2(sinr) + intercept, tight at the point.
struct ScaPoint {
  double log_slope = 0.0;  // sinr/(1+sinr)
  double intercept = 0.0;  // log2(1+sinr) - log_slope*log2(sinr)
};

enum class UserKind { near_user, far_user };

/// Co-channel interference received by one user: every neighboring BS's
/// full transmit power through that user's direct and own-RIS links,
/// composited with the serving cell's reflection vector.
inline double interference(const ChannelRealization& ch, const Allocation& alloc,
                           const BeamState& beams, UserKind kind, int cell) {
  const UserLink& u =
      (kind == UserKind::near_user) ? ch.cell[cell].near_user : ch.cell[cell].far_user;
  const Eigen::VectorXcd& delta = beams.reflect[cell];
  double acc = 0.0;
  for (int s = 0; s < ch.cells; ++s) {
    if (s == cell) continue;
    acc += alloc.total_power[s] * effective_gain(u.direct[s], u.cascaded.col(s), delta);
  }
  return acc;
}

inline std::pair<double, double> sinr_pair(const ChannelRealization& ch,
                                           const Allocation& alloc, const BeamState& beams,
                                           const SicModel& sic, int cell) {
  const auto& c = ch.cell[cell];
  const Eigen::VectorXcd& delta = beams.reflect[cell];
  double gain_near = effective_gain(c.near_user.direct[cell], c.near_user.cascaded.col(cell), delta);
  double gain_far = effective_gain(c.far_user.direct[cell], c.far_user.cascaded.col(cell), delta);
  double p = alloc.total_power[cell];
  double in = interference(ch, alloc, beams, UserKind::near_user, cell);
  double jf = interference(ch, alloc, beams, UserKind::far_user, cell);
  double sinr_near = p * alloc.split_near[cell] * gain_near /
                     (p * alloc.split_far[cell] * gain_near * sic.residual_fraction + in +
                      ch.noise_power);
  double sinr_far = p * alloc.split_far[cell] * gain_far /
                    (p * alloc.split_near[cell] * gain_far + jf + ch.noise_power);
  return {sinr_near, sinr_far};
}

inline RateReport sum_rate(const ChannelRealization& ch, const Allocation& alloc,
                           const BeamState& beams, const SicModel& sic) {
  RateReport r;
  const int n = ch.cells;
  r.sinr_near.resize(n);
  r.sinr_far.resize(n);
  r.rate_near.resize(n);
  r.rate_far.resize(n);
  r.interference_near.resize(n);
  r.interference_far.resize(n);
  for (int cell = 0; cell < n; ++cell) {
    auto [gi, gj] = sinr_pair(ch, alloc, beams, sic, cell);
    r.sinr_near[cell] = gi;
    r.sinr_far[cell] = gj;
    r.rate_near[cell] = std::log2(1.0 + gi);
    r.rate_far[cell] = std::log2(1.0 + gj);
    r.interference_near[cell] = interference(ch, alloc, beams, UserKind::near_user, cell);
    r.interference_far[cell] = interference(ch, alloc, beams, UserKind::far_user, cell);
    r.sum_rate += r.rate_near[cell] + r.rate_far[cell];
  }
  return r;
}

/// Expansion coefficients of the concave global lower bound
/// log_slope*log2(g) + intercept <= log2(1+g), tight at the expansion SINR.
inline ScaPoint sca_expand(double sinr_hat) {
  if (!(sinr_hat > 0.0))
    throw std::invalid_argument("sca_expand: expansion SINR must be positive");
  ScaPoint p;
  p.log_slope = sinr_hat / (1.0 + sinr_hat);
  p.intercept = std::log2(1.0 + sinr_hat) - p.log_slope * std::log2(sinr_hat);
  return p;
}

/// Per-solve bookkeeping shared by the power, beam, and driver loops.
struct SolveReport {
  SolveStatus status = SolveStatus::optimal;
  std::vector<double> objective_trace;
  RateReport final_rates;
  int iterations = 0;
  int failed_cell = -1;                 // set when infeasibility is localized
  std::vector<double> rank1_residuals;  // beam solves only
  std::vector<int> sca_iterations;      // beam solves only
  std::vector<bool> keep_rule_fired;    // beam solves only
  std::vector<std::vector<double>> cell_traces;         // per-cell SDP optima
  std::vector<std::vector<double>> cell_anchor_values;  // same objective at the anchor
};

}  // namespace risnoma
