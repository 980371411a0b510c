// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "risnoma/common.hpp"

namespace risnoma {

/// Scenario geometry and propagation parameters. Distances are meters;
/// path loss is applied relative to reference_distance, which sets the
/// working SNR regime at the default noise power.
struct TopologyConfig {
  int cells = 10;
  int ris_elements = 16;
  double path_loss_exponent = 3.0;
  double rician_factor = 3.0;       // BS->RIS links; 0 degenerates to Rayleigh
  double noise_power = 0.1;
  double grid_spacing = 500.0;      // BS grid pitch
  double ris_offset = 50.0;         // RIS distance from its BS
  double near_radius_min = 20.0;    // near-user annulus
  double near_radius_max = 100.0;
  double far_radius_min = 100.0;    // far-user annulus
  double far_radius_max = 250.0;
  double reference_distance = 100.0;
  uint64_t seed = 1;
};

struct Topology {
  int cells = 0;
  int ris_elements = 0;
  double path_loss_exponent = 3.0;
  double rician_factor = 3.0;
  double noise_power = 0.1;
  double reference_distance = 100.0;
  std::vector<Eigen::Vector2d> bs_pos;
  std::vector<Eigen::Vector2d> ris_pos;
  std::vector<Eigen::Vector2d> near_user_pos;
  std::vector<Eigen::Vector2d> far_user_pos;
};

/// All links seen by one user: the direct gain from every BS, the BS->RIS
/// vector through the user's serving RIS from every BS, the RIS->user
/// vector, and the cascaded per-element vector combining the two.
struct UserLink {
  Eigen::VectorXcd direct;       // size N, one entry per source BS
  Eigen::MatrixXcd bs_to_ris;    // K x N
  Eigen::VectorXcd ris_to_user;  // K
  Eigen::MatrixXcd cascaded;     // K x N, column n' = diag(bs_to_ris col) * ris_to_user
};

struct CellChannels {
  UserLink near_user;  // the strong user (sorted by serving direct gain)
  UserLink far_user;
};

struct ChannelRealization {
  int cells = 0;
  int elements = 0;
  double noise_power = 0.1;
  std::vector<CellChannels> cell;
};

/// Per-cell RIS reflection state: unit-modulus phase vector, optionally the
/// lifted PSD matrix kept alongside during beam iterations.
struct BeamState {
  std::vector<Eigen::VectorXcd> reflect;
  std::vector<Eigen::MatrixXcd> lifted;  // empty or one (K+1)x(K+1) per cell

  static BeamState flat_phases(int cells, int elements) {
    BeamState b;
    b.reflect.assign(cells, Eigen::VectorXcd::Ones(elements));
    return b;
  }
};

/// Deterministic placement: BSs on a square grid, one RIS at a fixed offset
/// from each BS, users drawn uniformly in their annuli from the config seed.
inline Topology build_topology(const TopologyConfig& cfg) {
  if (cfg.cells < 1 || cfg.ris_elements < 1)
    throw std::invalid_argument("topology: cells and ris_elements must be >= 1");
  if (cfg.path_loss_exponent <= 0 || cfg.noise_power <= 0 || cfg.rician_factor < 0)
    throw std::invalid_argument("topology: invalid propagation parameters");
  if (cfg.near_radius_min <= 0 || cfg.near_radius_min >= cfg.near_radius_max)
    throw std::invalid_argument("topology: bad near-user annulus");
  if (cfg.far_radius_min >= cfg.far_radius_max || cfg.near_radius_max > cfg.far_radius_min)
    throw std::invalid_argument("topology: inner annulus exceeds outer");
  if (cfg.reference_distance <= 0)
    throw std::invalid_argument("topology: reference distance must be positive");

  Topology t;
  t.cells = cfg.cells;
  t.ris_elements = cfg.ris_elements;
  t.path_loss_exponent = cfg.path_loss_exponent;
  t.rician_factor = cfg.rician_factor;
  t.noise_power = cfg.noise_power;
  t.reference_distance = cfg.reference_distance;

  int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.cells))));
  Rng rng(mix_seed(cfg.seed, 0xA11CE5));
  for (int n = 0; n < cfg.cells; ++n) {
    Eigen::Vector2d bs(cfg.grid_spacing * (n % cols), cfg.grid_spacing * (n / cols));
    t.bs_pos.push_back(bs);
    t.ris_pos.push_back(bs + Eigen::Vector2d(cfg.ris_offset, 0.0));
    t.near_user_pos.push_back(bs + rng.annulus_point(cfg.near_radius_min, cfg.near_radius_max));
    t.far_user_pos.push_back(bs + rng.annulus_point(cfg.far_radius_min, cfg.far_radius_max));
  }
  return t;
}

namespace detail_channel {

inline double amp_loss(const Topology& t, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  double d = (a - b).norm();
  return std::pow(d / t.reference_distance, -0.5 * t.path_loss_exponent);
}

/// Deterministic line-of-sight phase ramp for a BS->RIS link.
inline Eigen::VectorXcd los_ramp(const Topology& t, int source, int ris) {
  Eigen::Vector2d d = t.ris_pos[ris] - t.bs_pos[source];
  double angle = std::atan2(d.y(), d.x());
  Eigen::VectorXcd v(t.ris_elements);
  for (int k = 0; k < t.ris_elements; ++k)
    v[k] = std::exp(cxd(0.0, kPi * k * std::sin(angle)));
  return v;
}

inline UserLink sample_user(const Topology& t, const Eigen::Vector2d& user_pos, int cell,
                            Rng& rng) {
  const int N = t.cells, K = t.ris_elements;
  UserLink u;
  u.direct.resize(N);
  u.bs_to_ris.resize(K, N);
  u.ris_to_user.resize(K);
  u.cascaded.resize(K, N);

  for (int s = 0; s < N; ++s)
    u.direct[s] = rng.complex_gaussian() * amp_loss(t, user_pos, t.bs_pos[s]);

  double ris_loss = amp_loss(t, user_pos, t.ris_pos[cell]);
  for (int k = 0; k < K; ++k) u.ris_to_user[k] = rng.complex_gaussian() * ris_loss;

  double los_w = std::sqrt(t.rician_factor / (1.0 + t.rician_factor));
  double nlos_w = std::sqrt(1.0 / (1.0 + t.rician_factor));
  for (int s = 0; s < N; ++s) {
    Eigen::VectorXcd los = los_ramp(t, s, cell);
    double loss = amp_loss(t, t.bs_pos[s], t.ris_pos[cell]);
    for (int k = 0; k < K; ++k)
      u.bs_to_ris(k, s) = (los_w * los[k] + nlos_w * rng.complex_gaussian()) * loss;
    u.cascaded.col(s) = u.bs_to_ris.col(s).cwiseProduct(u.ris_to_user);
  }
  return u;
}

}  // namespace detail_channel

/// One Monte Carlo fading draw, deterministic in (topology, seed). User
/// labels within a cell are swapped when needed so the serving direct gain
/// of the near user dominates the far user's.
inline ChannelRealization sample_channels(const Topology& t, uint64_t seed) {
  ChannelRealization ch;
  ch.cells = t.cells;
  ch.elements = t.ris_elements;
  ch.noise_power = t.noise_power;
  ch.cell.resize(t.cells);
  Rng rng(mix_seed(seed, 0xC4A77E1));
  for (int n = 0; n < t.cells; ++n) {
    ch.cell[n].near_user = detail_channel::sample_user(t, t.near_user_pos[n], n, rng);
    ch.cell[n].far_user = detail_channel::sample_user(t, t.far_user_pos[n], n, rng);
    if (std::abs(ch.cell[n].near_user.direct[n]) < std::abs(ch.cell[n].far_user.direct[n]))
      std::swap(ch.cell[n].near_user, ch.cell[n].far_user);
  }
  return ch;
}

/// Evaluation variant where the RIS does not assist the strong user: the
/// near user's cascaded vectors are zeroed, all other links shared.
inline ChannelRealization zero_near_user_ris(ChannelRealization ch) {
  for (auto& c : ch.cell) c.near_user.cascaded.setZero();
  return ch;
}

/// |g + delta^H w|^2
inline double effective_gain(cxd g, const Eigen::VectorXcd& w, const Eigen::VectorXcd& delta) {
  return std::norm(g + delta.dot(w));
}

/// Lifted channel block for the trace form:
///   [ w w^H    w conj(g) ]
///   [ g w^H    0         ]
inline Eigen::MatrixXcd build_lifted(cxd g, const Eigen::VectorXcd& w) {
  const int k = static_cast<int>(w.size());
  Eigen::MatrixXcd G(k + 1, k + 1);
  G.topLeftCorner(k, k).noalias() = w * w.adjoint();
  G.topRightCorner(k, 1) = w * std::conj(g);
  G.bottomLeftCorner(1, k) = (w * std::conj(g)).adjoint();
  G(k, k) = 0.0;
  return G;
}

/// tr(G A) + |g|^2; equals effective_gain when A is the rank-one lift of the
/// unit-extended reflection vector.
inline double lifted_gain(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& A, cxd g) {
  if (G.rows() != A.rows() || G.cols() != A.cols())
    throw std::invalid_argument("lifted_gain: dimension mismatch");
  return herm_inner(G, A) + std::norm(g);
}

/// Rank-one lift of a reflection vector: [delta; 1] [delta; 1]^H.
inline Eigen::MatrixXcd lift_reflection(const Eigen::VectorXcd& delta) {
  Eigen::VectorXcd ext(delta.size() + 1);
  ext.head(delta.size()) = delta;
  ext[delta.size()] = 1.0;
  return ext * ext.adjoint();
}

}  // namespace risnoma
