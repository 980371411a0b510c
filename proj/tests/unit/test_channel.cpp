// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "risnoma/channel.hpp"

using namespace risnoma;

namespace {

TopologyConfig small_cfg(int cells, int elements, uint64_t seed) {
  TopologyConfig c;
  c.cells = cells;
  c.ris_elements = elements;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("topology: single cell at the origin") {
  Topology t = build_topology(small_cfg(1, 4, 5));
  CHECK(t.bs_pos[0].norm() == 0.0);
  CHECK((t.ris_pos[0] - t.bs_pos[0]).norm() == doctest::Approx(50.0));
  double dn = (t.near_user_pos[0] - t.bs_pos[0]).norm();
  double df = (t.far_user_pos[0] - t.bs_pos[0]).norm();
  CHECK(dn >= 20.0);
  CHECK(dn <= 100.0);
  CHECK(df >= 100.0);
  CHECK(df <= 250.0);
}

TEST_CASE("topology: 2x2 grid pairwise distances") {
  Topology t = build_topology(small_cfg(4, 2, 1));
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      double d = (t.bs_pos[a] - t.bs_pos[b]).norm();
      bool ok = std::abs(d - 500.0) < 1e-9 || std::abs(d - 500.0 * std::sqrt(2.0)) < 1e-9;
      CHECK(ok);
    }
}

TEST_CASE("topology: determinism and validation") {
  Topology a = build_topology(small_cfg(3, 4, 77));
  Topology b = build_topology(small_cfg(3, 4, 77));
  for (int n = 0; n < 3; ++n) {
    CHECK(a.near_user_pos[n] == b.near_user_pos[n]);
    CHECK(a.far_user_pos[n] == b.far_user_pos[n]);
  }
  TopologyConfig bad = small_cfg(2, 2, 1);
  bad.near_radius_max = 300.0;  // inner annulus exceeds outer
  CHECK_THROWS_AS(build_topology(bad), std::invalid_argument);
}

TEST_CASE("channels: fixed seed reproduces the realization byte for byte") {
  Topology t = build_topology(small_cfg(2, 8, 9));
  ChannelRealization a = sample_channels(t, 4242);
  ChannelRealization b = sample_channels(t, 4242);
  for (int n = 0; n < 2; ++n) {
    CHECK(a.cell[n].near_user.direct == b.cell[n].near_user.direct);
    CHECK(a.cell[n].near_user.cascaded == b.cell[n].near_user.cascaded);
    CHECK(a.cell[n].far_user.bs_to_ris == b.cell[n].far_user.bs_to_ris);
  }
  ChannelRealization c = sample_channels(t, 4243);
  CHECK(a.cell[0].near_user.direct != c.cell[0].near_user.direct);
}

TEST_CASE("channels: zero Rician factor degenerates to zero-mean entries") {
  TopologyConfig cfg = small_cfg(1, 1, 12);
  cfg.rician_factor = 0.0;
  Topology t = build_topology(cfg);
  const int draws = 10000;
  cxd mean = 0.0;
  double loss = std::pow(50.0 / 100.0, -1.5);
  for (int i = 0; i < draws; ++i) {
    ChannelRealization ch = sample_channels(t, 1000 + i);
    mean += ch.cell[0].near_user.bs_to_ris(0, 0) / loss;
  }
  mean /= static_cast<double>(draws);
  // |mean| of n unit-variance complex samples ~ 1/sqrt(n); allow 3 sigma
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("channels: path-loss law scales mean square gain") {
  // Doubling the distance at exponent 3 divides mean |g|^2 by 8. The far
  // user is parked so remote that the gain-sorting swap never touches the
  // near label, making attribution unambiguous.
  auto mean_near_gain_at = [](double radius) {
    TopologyConfig cfg;
    cfg.cells = 1;
    cfg.ris_elements = 1;
    cfg.near_radius_min = radius - 0.1;
    cfg.near_radius_max = radius + 0.1;
    cfg.far_radius_min = 3000.0;
    cfg.far_radius_max = 3001.0;
    const int draws = 10000;
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
      cfg.seed = 77 + i;
      Topology t = build_topology(cfg);
      ChannelRealization ch = sample_channels(t, 123456 + i);
      acc += std::norm(ch.cell[0].near_user.direct[0]);
    }
    return acc / draws;
  };
  double g1 = mean_near_gain_at(100.0);
  double g2 = mean_near_gain_at(200.0);
  CHECK(g1 / g2 == doctest::Approx(8.0).epsilon(0.05));
}

TEST_CASE("channels: label swap keeps the serving direct gains sorted") {
  Topology t = build_topology(small_cfg(4, 4, 21));
  for (uint64_t seed = 0; seed < 50; ++seed) {
    ChannelRealization ch = sample_channels(t, seed);
    for (int n = 0; n < 4; ++n)
      CHECK(std::abs(ch.cell[n].near_user.direct[n]) >=
            std::abs(ch.cell[n].far_user.direct[n]));
  }
}

TEST_CASE("channels: near user dominates on average at default geometry") {
  const int draws = 2000;
  double acc_near = 0.0, acc_far = 0.0;
  BeamState flat = BeamState::flat_phases(1, 4);
  for (int i = 0; i < draws; ++i) {
    TopologyConfig cfg = small_cfg(1, 4, 1000 + i);
    Topology t = build_topology(cfg);
    ChannelRealization ch = sample_channels(t, 2000 + i);
    acc_near += effective_gain(ch.cell[0].near_user.direct[0],
                               ch.cell[0].near_user.cascaded.col(0), flat.reflect[0]);
    acc_far += effective_gain(ch.cell[0].far_user.direct[0],
                              ch.cell[0].far_user.cascaded.col(0), flat.reflect[0]);
  }
  CHECK(acc_near / draws >= acc_far / draws);
}

TEST_CASE("effective gain: constructive and destructive alignment") {
  Eigen::VectorXcd w(1), d(1);
  w << cxd(1, 0);
  d << cxd(1, 0);
  CHECK(effective_gain(cxd(1, 0), w, d) == doctest::Approx(4.0));
  d << std::exp(cxd(0, kPi));
  CHECK(effective_gain(cxd(1, 0), w, d) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("lifted blocks: structure and exact Hermitian closure") {
  Eigen::VectorXcd w(1);
  w << cxd(1, 0);
  Eigen::MatrixXcd g = build_lifted(cxd(1, 0), w);
  CHECK(g(0, 0) == cxd(1, 0));
  CHECK(g(0, 1) == cxd(1, 0));
  CHECK(g(1, 0) == cxd(1, 0));
  CHECK(g(1, 1) == cxd(0, 0));

  Rng rng(5);
  Eigen::VectorXcd w2(6);
  for (int i = 0; i < 6; ++i) w2[i] = rng.complex_gaussian();
  Eigen::MatrixXcd g2 = build_lifted(rng.complex_gaussian(), w2);
  CHECK((g2 - g2.adjoint()).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXcd gz = build_lifted(cxd(0, 0), Eigen::VectorXcd::Zero(3));
  CHECK(gz.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lifted gain: trace arithmetic and dimension checks") {
  Eigen::VectorXcd w(1);
  w << cxd(1, 0);
  Eigen::MatrixXcd g = build_lifted(cxd(1, 0), w);
  Eigen::VectorXcd delta(1);
  delta << cxd(1, 0);
  CHECK(lifted_gain(g, lift_reflection(delta), cxd(1, 0)) == doctest::Approx(4.0));
  // A = I2 (not rank one): tr(GA) + |g|^2 = 1 + 0 + 1
  CHECK(lifted_gain(g, Eigen::MatrixXcd::Identity(2, 2), cxd(1, 0)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(lifted_gain(g, Eigen::MatrixXcd::Identity(3, 3), cxd(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("lift identity holds across element counts") {
  Rng rng(31337);
  for (int k : {1, 4, 16, 50}) {
    for (int rep = 0; rep < 250; ++rep) {
      Eigen::VectorXcd w(k), delta(k);
      for (int i = 0; i < k; ++i) {
        w[i] = rng.complex_gaussian();
        delta[i] = std::exp(cxd(0.0, rng.uniform(0.0, 2.0 * kPi)));
      }
      cxd g = rng.complex_gaussian();
      double direct = effective_gain(g, w, delta);
      double lifted = lifted_gain(build_lifted(g, w), lift_reflection(delta), g);
      CHECK(std::abs(direct - lifted) <= 1e-9);
    }
  }
}

TEST_CASE("framework-2 view zeroes only the near user's cascaded links") {
  Topology t = build_topology(small_cfg(2, 4, 8));
  ChannelRealization ch = sample_channels(t, 99);
  ChannelRealization z = zero_near_user_ris(ch);
  for (int n = 0; n < 2; ++n) {
    CHECK(z.cell[n].near_user.cascaded.cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.cell[n].far_user.cascaded == ch.cell[n].far_user.cascaded);
    CHECK(z.cell[n].near_user.direct == ch.cell[n].near_user.direct);
  }
}
