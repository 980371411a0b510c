// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "risnoma/oracle.hpp"
#include "risnoma/power_alloc.hpp"

using namespace risnoma;

namespace {

ChannelRealization realization(int cells, int k, uint64_t seed) {
  TopologyConfig cfg;
  cfg.cells = cells;
  cfg.ris_elements = k;
  cfg.seed = seed;
  return sample_channels(build_topology(cfg), seed);
}

}  // namespace

TEST_CASE("init rule: quarter split, tight auxiliaries") {
  ChannelRealization ch = realization(2, 3, 11);
  BeamState beams = BeamState::flat_phases(2, 3);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 1.0;
  PowerIterate it = init_power(ch, beams, sic, cfg);
  for (int n = 0; n < 2; ++n) {
    CHECK(it.power_near[n] == doctest::Approx(0.25));
    CHECK(it.power_far[n] == doctest::Approx(0.75));
  }
  // psi equals the exact rates at the init point
  Allocation alloc = Allocation::uniform(2, 1.0, 0.25);
  RateReport r = sum_rate(ch, alloc, beams, sic);
  for (int n = 0; n < 2; ++n) {
    CHECK(it.rate_aux_near[n] == doctest::Approx(r.rate_near[n]).epsilon(1e-14));
    CHECK(it.rate_aux_far[n] == doctest::Approx(r.rate_far[n]).epsilon(1e-14));
  }
  // log auxiliaries equal the exact denominators at the init point
  auto co = detail_power::gather(ch, beams);
  double den0 = it.power_far[0] * co.gain_near[0] * sic.residual_fraction +
                (it.power_near[1] + it.power_far[1]) * co.cross_near(0, 1) + ch.noise_power;
  CHECK(it.logden_near[0] == doctest::Approx(std::log(den0)).epsilon(1e-14));
}

TEST_CASE("program shape: single cell has six variables and constant interference") {
  ChannelRealization ch = realization(1, 2, 3);
  BeamState beams = BeamState::flat_phases(1, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 1.0;
  PowerIterate anchor = init_power(ch, beams, sic, cfg);
  LogAffineProgram p = build_power_program(ch, beams, sic, cfg, anchor);
  CHECK(p.dim == 6);
  CHECK(p.log_rows.size() == 2);
  CHECK(p.rows.size() == 3);
  // with one cell the interference sums are empty: the rate row argument
  // touches only this cell's q variables
  for (const auto& lr : p.log_rows) {
    CHECK(lr.arg_const == doctest::Approx(ch.noise_power));
  }
}

TEST_CASE("program shape: perfect SIC drops the partner power from the near tangent row") {
  ChannelRealization ch = realization(1, 2, 3);
  BeamState beams = BeamState::flat_phases(1, 2);
  PowerConfig cfg;
  cfg.total_power = 1.0;
  SicModel perfect{0.0};
  PowerIterate anchor = init_power(ch, beams, perfect, cfg);
  LogAffineProgram p = build_power_program(ch, beams, perfect, cfg, anchor);
  // near tangent row is rows[0]; q_far coefficient (index 1) must vanish
  CHECK(p.rows[0].coeff[1] == 0.0);
  SicModel imperfect{0.3};
  PowerIterate anchor2 = init_power(ch, beams, imperfect, cfg);
  LogAffineProgram p2 = build_power_program(ch, beams, imperfect, cfg, anchor2);
  CHECK(p2.rows[0].coeff[1] > 0.0);
}

TEST_CASE("tangent rows hold with equality at the anchor") {
  ChannelRealization ch = realization(2, 2, 8);
  BeamState beams = BeamState::flat_phases(2, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.5;
  PowerIterate anchor = init_power(ch, beams, sic, cfg);
  LogAffineProgram p = build_power_program(ch, beams, sic, cfg, anchor);
  Eigen::VectorXd x = p.start;
  // tangent rows are pushed first per cell: indices 0,1 then 3,4 (budget rows 2,5)
  for (int row : {0, 1, 3, 4}) {
    double lhs = p.rows[row].coeff.dot(x);
    CHECK(lhs == doctest::Approx(p.rows[row].bound).epsilon(1e-10));
  }
}

TEST_CASE("exponential inner approximation: tangent property") {
  for (double x0 : {-3.0, -1.0, 0.0, 0.5, 2.0, 5.0}) {
    double e0 = std::exp(x0);
    CHECK(e0 * (x0 - x0 + 1.0) == doctest::Approx(std::exp(x0)).epsilon(1e-15));
    for (double x : {-6.0, -2.0, -0.5, 0.0, 1.0, 4.0, 8.0}) {
      CHECK(e0 * (x - x0 + 1.0) <= std::exp(x) * (1.0 + 1e-12) + 1e-12);
    }
  }
}

TEST_CASE("single cell, perfect SIC, no floor: full power is optimal") {
  ChannelRealization ch = realization(1, 2, 21);
  BeamState beams = BeamState::flat_phases(1, 2);
  SicModel sic{0.0};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  cfg.min_rate = 0.0;
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  CHECK(alloc.total_power[0] == doctest::Approx(0.1).epsilon(1e-4));

  GridSpec grid;
  grid.power_points = 201;
  auto oracle = brute_power(ch, beams, sic, cfg, grid);
  REQUIRE(oracle.feasible_found);
  // grid argmax sits on the full-power boundary
  CHECK(oracle.allocation.total_power[0] == doctest::Approx(0.1).epsilon(1e-12));
  // solver matches the grid optimum within one percent
  CHECK(report.final_rates.sum_rate >= 0.99 * oracle.rate);
}

TEST_CASE("unattainable rate floor reports infeasibility with a cell") {
  ChannelRealization ch = realization(1, 2, 33);
  BeamState beams = BeamState::flat_phases(1, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  cfg.min_rate = 40.0;  // beyond any capacity at this budget
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  CHECK(report.status == SolveStatus::infeasible);
  CHECK(report.failed_cell == 0);
}

TEST_CASE("two identical cells produce a symmetric allocation") {
  // Duplicate one cell's channels into both slots so the joint program is
  // exactly symmetric under swapping the cell indices.
  ChannelRealization ch = realization(2, 2, 44);
  ch.cell[1] = ch.cell[0];
  for (UserLink* u : {&ch.cell[1].near_user, &ch.cell[1].far_user}) {
    u->direct[1] = u->direct[0];
    u->bs_to_ris.col(1) = u->bs_to_ris.col(0);
    u->cascaded.col(1) = u->cascaded.col(0);
  }
  // make the cross links symmetric as well
  for (int cell : {0, 1}) {
    for (UserLink* u : {&ch.cell[cell].near_user, &ch.cell[cell].far_user}) {
      u->direct[1 - cell] = 0.3 * u->direct[cell];
      u->cascaded.col(1 - cell) = 0.3 * u->cascaded.col(cell);
    }
  }
  BeamState beams = BeamState::flat_phases(2, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  cfg.min_rate = 0.1;
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  CHECK(alloc.total_power[0] == doctest::Approx(alloc.total_power[1]).epsilon(1e-4));
  CHECK(alloc.split_near[0] == doctest::Approx(alloc.split_near[1]).epsilon(1e-4));
}

TEST_CASE("objective trace is nondecreasing and the exit point is feasible") {
  for (uint64_t seed : {3ull, 7ull, 19ull}) {
    ChannelRealization ch = realization(3, 2, seed);
    BeamState beams = BeamState::flat_phases(3, 2);
    SicModel sic{0.1};
    PowerConfig cfg;
    cfg.total_power = 0.1;
    cfg.min_rate = 0.2;
    auto [alloc, report] = solve_power(ch, beams, sic, cfg);
    REQUIRE(report.status == SolveStatus::optimal);
    for (size_t i = 1; i < report.objective_trace.size(); ++i)
      CHECK(report.objective_trace[i] >= report.objective_trace[i - 1] - 1e-6);
    // exact re-evaluation of the rate floors and budget
    RateReport rates = sum_rate(ch, alloc, beams, sic);
    for (int n = 0; n < 3; ++n) {
      CHECK(rates.rate_near[n] >= cfg.min_rate - 1e-4);
      CHECK(rates.rate_far[n] >= cfg.min_rate - 1e-4);
      CHECK(alloc.total_power[n] <= cfg.total_power + 1e-9);
      CHECK(alloc.total_power[n] >= -1e-12);
      CHECK(alloc.split_near[n] >= -1e-12);
      CHECK(alloc.split_near[n] <= 1.0 + 1e-12);
      CHECK(alloc.split_near[n] + alloc.split_far[n] == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("oracle dominance at two cells") {
  ChannelRealization ch = realization(2, 2, 55);
  BeamState beams = BeamState::flat_phases(2, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  cfg.min_rate = 0.0;
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  GridSpec grid;
  grid.power_points = 33;
  auto oracle = brute_power(ch, beams, sic, cfg, grid);
  REQUIRE(oracle.feasible_found);
  CHECK(report.final_rates.sum_rate >= 0.95 * oracle.rate);
}

TEST_CASE("bilinear recomposition reproduces the signal powers") {
  ChannelRealization ch = realization(2, 2, 66);
  BeamState beams = BeamState::flat_phases(2, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  for (int n = 0; n < 2; ++n) {
    double qn = alloc.total_power[n] * alloc.split_near[n];
    double qf = alloc.total_power[n] * alloc.split_far[n];
    CHECK(qn + qf == doctest::Approx(alloc.total_power[n]).epsilon(1e-15));
    CHECK(qn >= -1e-15);
    CHECK(qf >= -1e-15);
  }
}

TEST_CASE("frozen-interference ablation still solves") {
  ChannelRealization ch = realization(2, 2, 77);
  BeamState beams = BeamState::flat_phases(2, 2);
  SicModel sic{0.1};
  PowerConfig cfg;
  cfg.total_power = 0.1;
  cfg.frozen_interference = true;
  auto [alloc, report] = solve_power(ch, beams, sic, cfg);
  CHECK(report.status == SolveStatus::optimal);
  CHECK(report.final_rates.sum_rate > 0.0);
}
