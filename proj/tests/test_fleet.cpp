#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gridflex/fleet.hpp"

using namespace gridflex;

namespace {

FleetSpec small_fleet(std::size_t n, std::uint64_t seed) {
  FleetGenerator g;
  g.count = n;
  g.seed = seed;
  g.T0_nominal = 17.0;
  g.cfg.dt = 0.01;
  FleetSpec spec;
  spec.units = generate_fleet(g);
  spec.templ.T_s = 300.0;
  spec.templ.T_t = 300.0;
  spec.templ.horizon_steps = 1;
  spec.ambient = AmbientProfile(17.0);
  return spec;
}

FleetMeasurement at_baseline(const FleetSpec &spec) {
  FleetMeasurement m;
  for (const auto &u : spec.units) {
    m.yz0.push_back(output_yz(u.init.T, spec.ambient(0.0), u.params.R));
    m.dP_prev.push_back(0.0);
    m.yz_ref_prev.push_back(std::nan(""));
  }
  return m;
}

} // namespace

TEST(FleetGenerator, SpreadWithinRangeAndSeeded) {
  FleetGenerator g;
  g.count = 200;
  g.seed = 11;
  const auto a = generate_fleet(g);
  const auto b = generate_fleet(g);
  g.seed = 12;
  const auto c = generate_fleet(g);
  ASSERT_EQ(a.size(), 200u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].params.R, b[i].params.R);
    EXPECT_EQ(a[i].params.Cw, b[i].params.Cw);
    differs |= a[i].params.P_rated != c[i].params.P_rated;
    EXPECT_GE(a[i].params.R, 0.75 * g.base.R);
    EXPECT_LE(a[i].params.R, 1.25 * g.base.R);
    EXPECT_GE(a[i].params.Cw, 0.75 * g.base.Cw);
    EXPECT_LE(a[i].params.Cw, 1.25 * g.base.Cw);
    EXPECT_GE(a[i].params.P_rated, 0.75 * g.base.P_rated);
    EXPECT_LE(a[i].params.P_rated, 1.25 * g.base.P_rated);
    EXPECT_NO_THROW(a[i].cfg.validate());
  }
  EXPECT_TRUE(differs);
  g.count = 0;
  EXPECT_THROW(generate_fleet(g), InvalidArgument);
}

TEST(FleetLp, SingleUnitReducesToUnitMpc) {
  auto spec = small_fleet(1, 5);
  const auto meas = at_baseline(spec);
  const std::vector<double> reg{0.3};
  const auto d = dispatch_fleet(spec, meas, reg);
  ASSERT_TRUE(d.solved);
  const auto pb = unit_problem(spec, 0, meas, reg);
  const auto s = solve_mpc(pb);
  EXPECT_NEAR(d.dP[0][0], s.dP[0], 1e-12);
  EXPECT_NEAR(d.dP[0][0], 0.3, 1e-9);
}

TEST(FleetLp, IdenticalUnitsShareTheTarget) {
  auto spec = small_fleet(1, 5);
  spec.units.push_back(spec.units.front());
  const auto meas = at_baseline(spec);
  const auto d = dispatch_fleet(spec, meas, {0.8});
  ASSERT_TRUE(d.solved);
  EXPECT_NEAR(d.dP[0][0] + d.dP[1][0], 0.8, 1e-9);
  // Swapping the units swaps their dispatch.
  std::swap(spec.units[0], spec.units[1]);
  const auto e = dispatch_fleet(spec, meas, {0.8});
  EXPECT_NEAR(e.dP[0][0] + e.dP[1][0], 0.8, 1e-9);
}

TEST(FleetLp, TargetBeyondAggregateCapacityIsClipped) {
  auto spec = small_fleet(3, 2);
  const auto meas = at_baseline(spec);
  const auto f = build_fleet_lp(spec, meas, {1e3});
  const auto r = solve_lp(f.lp);
  double headroom = 0.0, total = 0.0;
  for (std::size_t b = 0; b < f.blocks.size(); ++b) {
    const auto &pb = f.problems[b];
    // Either the switch or the comfort bound limits each unit.
    headroom += std::min(pb.dP_hi, pb.yz_hi - pb.yz0);
    total += r.x[f.blocks[b].dP[0]];
  }
  EXPECT_NEAR(total, headroom, 1e-6);
}

TEST(FleetLp, UnitOutsideComfortIsExcluded) {
  auto spec = small_fleet(3, 2);
  auto meas = at_baseline(spec);
  meas.yz0[1] += 5.0;
  const auto d = dispatch_fleet(spec, meas, {0.5});
  ASSERT_EQ(d.excluded.size(), 1u);
  EXPECT_EQ(d.excluded[0], 1u);
  EXPECT_EQ(d.dP[1][0], 0.0);
  EXPECT_NEAR(d.dP[0][0] + d.dP[2][0], 0.5, 1e-9);
}

TEST(FleetLp, RejectsMismatchedMeasurements) {
  auto spec = small_fleet(2, 2);
  auto meas = at_baseline(spec);
  meas.yz0.pop_back();
  EXPECT_THROW(build_fleet_lp(spec, meas, {0.0}), DimensionMismatch);
}

TEST(RunFleet, TracksAggregateTarget) {
  auto spec = small_fleet(4, 9);
  spec.regulation = {0.8, 0.8, -0.6, -0.6, 0.4, 0.0};
  const auto r = run_fleet(spec);
  ASSERT_EQ(r.deviation.size(), spec.regulation.size());
  for (std::size_t k = 0; k < r.deviation.size(); ++k)
    EXPECT_NEAR(r.commanded[k], spec.regulation[k], 1e-9);
  EXPECT_LE(r.rms_error, 0.05 * 0.8);
  EXPECT_EQ(r.comfort_violations, 0u);
  EXPECT_EQ(r.cycling_violations, 0u);
  // Aggregate power is the sum of the per-unit series.
  for (std::size_t j = 0; j < r.aggregate_P.size(); ++j) {
    double s = 0.0;
    for (const auto &u : r.units)
      s += u.traj.P_r_out[j];
    EXPECT_DOUBLE_EQ(r.aggregate_P[j], s);
  }
}

TEST(RunFleet, IndependentOfThreadCount) {
  auto spec = small_fleet(5, 4);
  spec.regulation = {0.5, -0.5, 0.2};
  spec.threads = 1;
  const auto a = run_fleet(spec);
  spec.threads = 3;
  const auto b = run_fleet(spec);
  EXPECT_EQ(a.deviation, b.deviation);
  EXPECT_EQ(a.aggregate_P, b.aggregate_P);
  for (std::size_t i = 0; i < a.units.size(); ++i)
    EXPECT_EQ(a.units[i].traj.T, b.units[i].traj.T);
}

TEST(FleetLp, ThermalHeadroomLimitsAdjustment) {
  auto spec = small_fleet(1, 3);
  auto meas = at_baseline(spec);
  const auto &u = spec.units[0];
  // Zone 0.1 °C below the margined upper limit (band ±1 °C, margin 0.1 °C).
  const double T0 = spec.ambient(0.0), T = u.comfort.T_ref + 0.8;
  meas.yz0[0] = (T - T0) / u.params.R;
  const auto pb = unit_problem(spec, 0, meas, {5.0});
  // Over one 300 s step the zone may gain 0.1 °C: Cw·0.1/300 kW above loss.
  const double base = (u.comfort.T_ref - T0) / u.params.R;
  const double thermal = u.params.Cw * 0.1 / 300.0 + meas.yz0[0] - base;
  EXPECT_NEAR(pb.dP_hi, std::min(thermal, u.params.P_rated - base), 1e-9);
  EXPECT_LT(pb.dP_hi, u.params.P_rated - base);
  const auto d = dispatch_fleet(spec, meas, {5.0});
  EXPECT_LE(d.dP[0][0], pb.dP_hi + 1e-9);
}
