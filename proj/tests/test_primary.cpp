#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gridflex/primary.hpp"

using namespace gridflex;

namespace {

ThermalParams heating() { return ThermalParams::defaults(Mode::heating, 23.9); }

PrimaryControllerConfig fast_cfg() {
  PrimaryControllerConfig cfg;
  cfg.dt = 0.01;
  return cfg;
}

double mean_over(const std::vector<double> &v, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t k = from; k < to; ++k)
    s += v[k];
  return s / static_cast<double>(to - from);
}

} // namespace

TEST(Reference, BaselineOutput) {
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  EXPECT_NEAR(reference_yz(c, 15.0, 2.0, 0.0), 4.45, 1e-12);
  EXPECT_NEAR(reference_yz(c, 15.0, 2.0, 0.3), 4.75, 1e-12);
  EXPECT_NEAR(output_yz(24.0, 15.0, 2.0), 4.5, 1e-12);
  EXPECT_LT(output_yz(20.0, 30.0, 2.0), 0.0);
  EXPECT_THROW(output_yz(20.0, 15.0, 0.0), InvalidArgument);
}

TEST(SlidingLaw, SignAndDeadband) {
  PrimaryControllerConfig cfg;
  EXPECT_EQ(sliding_mode_qdot(0.3, cfg), cfg.alpha);
  EXPECT_EQ(sliding_mode_qdot(-0.3, cfg), -cfg.alpha);
  EXPECT_EQ(sliding_mode_qdot(0.0, cfg), 0.0);
  EXPECT_EQ(thresholded_qdot(cfg.yz_plus, 0.0, cfg), cfg.alpha);
  EXPECT_EQ(thresholded_qdot(cfg.yz_minus, 0.0, cfg), -cfg.alpha);
  EXPECT_EQ(thresholded_qdot(1.001, 1.0, cfg), 0.0);
}

TEST(SlidingLaw, ZeroBandReducesToSignLaw) {
  PrimaryControllerConfig cfg;
  cfg.yz_plus = cfg.yz_minus = 0.0;
  for (double s : {-2.0, -1e-9, 0.0, 1e-9, 2.0})
    EXPECT_EQ(thresholded_qdot(1.0 + s, 1.0, cfg), sliding_mode_qdot(s, cfg));
}

TEST(SwitchUpdate, RampTimeMatchesClosedForm) {
  const double P = 5.0, alpha = 10.0, dt = 1e-3, u0 = 0.2;
  double u = u0;
  std::size_t steps = 0;
  while (u < 1.0) {
    u = switch_update(u, alpha, P, dt);
    ++steps;
  }
  const double expected = (1.0 - u0) * 2.0 * P / alpha;
  EXPECT_NEAR(static_cast<double>(steps) * dt, expected, 2 * dt);
  EXPECT_EQ(switch_update(0.0, -alpha, P, dt), 0.0);
  EXPECT_THROW(switch_update(0.5, alpha, 0.0, dt), InvalidArgument);
}

TEST(OnTime, ClosedFormMatchesSimulatedCrossing) {
  // Cooling at constant capacity yz from T_max until T_min is reached.
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  auto p = ThermalParams::defaults(Mode::cooling, 23.9);
  const double T0 = 30.0, yz = 6.0;
  p.P_rated = yz;
  const double dt = 0.05;
  PlantState s{c.T_max, 1.0, 0.0, 0.0};
  double t = 0.0;
  while (true) {
    const auto n = step_plant(s, p, T0, dt);
    if (n.T <= c.T_min) {
      t += dt * (s.T - c.T_min) / (s.T - n.T);
      break;
    }
    s = n;
    t += dt;
  }
  EXPECT_NEAR(on_time_exact(c, p, T0, yz), t, 1e-3);
  // Capacity that only just holds T_min never gets there.
  EXPECT_TRUE(std::isnan(on_time_exact(c, p, T0, (T0 - c.T_min) / p.R)));
}

TEST(CyclingThresholds, HandComputedLevels) {
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  const auto th = cycling_thresholds(c, heating(), 15.0, 300.0, 900.0);
  EXPECT_NEAR(th.yz_plus, -1.165625, 1e-12);
  EXPECT_NEAR(th.yz_minus, -1.321875, 1e-12);
  EXPECT_NEAR(th.on_time_ratio, 0.0625, 1e-15);
  EXPECT_TRUE(th.assumption_ok);
  const auto slow = cycling_thresholds(c, heating(), 15.0, 300.0, 4000.0);
  EXPECT_FALSE(slow.assumption_ok);
}

TEST(Gains, CalibrationFixedPoint) {
  PrimaryControllerConfig cfg;
  const auto g = calibrate_gains(cfg, 2.5, 0.0);
  EXPECT_DOUBLE_EQ(g.L_bar, 7.5);
  EXPECT_DOUBLE_EQ(g.alpha, 10.0);
  const auto h = calibrate_gains(cfg, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(h.L_bar, 6.0);
  EXPECT_DOUBLE_EQ(h.alpha, 7.0);
  // Safety factor: half the gain plus the plant rate, times 1.5.
  EXPECT_NEAR(h.L_bar, 1.5 * (h.alpha / 2.0 + 0.5), 1e-12);
  EXPECT_NO_THROW(h.validate());
  cfg.alpha = 11.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(calibrate_gains(cfg, 0.0, 0.1), InvalidArgument);
}

TEST(Gains, PlantRateBoundCoversOpenLoopExtremes) {
  const auto p = heating();
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  const double d = plant_rate_bound(p, c, 15.0, 15.0, 300.0);
  // For the RC plant p-dot = −p/τ, largest in magnitude at the start of
  // either open-loop run.
  const double pdot_off = std::abs((c.T_ref - 15.0) / p.R) / p.tau();
  const double pdot_on = std::abs(p.P_rated - (c.T_ref - 15.0) / p.R) / p.tau();
  EXPECT_NEAR(d, std::max(pdot_off, pdot_on), 1e-3 * d);
}

TEST(Gains, ReachTimeBound) {
  EXPECT_NEAR(reach_time_bound(-4.44, 2.5), 4.44 / (std::sqrt(2.0) * 2.5), 1e-15);
}

TEST(PrimaryLoop, RejectsCoarseControllerStep) {
  PrimaryControllerConfig cfg;
  cfg.dt = 0.5;
  EXPECT_THROW(PrimaryLoop(heating(), ComfortSpec{}, cfg, AmbientProfile(15.0),
                           PlantState{23.9, 0.0, 0.0, 0.0}, 300.0),
               StepTooLarge);
}

TEST(PrimaryLoop, ReachesSurfaceWithinBound) {
  PrimaryScenario sc;
  sc.ambient = AmbientProfile(15.0);
  sc.init = {23.9, 0.0, 0.0, 0.0};
  sc.duration = 5.0;
  PrimaryControllerConfig cfg;
  const auto r = run_primary(sc, heating(), ComfortSpec{}, cfg, {});
  ASSERT_TRUE(r.reach_time.has_value());
  EXPECT_NEAR(r.sigma0, -4.45, 1e-3);
  EXPECT_LE(*r.reach_time, reach_time_bound(r.sigma0, cfg.K));
  // |sigma| never grows during the reaching phase.
  const auto &s = r.log.sigma;
  for (std::size_t k = 2; k < s.size() && r.log.t[k] < *r.reach_time; ++k)
    EXPECT_LE(std::abs(s[k]), std::abs(s[k - 1]) + 1e-9);
}

TEST(PrimaryLoop, TracksReferenceAndRespectsCycling) {
  PrimaryScenario sc;
  sc.ambient = AmbientProfile(15.0);
  sc.init = {23.9, 0.0, 0.0, 0.0};
  sc.duration = 3600.0;
  sc.record_stride = 100;
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  const auto r = run_primary(sc, heating(), c, fast_cfg(), {});
  // Mean electrical power over the last half hour equals the baseline.
  const auto &P = r.traj.P_r_in;
  EXPECT_NEAR(mean_over(P, P.size() / 2, P.size() - 1), 4.45, 0.01);
  for (double T : r.traj.T) {
    EXPECT_GE(T, c.T_ref - c.T_db);
    EXPECT_LE(T, c.T_ref + c.T_db);
  }
  std::size_t full = 0;
  for (const auto &iv : r.on_intervals) {
    if (iv.censored)
      continue;
    ++full;
    EXPECT_GE(iv.duration, 300.0 - 1e-6);
    EXPECT_LE(iv.duration, 900.0 + 1e-6);
  }
  EXPECT_GE(full, 2u);
}

TEST(PrimaryLoop, AdjustmentShiftsMeanPower) {
  PrimaryScenario sc;
  sc.ambient = AmbientProfile(15.0);
  sc.init = {23.9, 0.89, 300.0, 0.0};
  sc.duration = 1800.0;
  sc.record_stride = 100;
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  const auto base = run_primary(sc, heating(), c, fast_cfg(), {{0.0}});
  const auto up = run_primary(sc, heating(), c, fast_cfg(), {{0.0, 0.0, 0.0, 0.4}});
  const auto k0 = static_cast<std::size_t>(std::llround(900.0 / base.traj.dt));
  const auto k1 = static_cast<std::size_t>(std::llround(1200.0 / base.traj.dt));
  const double d = mean_over(up.traj.P_r_in, k0, k1) - mean_over(base.traj.P_r_in, k0, k1);
  EXPECT_NEAR(d, 0.4, 0.02);
}

TEST(PrimaryLoop, CoolingModeTracks) {
  PrimaryScenario sc;
  sc.ambient = AmbientProfile(32.0);
  sc.init = {23.9, 0.0, 0.0, 0.0};
  sc.duration = 1800.0;
  sc.record_stride = 100;
  const ComfortSpec c{23.9, 1.4, 22.5, 25.3};
  const auto p = ThermalParams::defaults(Mode::cooling, 23.9);
  const auto r = run_primary(sc, p, c, fast_cfg(), {});
  ASSERT_TRUE(r.reach_time.has_value());
  const auto &P = r.traj.P_r_in;
  // Cooling baseline power is (T0 − T_ref)/R.
  EXPECT_NEAR(mean_over(P, P.size() / 2, P.size() - 1), (32.0 - 23.9) / p.R, 0.01);
}

TEST(PrimaryLoop, Deterministic) {
  PrimaryScenario sc;
  sc.ambient = AmbientProfile({0.0, 600.0}, {14.0, 16.0});
  sc.init = {23.0, 0.3, 0.0, 0.0};
  sc.duration = 600.0;
  sc.record_stride = 50;
  const auto a = run_primary(sc, heating(), ComfortSpec{}, fast_cfg(), {{0.1, -0.2}});
  const auto b = run_primary(sc, heating(), ComfortSpec{}, fast_cfg(), {{0.1, -0.2}});
  EXPECT_EQ(a.traj.T, b.traj.T);
  EXPECT_EQ(a.log.u, b.log.u);
}

TEST(PrimaryLoop, ForcedReferenceLastsOnePeriod) {
  PrimaryLoop loop(heating(), ComfortSpec{}, fast_cfg(), AmbientProfile(15.0),
                   {23.9, 0.89, 300.0, 0.0}, 300.0, 10);
  loop.force_reference(3.0);
  loop.advance(300.0);
  loop.advance(300.0);
  const auto r = loop.finish();
  const auto n = r.log.size();
  EXPECT_DOUBLE_EQ(r.log.yz_ref[1], 3.0);
  EXPECT_NEAR(r.log.yz_ref[n - 2], 4.45, 1e-12);
}
