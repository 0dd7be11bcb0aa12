#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gridflex/error.hpp"
#include "gridflex/lp.hpp"
#include "gridflex/mpc.hpp"
#include "gridflex/params.hpp"
#include "gridflex/primary.hpp"

namespace gridflex {

/// One member of an aggregation.
struct FleetUnit {
  ThermalParams params;
  ComfortSpec comfort;
  PrimaryControllerConfig cfg;
  DroopModel droop;
  PlantState init;
};

/// Heterogeneous population sharing one regulation signal and ambient.
struct FleetSpec {
  std::vector<FleetUnit> units;
  MpcProblem templ;               ///< T_s, T_t, horizon and weights
  std::vector<double> regulation; ///< aggregate target per T_t period, kW
  AmbientProfile ambient;
  std::size_t record_stride = 100;
  unsigned threads = 0; ///< 0 = hardware concurrency
  /// Fraction of each unit's deadband kept clear when bounding the output.
  double bound_margin = 0.05;

  void validate() const {
    if (units.empty())
      throw InvalidArgument("a fleet needs at least one unit");
    for (const auto &u : units) {
      u.params.validate();
      u.comfort.validate();
      u.cfg.validate();
    }
    templ.periods();
  }
};

/// Ranges for the seeded heterogeneity generator.
struct FleetGenerator {
  std::size_t count = 50;
  std::uint64_t seed = 1;
  double spread = 0.25; ///< relative half-width around the defaults
  ThermalParams base = ThermalParams::defaults(Mode::heating, 22.0);
  ComfortSpec comfort = ComfortSpec::around(22.0, 1.0);
  PrimaryControllerConfig cfg;
  double T0_nominal = 15.0; ///< ambient used to place units on their baseline
  double K = 2.5;
};

/// Draw R, Cw and P_rated independently and uniformly within ±spread of the
/// base values; every unit starts at T_ref on its baseline switch position.
inline std::vector<FleetUnit> generate_fleet(const FleetGenerator &g) {
  if (g.count == 0)
    throw InvalidArgument("fleet size must be positive");
  if (!(g.spread >= 0.0 && g.spread < 1.0))
    throw InvalidArgument("spread must lie in [0, 1)");
  std::mt19937_64 rng(g.seed);
  std::uniform_real_distribution<double> U(1.0 - g.spread, 1.0 + g.spread);
  std::vector<FleetUnit> units;
  units.reserve(g.count);
  for (std::size_t i = 0; i < g.count; ++i) {
    FleetUnit u;
    u.params = g.base;
    u.params.R *= U(rng);
    u.params.Cw *= U(rng);
    u.params.P_rated *= U(rng);
    u.params.size_air_flow(g.comfort.T_ref);
    u.comfort = g.comfort;
    const double rate = plant_rate_bound(u.params, u.comfort, g.T0_nominal,
                                         g.T0_nominal, 300.0);
    u.cfg = calibrate_gains(g.cfg, g.K, rate);
    u.droop = droop_from_params(u.params, u.cfg);
    const double base = reference_yz(u.comfort, g.T0_nominal, u.params.R, 0.0);
    const double u0 = std::clamp(u.params.sign() * base / u.params.P_rated, 0.0, 1.0);
    // Units already running are taken as past their minimum ON time.
    u.init = {u.comfort.T_ref, u0, compressor_on(u0) ? u.cfg.tau_min_on : 0.0, 0.0};
    units.push_back(u);
  }
  return units;
}

/// Inputs measured at a regulation boundary.
struct FleetMeasurement {
  std::vector<double> yz0;
  std::vector<double> dP_prev;
  std::vector<double> yz_ref_prev;
  double t = 0.0;
};

/// Fleet LP with the per-unit blocks it contains; units left out (saturated
/// at a comfort bound) are listed separately and receive no adjustment.
struct FleetLp {
  LinearProgram lp;
  std::vector<MpcBlock> blocks;
  std::vector<std::size_t> members; ///< unit index of each block
  std::vector<std::size_t> excluded;
  std::vector<std::size_t> t;
  std::vector<MpcProblem> problems;
};

/// Per-unit problem for the fleet LP: hard output bounds, switch and thermal
/// capacity limits on the adjustment, baseline from the ambient forecast.
inline MpcProblem unit_problem(const FleetSpec &spec, std::size_t i,
                               const FleetMeasurement &meas,
                               const std::vector<double> &reg_window) {
  const auto &u = spec.units[i];
  MpcProblem pb = spec.templ;
  pb.hard_bounds = true;
  pb.droop = u.droop;
  pb.baseline_P.clear();
  for (std::size_t n = 0; n < pb.horizon_steps; ++n) {
    const double ta = meas.t + static_cast<double>(n) * pb.T_s;
    const double T0 = 0.5 * (spec.ambient(ta) + spec.ambient(ta + pb.T_s));
    pb.baseline_P.push_back(reference_yz(u.comfort, T0, u.params.R, 0.0));
  }
  const double T0_now = spec.ambient(meas.t);
  auto [lo, hi] = output_bounds(u.comfort, T0_now, u.params.R);
  const double margin = spec.bound_margin * (hi - lo);
  pb.yz_lo = lo + margin;
  pb.yz_hi = hi - margin;
  // The switch can only deliver between zero and rated power.
  const double base0 = *std::min_element(pb.baseline_P.begin(), pb.baseline_P.end());
  const double base1 = *std::max_element(pb.baseline_P.begin(), pb.baseline_P.end());
  if (u.params.mode == Mode::heating) {
    pb.dP_lo = -base0;
    pb.dP_hi = u.params.P_rated - base1;
  } else {
    pb.dP_lo = -u.params.P_rated - base0;
    pb.dP_hi = -base1;
  }
  // The droop relation moves the output with the reference at once, but the
  // zone temperature integrates the offset between absorbed power and loss,
  // Cw·dT/dt = yz_ref − yz. Keep the temperature reached over the horizon
  // inside the margined band, spreading the headroom evenly across steps.
  const double T_now = T0_now + u.params.R * meas.yz0[i];
  const double T_margin = spec.bound_margin * (u.comfort.T_max - u.comfort.T_min);
  const double per_step =
      u.params.Cw / (static_cast<double>(pb.horizon_steps) * pb.T_s);
  for (double b : pb.baseline_P) {
    pb.dP_hi = std::min(pb.dP_hi,
                        (u.comfort.T_max - T_margin - T_now) * per_step + meas.yz0[i] - b);
    pb.dP_lo = std::max(pb.dP_lo,
                        (u.comfort.T_min + T_margin - T_now) * per_step + meas.yz0[i] - b);
  }
  pb.yz0 = meas.yz0[i];
  pb.dP_prev = meas.dP_prev[i];
  pb.yz_ref_prev = meas.yz_ref_prev[i];
  pb.regulation = reg_window;
  return pb;
}

/// Assemble the aggregate LP: duplicated unit constraints, one shared
/// regulation epigraph on the summed adjustment.
inline FleetLp build_fleet_lp(const FleetSpec &spec, const FleetMeasurement &meas,
                              const std::vector<double> &reg_window) {
  spec.validate();
  const std::size_t N = spec.units.size();
  if (meas.yz0.size() != N || meas.dP_prev.size() != N ||
      meas.yz_ref_prev.size() != N)
    throw DimensionMismatch("measurement vectors must have one entry per unit");
  FleetLp out;
  for (std::size_t i = 0; i < N; ++i) {
    MpcProblem pb = unit_problem(spec, i, meas, reg_window);
    pb.validate();
    // A unit whose output already sits outside its comfort bounds, or whose
    // capacity range excludes zero, has no flexibility this period.
    bool flexible =
        !(pb.yz0 < pb.yz_lo || pb.yz0 > pb.yz_hi || pb.dP_lo > 0.0 || pb.dP_hi < 0.0);
    // The predicted output and the capacity range may still admit no common
    // adjustment; the unit's own hard-bounded problem decides.
    if (flexible) {
      try {
        solve_mpc(pb);
      } catch (const Infeasible &) {
        flexible = false;
      }
    }
    if (!flexible) {
      out.excluded.push_back(i);
      continue;
    }
    MpcProblem shared = pb;
    shared.mu_reg = 0.0;
    out.blocks.push_back(add_unit_block(out.lp, shared));
    out.members.push_back(i);
    out.problems.push_back(pb);
  }
  MpcProblem agg = spec.templ;
  agg.regulation = reg_window;
  out.t = add_regulation_epigraph(out.lp, out.blocks, agg);
  return out;
}

/// Per-period dispatch decision.
struct FleetDispatch {
  std::vector<std::vector<double>> dP; ///< [unit][step in period]
  std::vector<std::size_t> excluded;
  double objective = 0.0;
  double max_violation = 0.0;
  bool solved = true;
};

inline FleetDispatch dispatch_fleet(const FleetSpec &spec,
                                    const FleetMeasurement &meas,
                                    const std::vector<double> &reg_window) {
  const std::size_t m = spec.templ.steps_per_period();
  FleetDispatch d;
  d.dP.assign(spec.units.size(), std::vector<double>(m, 0.0));
  auto f = build_fleet_lp(spec, meas, reg_window);
  d.excluded = f.excluded;
  if (f.blocks.empty())
    return d;
  try {
    const auto r = solve_lp(f.lp);
    d.objective = r.objective;
    d.max_violation = f.lp.max_violation(r.x);
    for (std::size_t b = 0; b < f.blocks.size(); ++b)
      for (std::size_t n = 0; n < m; ++n)
        d.dP[f.members[b]][n] = r.x[f.blocks[b].dP[n]];
  } catch (const Infeasible &) {
    d.solved = false;
  }
  return d;
}

struct FleetEvent {
  std::size_t period;
  std::size_t unit;
  std::string what;
};

struct FleetResult {
  std::vector<double> P_reg;        ///< per period, kW
  std::vector<double> deviation;    ///< realized aggregate deviation per period, kW
  std::vector<double> commanded;    ///< Σ commanded adjustment per period, kW
  std::vector<double> t_rec;        ///< recording instants
  std::vector<double> aggregate_P;  ///< Σ_units heat delivered per sample, kW
  std::vector<PrimaryResult> units; ///< demand-response runs
  std::vector<PrimaryResult> baselines;
  std::vector<FleetEvent> events;
  std::vector<double> dP_dispersion; ///< per period std-dev of unit |dP|
  double rms_error = 0.0;
  double max_lp_violation = 0.0;
  std::size_t comfort_violations = 0; ///< samples outside [T_ref ± T_db]
  std::size_t cycling_violations = 0; ///< uncensored ON intervals out of range
};

/// Closed-loop aggregation: at each regulation boundary measure every output,
/// solve the fleet LP, dispatch the adjustments and run all primary loops in
/// parallel until the next boundary. A twin fleet with zero adjustment gives
/// the baseline power.
inline FleetResult run_fleet(const FleetSpec &spec) {
  spec.validate();
  const std::size_t N = spec.units.size();
  const std::size_t m = spec.templ.steps_per_period();
  const double T_s = spec.templ.T_s;
  std::vector<PrimaryLoop> dr, base;
  dr.reserve(N);
  base.reserve(N);
  for (const auto &u : spec.units) {
    dr.emplace_back(u.params, u.comfort, u.cfg, spec.ambient, u.init, T_s,
                    spec.record_stride);
    base.emplace_back(u.params, u.comfort, u.cfg, spec.ambient, u.init, T_s,
                      spec.record_stride);
  }
  unsigned threads = spec.threads ? spec.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(N)));

  FleetResult res;
  FleetMeasurement meas;
  meas.dP_prev.assign(N, 0.0);
  meas.yz_ref_prev.assign(N, std::nan(""));
  const std::size_t periods = spec.regulation.size();
  const std::size_t horizon_periods = spec.templ.periods();

  for (std::size_t k = 0; k < periods; ++k) {
    meas.t = dr.front().time();
    meas.yz0.resize(N);
    for (std::size_t i = 0; i < N; ++i)
      meas.yz0[i] = dr[i].yz();
    const auto window = regulation_window(spec.regulation, k, horizon_periods);
    const auto d = dispatch_fleet(spec, meas, window);
    res.max_lp_violation = std::max(res.max_lp_violation, d.max_violation);
    for (std::size_t i : d.excluded)
      res.events.push_back({k, i, "excluded: no flexibility inside comfort bounds"});
    if (!d.solved)
      res.events.push_back({k, N, "fleet LP infeasible; no adjustment"});

    double commanded = 0.0, mean_abs = 0.0, sq_abs = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (double v : d.dP[i])
        s += v;
      commanded += s / static_cast<double>(m);
      const double a = std::abs(s / static_cast<double>(m));
      mean_abs += a;
      sq_abs += a * a;
    }
    mean_abs /= static_cast<double>(N);
    res.dP_dispersion.push_back(
        std::sqrt(std::max(0.0, sq_abs / static_cast<double>(N) - mean_abs * mean_abs)));
    res.commanded.push_back(commanded);
    res.P_reg.push_back(spec.regulation[k]);

    // Parallel section: each worker owns a contiguous slice of units.
    std::vector<std::thread> pool;
    const std::size_t chunk = (N + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(N, lo + chunk);
      if (lo >= hi)
        break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) {
          for (std::size_t n = 0; n < m; ++n) {
            dr[i].set_adjustment(d.dP[i][n]);
            dr[i].advance(T_s);
            base[i].advance(T_s);
          }
        }
      });
    }
    for (auto &th : pool)
      th.join();

    for (std::size_t i = 0; i < N; ++i) {
      const auto &u = spec.units[i];
      const double T0_end = spec.ambient(meas.t + (static_cast<double>(m) - 1.0) * T_s);
      meas.dP_prev[i] = d.dP[i][m - 1];
      meas.yz_ref_prev[i] = reference_yz(u.comfort, T0_end, u.params.R, d.dP[i][m - 1]);
    }
  }

  res.units.reserve(N);
  res.baselines.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    res.units.push_back(dr[i].finish());
    res.baselines.push_back(base[i].finish());
  }

  // Aggregate power and realized deviation per period.
  const auto &t0 = res.units.front().traj;
  res.t_rec = t0.t;
  res.aggregate_P.assign(t0.size(), 0.0);
  std::vector<double> dev_sample(t0.size(), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const auto &a = res.units[i].traj;
    const auto &b = res.baselines[i].traj;
    for (std::size_t j = 0; j < a.size(); ++j) {
      res.aggregate_P[j] += a.P_r_out[j];
      dev_sample[j] += a.P_r_in[j] - b.P_r_in[j];
    }
  }
  const auto per_period =
      static_cast<std::size_t>(std::llround(spec.templ.T_t / t0.dt));
  double se = 0.0;
  for (std::size_t k = 0; k < periods; ++k) {
    double acc = 0.0;
    for (std::size_t j = k * per_period; j < (k + 1) * per_period && j < dev_sample.size(); ++j)
      acc += dev_sample[j];
    const double dev = acc / static_cast<double>(per_period);
    res.deviation.push_back(dev);
    se += (dev - spec.regulation[k]) * (dev - spec.regulation[k]);
  }
  res.rms_error = periods ? std::sqrt(se / static_cast<double>(periods)) : 0.0;

  for (std::size_t i = 0; i < N; ++i) {
    const auto &u = spec.units[i];
    for (double T : res.units[i].traj.T)
      if (T < u.comfort.T_ref - u.comfort.T_db || T > u.comfort.T_ref + u.comfort.T_db)
        ++res.comfort_violations;
    for (const auto &iv : res.units[i].on_intervals)
      if (!iv.censored && (iv.duration < u.cfg.tau_min_on - 1e-6 ||
                           iv.duration > u.cfg.tau_max_on + 1e-6))
        ++res.cycling_violations;
  }
  return res;
}

} // namespace gridflex
