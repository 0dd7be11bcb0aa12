#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridflex/energy.hpp"
#include "gridflex/fleet.hpp"
#include "gridflex/io.hpp"
#include "gridflex/metrics.hpp"
#include "gridflex/mpc.hpp"
#include "gridflex/plant.hpp"
#include "gridflex/primary.hpp"

namespace gridflex {

inline void write_json_file(const std::filesystem::path &path,
                            const nlohmann::ordered_json &j) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os)
    throw ConfigError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

inline nlohmann::ordered_json optional_json(const std::optional<double> &v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json report_json(const MetricsReport &r) {
  return {{"t_re", optional_json(r.t_re)},
          {"t_ra", optional_json(r.t_ra)},
          {"rmt", r.rmt},
          {"rmt_required", r.rmt_required},
          {"rmvt_band", r.rmvt_band},
          {"worst_deviation", r.worst_deviation},
          {"availability", r.availability},
          {"pass_t_re", r.pass_t_re},
          {"pass_t_ra", r.pass_t_ra},
          {"pass_rmt", r.pass_rmt},
          {"pass_rmvt", r.pass_rmvt},
          {"pass_availability", r.pass_availability},
          {"pass", r.pass()}};
}

// ------------------------------------------------------------ simulate

/// Step-tracking experiment: embedded thermostat, sliding-mode baseline with
/// zero adjustment and the demand-response run with the step applied from
/// the secondary period containing the configured step time.
struct StepRun {
  Trajectory bang_bang;
  PrimaryResult baseline, dr;
  PrimaryControllerConfig cfg;
  double command_time = 0.0;
  MetricsReport metrics;
  EnergyResiduals residuals;
  ImbalanceReport imbalance;
  std::optional<MpcRunResult> mpc;
};

/// Metrics of a step from two trajectories on the same grid. The closing
/// sample of a run covers a single integration step, so it is left out.
inline MetricsReport step_metrics(const Trajectory &dr, const Trajectory &base,
                                  double command_time, double target,
                                  double P_rated, const MetricsSpec &spec) {
  if (dr.size() != base.size())
    throw DimensionMismatch("controlled and baseline trajectories differ in length");
  if (dr.size() < 2)
    throw WindowTooShort("trajectory too short for metrics");
  const std::size_t n = dr.size() - 1;
  return evaluate_step_response(std::span(dr.P_r_in).first(n),
                                std::span(base.P_r_in).first(n), dr.t.front(), dr.dt,
                                command_time, target, P_rated, spec);
}

inline PrimaryScenario primary_scenario(const ScenarioConfig &c) {
  return {c.ambient, c.initial, c.duration, c.T_s, c.record_stride};
}

/// Receding-horizon scenario over the configured regulation signal, starting
/// on the baseline switch position.
inline MpcScenario mpc_scenario(const ScenarioConfig &c, const PrimaryControllerConfig &cfg) {
  MpcScenario sc;
  PlantState init = c.initial;
  const double yz0 = reference_yz(c.comfort, c.ambient(0.0), c.plant.R, 0.0);
  init.u = std::clamp(c.plant.sign() * yz0 / c.plant.P_rated, 0.0, 1.0);
  sc.plant = {c.ambient, init, 0.0, c.T_s, c.record_stride};
  sc.templ.T_s = c.T_s;
  sc.templ.T_t = c.mpc.T_t;
  sc.templ.horizon_steps = c.mpc.horizon_steps;
  sc.templ.mu_e = c.mpc.mu_e;
  sc.templ.mu_reg = c.mpc.mu_reg;
  sc.templ.soft_penalty = c.mpc.soft_penalty;
  sc.templ.hard_bounds = c.mpc.hard_bounds;
  sc.templ.droop = droop_from_params(c.plant, cfg);
  sc.regulation = c.mpc.regulation;
  return sc;
}

inline StepRun run_step_experiment(const ScenarioConfig &c) {
  c.validate();
  StepRun r;
  r.cfg = c.controller_for_run();
  const auto sc = primary_scenario(c);
  log(LogLevel::info, "simulate '" + c.name + "': alpha=" + format_double(r.cfg.alpha) +
                          " kW/s, dt=" + format_double(r.cfg.dt) + " s");
  r.bang_bang = simulate_bang_bang(c.plant, c.comfort, c.ambient, c.initial, c.duration,
                                   r.cfg.dt, c.record_stride);
  const auto periods = static_cast<std::size_t>(std::ceil(c.duration / c.T_s - 1e-9));
  const auto n0 = static_cast<std::size_t>(std::llround(c.step.time / c.T_s));
  r.command_time = static_cast<double>(n0) * c.T_s;
  AdjustmentSchedule step;
  for (std::size_t n = 0; n < periods; ++n)
    step.dP.push_back(n >= n0 ? c.step.dP : 0.0);
  r.baseline = run_primary(sc, c.plant, c.comfort, r.cfg, AdjustmentSchedule{{0.0}});
  r.dr = run_primary(sc, c.plant, c.comfort, r.cfg, step);
  if (c.step.dP != 0.0)
    r.metrics = step_metrics(r.dr.traj, r.baseline.traj, r.command_time, c.step.dP,
                             c.plant.P_rated, c.metrics);
  r.residuals = energy_residuals(r.dr.traj, c.plant, r.dr.log.Qdot_u);
  r.imbalance = power_imbalance_diagnostic(r.dr.traj, c.plant);
  if (!c.mpc.regulation.empty()) {
    log(LogLevel::info, "simulate: receding-horizon run over " +
                            std::to_string(c.mpc.regulation.size()) + " periods");
    r.mpc = run_mpc(mpc_scenario(c, r.cfg), c.plant, c.comfort, r.cfg);
  }
  return r;
}

inline CsvTable controller_table(const ControllerLog &l, std::uint64_t seed, double dt) {
  CsvTable t;
  t.meta["seed"] = std::to_string(seed);
  t.meta["dt"] = format_double(dt);
  t.add("t", l.t);
  t.add("sigma", l.sigma);
  t.add("Qdot_u", l.Qdot_u);
  t.add("u", l.u);
  t.add("yz", l.yz);
  t.add("yz_ref", l.yz_ref);
  t.add("compressor_on", std::vector<double>(l.compressor_on.begin(), l.compressor_on.end()));
  return t;
}

inline nlohmann::ordered_json on_interval_json(const std::vector<OnInterval> &iv) {
  auto a = nlohmann::ordered_json::array();
  for (const auto &i : iv)
    a.push_back({{"start", i.start}, {"duration", i.duration}, {"censored", i.censored}});
  return a;
}

inline nlohmann::ordered_json step_summary(const ScenarioConfig &c, const StepRun &r) {
  double T_min = kInf, T_max = -kInf;
  for (double T : r.dr.traj.T) {
    T_min = std::min(T_min, T);
    T_max = std::max(T_max, T);
  }
  nlohmann::ordered_json j;
  j["scenario"] = c.name;
  j["seed"] = c.seed;
  j["controller"] = {{"alpha", r.cfg.alpha}, {"K", r.cfg.K}, {"L_bar", r.cfg.L_bar},
                     {"dt", r.cfg.dt}};
  j["command_time"] = r.command_time;
  j["step_dP"] = c.step.dP;
  j["reach_time"] = optional_json(r.dr.reach_time);
  j["reach_time_bound"] = reach_time_bound(r.dr.sigma0, r.cfg.K);
  j["sigma0"] = r.dr.sigma0;
  j["T_min"] = T_min;
  j["T_max"] = T_max;
  j["comfort"] = {{"T_min", c.comfort.T_min}, {"T_max", c.comfort.T_max}};
  j["on_intervals"] = on_interval_json(r.dr.on_intervals);
  j["residuals"] = {{"max_storage", r.residuals.max_storage},
                    {"max_tangent", r.residuals.max_tangent},
                    {"max_switch_balance", r.residuals.max_switch_balance},
                    {"max_switch_balance_alt", r.residuals.max_switch_balance_alt}};
  if (c.step.dP != 0.0)
    j["metrics"] = report_json(r.metrics);
  if (r.mpc) {
    j["mpc"] = {{"mismatch_cost", r.mpc->mismatch_cost},
                {"energy_cost", r.mpc->energy_cost},
                {"max_lp_violation", r.mpc->max_lp_violation},
                {"T_min", r.mpc->T_min},
                {"T_max", r.mpc->T_max}};
  }
  return j;
}

/// Write trajectories, the controller log and summary.json into `dir`.
inline void write_step_outputs(const std::filesystem::path &dir, const ScenarioConfig &c,
                               const StepRun &r) {
  write_csv_file(dir / "bang_bang.csv", trajectory_table(r.bang_bang, c.seed));
  write_csv_file(dir / "baseline.csv", trajectory_table(r.baseline.traj, c.seed));
  write_csv_file(dir / "controlled.csv", trajectory_table(r.dr.traj, c.seed));
  write_csv_file(dir / "controller_log.csv",
                 controller_table(r.dr.log, c.seed, r.dr.traj.dt));
  if (r.mpc) {
    CsvTable t;
    t.meta["seed"] = std::to_string(c.seed);
    std::vector<double> k(r.mpc->P_reg.size());
    for (std::size_t i = 0; i < k.size(); ++i)
      k[i] = static_cast<double>(i);
    t.add("k", k);
    t.add("P_reg", r.mpc->P_reg);
    t.add("commanded_dP", r.mpc->commanded_dP);
    t.add("realized_dP", r.mpc->realized_dP);
    t.add("predicted_dyz", r.mpc->predicted_dyz);
    t.add("realized_dyz", r.mpc->realized_dyz);
    write_csv_file(dir / "mpc.csv", t);
  }
  write_json_file(dir / "summary.json", step_summary(c, r));
}

// ------------------------------------------------------------ validate

/// Residual report of one trajectory: per-sample series plus statistics over
/// consecutive windows.
struct ValidationReport {
  EnergyResiduals residuals;
  ImbalanceReport imbalance;
  std::vector<std::size_t> flagged; ///< samples over the storage tolerance
  double window = 60.0;             ///< s
  CsvTable samples, windows;
};

inline ValidationReport validate_trajectory(const Trajectory &traj, const ThermalParams &params,
                                            std::span<const double> Qdot_u,
                                            std::uint64_t seed, double window = 60.0,
                                            double storage_tol = 1e-6) {
  ValidationReport v;
  v.window = window;
  std::vector<double> q(Qdot_u.begin(), Qdot_u.end());
  if (q.empty())
    q.assign(traj.size(), 0.0);
  v.residuals = energy_residuals(traj, params, q);
  v.imbalance = power_imbalance_diagnostic(traj, params);
  for (std::size_t k = 0; k < traj.size(); ++k)
    if (std::abs(v.residuals.storage[k]) > storage_tol)
      v.flagged.push_back(k);

  v.samples.meta["seed"] = std::to_string(seed);
  v.samples.meta["dt"] = format_double(traj.dt);
  v.samples.add("t", traj.t);
  v.samples.add("storage", v.residuals.storage);
  v.samples.add("tangent", v.residuals.tangent);
  v.samples.add("switch_balance", v.residuals.switch_balance);
  v.samples.add("switch_balance_alt", v.residuals.switch_balance_alt);
  v.samples.add("imbalance", v.imbalance.imbalance);
  v.samples.add("accumulated_imbalance", v.imbalance.accumulated);

  const std::size_t w = traj.dt > 0.0
                            ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           std::llround(window / traj.dt)))
                            : 1;
  std::vector<double> t0, ms, mt, mean_imb, acc;
  for (std::size_t a = 0; a < traj.size(); a += w) {
    const std::size_t b = std::min(traj.size(), a + w);
    double s = 0.0, tt = 0.0, im = 0.0;
    for (std::size_t k = a; k < b; ++k) {
      s = std::max(s, std::abs(v.residuals.storage[k]));
      tt = std::max(tt, std::abs(v.residuals.tangent[k]));
      im += v.imbalance.imbalance[k];
    }
    t0.push_back(traj.t[a]);
    ms.push_back(s);
    mt.push_back(tt);
    mean_imb.push_back(im / static_cast<double>(b - a));
    acc.push_back(v.imbalance.accumulated[b - 1]);
  }
  v.windows.meta["seed"] = std::to_string(seed);
  v.windows.meta["window"] = format_double(window);
  v.windows.add("t_start", t0);
  v.windows.add("max_storage", ms);
  v.windows.add("max_tangent", mt);
  v.windows.add("mean_imbalance", mean_imb);
  v.windows.add("accumulated_imbalance", acc);
  return v;
}

inline nlohmann::ordered_json validation_json(const ValidationReport &v) {
  return {{"max_storage", v.residuals.max_storage},
          {"max_tangent", v.residuals.max_tangent},
          {"max_switch_balance", v.residuals.max_switch_balance},
          {"max_switch_balance_alt", v.residuals.max_switch_balance_alt},
          {"final_accumulated_imbalance",
           v.imbalance.accumulated.empty() ? 0.0 : v.imbalance.accumulated.back()},
          {"flagged_samples", v.flagged.size()},
          {"first_flagged_t", v.flagged.empty() ? nlohmann::ordered_json(nullptr)
                                                : nlohmann::ordered_json(
                                                      v.samples.col("t")[v.flagged.front()])},
          {"window", v.window}};
}

inline void write_validation(const std::filesystem::path &dir, const std::string &stem,
                             const ValidationReport &v) {
  write_csv_file(dir / (stem + "_residuals.csv"), v.samples);
  write_csv_file(dir / (stem + "_windows.csv"), v.windows);
}

// --------------------------------------------------------------- fleet

inline FleetSpec fleet_spec(const ScenarioConfig &c) {
  c.validate();
  FleetGenerator g;
  g.count = c.fleet.count;
  g.seed = c.seed;
  g.spread = c.fleet.spread;
  g.base = c.plant;
  g.comfort = c.comfort;
  g.cfg = c.controller;
  g.cfg.dt = c.fleet.dt;
  g.T0_nominal = c.fleet.T0_nominal;
  g.K = c.controller.K;
  FleetSpec spec;
  spec.units = generate_fleet(g);
  spec.templ.T_s = c.T_s;
  spec.templ.T_t = c.mpc.T_t;
  spec.templ.horizon_steps = c.mpc.horizon_steps;
  spec.templ.mu_e = c.mpc.mu_e;
  spec.templ.mu_reg = c.mpc.mu_reg;
  spec.templ.soft_penalty = c.mpc.soft_penalty;
  spec.templ.hard_bounds = c.mpc.hard_bounds;
  spec.ambient = c.ambient;
  spec.record_stride = c.record_stride;
  spec.threads = c.fleet.threads;
  for (double v : c.fleet.regulation)
    spec.regulation.push_back(v * c.fleet.scale);
  return spec;
}

inline double max_abs(const std::vector<double> &v) {
  double m = 0.0;
  for (double x : v)
    m = std::max(m, std::abs(x));
  return m;
}

inline nlohmann::ordered_json fleet_summary(const ScenarioConfig &c, const FleetResult &r) {
  const double peak = max_abs(r.P_reg);
  const double rel = peak > 0.0 ? r.rms_error / peak : 0.0;
  auto events = nlohmann::ordered_json::array();
  for (const auto &e : r.events)
    events.push_back({{"period", e.period}, {"unit", e.unit}, {"what", e.what}});
  return {{"scenario", c.name},
          {"seed", c.seed},
          {"units", r.units.size()},
          {"periods", r.P_reg.size()},
          {"max_abs_P_reg", peak},
          {"rms_error", r.rms_error},
          {"rms_error_fraction", rel},
          {"comfort_violations", r.comfort_violations},
          {"cycling_violations", r.cycling_violations},
          {"max_lp_violation", r.max_lp_violation},
          {"events", events},
          {"pass", rel <= 0.05 && r.comfort_violations == 0 && r.cycling_violations == 0}};
}

inline void write_fleet_outputs(const std::filesystem::path &dir, const ScenarioConfig &c,
                                const FleetResult &r) {
  CsvTable agg;
  agg.meta["seed"] = std::to_string(c.seed);
  agg.meta["T_t"] = format_double(c.mpc.T_t);
  std::vector<double> k(r.P_reg.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    k[i] = static_cast<double>(i);
  agg.add("k", k);
  agg.add("P_reg", r.P_reg);
  agg.add("P_aggregate_deviation", r.deviation);
  agg.add("commanded", r.commanded);
  agg.add("dP_dispersion", r.dP_dispersion);
  write_csv_file(dir / "aggregate.csv", agg);

  CsvTable power;
  power.meta["seed"] = std::to_string(c.seed);
  power.add("t", r.t_rec);
  power.add("P_aggregate", r.aggregate_P);
  write_csv_file(dir / "aggregate_power.csv", power);

  for (std::size_t i = 0; i < r.units.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "unit_%03zu.csv", i);
    write_csv_file(dir / "units" / name, trajectory_table(r.units[i].traj, c.seed));
  }
  write_json_file(dir / "fleet_summary.json", fleet_summary(c, r));
}

} // namespace gridflex
