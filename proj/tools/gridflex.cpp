// Command-line front end: simulate, validate, fleet and metrics runs driven
// by a JSON scenario or a named preset.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gridflex/io.hpp"
#include "gridflex/scenario.hpp"

namespace fs = std::filesystem;
using namespace gridflex;

namespace {

constexpr int kExitFail = 2; ///< a run completed but a check did not pass

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string trajectory;
  std::string baseline;
  std::string controller_log;
};

ScenarioConfig resolve(const Options &o) {
  if (!o.config.empty() && !o.preset.empty())
    throw ConfigError("--config and --preset are mutually exclusive");
  ScenarioConfig c = o.config.empty() ? preset(o.preset.empty() ? "paper-v-d" : o.preset)
                                      : load_config(o.config);
  if (o.seed)
    c.seed = *o.seed;
  if (!o.out.empty())
    c.output_dir = o.out;
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_simulate(const Options &o) {
  const auto c = resolve(o);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_step_experiment(c);
  write_step_outputs(c.output_dir, c, r);
  log(LogLevel::info, "simulate finished in " + format_double(seconds_since(t0)) + " s");
  std::cout << step_summary(c, r).dump(2) << '\n';
  return 0;
}

int cmd_validate(const Options &o) {
  const auto c = resolve(o);
  const fs::path dir = c.output_dir;
  nlohmann::ordered_json report;
  bool flagged = false;
  auto check = [&](const std::string &stem, const Trajectory &traj,
                   std::span<const double> Qdot_u) {
    const auto v = validate_trajectory(traj, c.plant, Qdot_u, c.seed);
    write_validation(dir, stem, v);
    report[stem] = validation_json(v);
    flagged |= !v.flagged.empty();
  };
  if (!o.trajectory.empty()) {
    const auto traj = trajectory_from_table(read_csv_file(o.trajectory), &c.plant);
    std::vector<double> q;
    if (!o.controller_log.empty()) {
      q = read_csv_file(o.controller_log).col("Qdot_u");
      if (q.size() != traj.size())
        throw SchemaError("controller log and trajectory differ in length");
    }
    check(fs::path(o.trajectory).stem().string(), traj, q);
  } else {
    const auto r = run_step_experiment(c);
    check("bang_bang", r.bang_bang, {});
    check("baseline", r.baseline.traj, r.baseline.log.Qdot_u);
    check("controlled", r.dr.traj, r.dr.log.Qdot_u);
  }
  write_json_file(dir / "validation.json", report);
  std::cout << report.dump(2) << '\n';
  return flagged ? kExitFail : 0;
}

int cmd_fleet(const Options &o) {
  const auto c = resolve(o);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_fleet(fleet_spec(c));
  write_fleet_outputs(c.output_dir, c, r);
  log(LogLevel::info, "fleet finished in " + format_double(seconds_since(t0)) + " s");
  const auto s = fleet_summary(c, r);
  std::cout << s.dump(2) << '\n';
  return s["pass"].get<bool>() ? 0 : kExitFail;
}

int cmd_metrics(const Options &o) {
  const auto c = resolve(o);
  if (c.step.dP == 0.0)
    throw ConfigError("step.dP must be non-zero to evaluate a step response");
  const double command = std::round(c.step.time / c.T_s) * c.T_s;
  MetricsReport m;
  if (!o.trajectory.empty() || !o.baseline.empty()) {
    if (o.trajectory.empty() || o.baseline.empty())
      throw ConfigError("--trajectory and --baseline must be given together");
    const auto dr = trajectory_from_table(read_csv_file(o.trajectory), &c.plant);
    const auto base = trajectory_from_table(read_csv_file(o.baseline), &c.plant);
    m = step_metrics(dr, base, command, c.step.dP, c.plant.P_rated, c.metrics);
  } else {
    m = run_step_experiment(c).metrics;
  }
  const auto j = report_json(m);
  write_json_file(fs::path(c.output_dir) / "metrics.json", j);
  std::cout << j.dump(2) << '\n';
  return m.pass() ? 0 : kExitFail;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Energy-space demand-response simulator for HVAC loads"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", o.config, "JSON scenario file")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "Built-in scenario")
        ->check(CLI::IsMember({"paper-v-d", "fleet-50"}));
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", seed, "64-bit seed recorded in every output")
        ->each([&](const std::string &) { o.seed = seed; });
  };

  auto *simulate = app.add_subcommand(
      "simulate", "Thermostat, sliding-mode baseline and step-adjusted runs");
  common(simulate);
  auto *validate = app.add_subcommand("validate", "Energy-model residuals of trajectories");
  common(validate);
  validate->add_option("--trajectory", o.trajectory, "Trajectory CSV (default: simulate)")
      ->check(CLI::ExistingFile);
  validate->add_option("--controller-log", o.controller_log,
                       "Controller log CSV with a Qdot_u column")
      ->check(CLI::ExistingFile);
  auto *fleet = app.add_subcommand("fleet", "Aggregate regulation with a seeded fleet");
  common(fleet);
  auto *metrics = app.add_subcommand("metrics", "Demand-response metrics of a power step");
  common(metrics);
  metrics->add_option("--trajectory", o.trajectory, "Controlled trajectory CSV")
      ->check(CLI::ExistingFile);
  metrics->add_option("--baseline", o.baseline, "Baseline trajectory CSV")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate)
      return cmd_simulate(o);
    if (*validate)
      return cmd_validate(o);
    if (*fleet)
      return cmd_fleet(o);
    return cmd_metrics(o);
  } catch (const Error &e) {
    std::cerr << "gridflex: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "gridflex: unexpected failure: " << e.what() << '\n';
    return 1;
  }
}
