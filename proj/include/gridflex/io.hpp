#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridflex/error.hpp"
#include "gridflex/fleet.hpp"
#include "gridflex/metrics.hpp"
#include "gridflex/mpc.hpp"
#include "gridflex/params.hpp"
#include "gridflex/plant.hpp"
#include "gridflex/primary.hpp"
#include "gridflex/trajectory.hpp"

namespace gridflex {

// ---------------------------------------------------------------- logging

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity from GRIDFLEX_LOG (error|warn|info|debug), default warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char *v = std::getenv("GRIDFLEX_LOG");
    if (!v)
      return LogLevel::warn;
    const std::string s(v);
    if (s == "error")
      return LogLevel::error;
    if (s == "info")
      return LogLevel::info;
    if (s == "debug")
      return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log(LogLevel level, const std::string &msg) {
  static std::mutex mu;
  if (level > log_level())
    return;
  static const char *names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[gridflex " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

// -------------------------------------------------------------------- CSV

/// Column-oriented numeric table with "# key=value" metadata lines.
struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;

  std::size_t rows() const { return cols.empty() ? 0 : cols.front().size(); }

  bool has(const std::string &name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }

  const std::vector<double> &col(const std::string &name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("missing column '" + name + "'");
    return cols[static_cast<std::size_t>(it - header.begin())];
  }

  void add(const std::string &name, std::vector<double> values) {
    if (!cols.empty() && values.size() != rows())
      throw DimensionMismatch("column '" + name + "' has the wrong length");
    header.push_back(name);
    cols.push_back(std::move(values));
  }
};

/// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream &os, const CsvTable &t) {
  for (const auto &[k, v] : t.meta)
    os << "# " << k << '=' << v << '\n';
  for (std::size_t j = 0; j < t.header.size(); ++j)
    os << (j ? "," : "") << t.header[j];
  os << '\n';
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols.size(); ++j)
      os << (j ? "," : "") << format_double(t.cols[j][i]);
    os << '\n';
  }
}

inline CsvTable read_csv(std::istream &is, const std::string &source = "<stream>") {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        t.meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ','))
      fields.push_back(f);
    if (!line.empty() && line.back() == ',')
      fields.emplace_back();
    if (!have_header) {
      for (auto &h : fields) {
        h.erase(0, h.find_first_not_of(' '));
        h.erase(h.find_last_not_of(' ') + 1);
      }
      t.header = fields;
      t.cols.assign(fields.size(), {});
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw SchemaError(source + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const char *s = fields[j].c_str();
      char *end = nullptr;
      errno = 0;
      const double v = std::strtod(s, &end);
      while (end && *end == ' ')
        ++end;
      if (end == s || (end && *end != '\0'))
        throw SchemaError(source + ":" + std::to_string(lineno) + ": column '" +
                          t.header[j] + "' is not a number: '" + fields[j] + "'");
      t.cols[j].push_back(v);
    }
  }
  if (!have_header)
    throw SchemaError(source + ": no header line");
  return t;
}

inline void write_csv_file(const std::filesystem::path &path, const CsvTable &t) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os)
    throw ConfigError("cannot write '" + path.string() + "'");
  write_csv(os, t);
}

inline CsvTable read_csv_file(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open '" + path.string() + "'");
  return read_csv(is, path.string());
}

inline const std::vector<std::string> &trajectory_columns() {
  static const std::vector<std::string> names{"t", "T", "T0", "u", "P_r_in",
                                              "P_r_out", "E", "p", "yz"};
  return names;
}

inline CsvTable trajectory_table(const Trajectory &traj, std::uint64_t seed) {
  traj.check_consistent();
  CsvTable t;
  t.meta["seed"] = std::to_string(seed);
  t.meta["dt"] = format_double(traj.dt);
  const auto &names = trajectory_columns();
  const std::vector<double> *cols[] = {&traj.t,     &traj.T,       &traj.T0,
                                       &traj.u,     &traj.P_r_in,  &traj.P_r_out,
                                       &traj.E,     &traj.p,       &traj.yz};
  for (std::size_t j = 0; j < names.size(); ++j)
    t.add(names[j], *cols[j]);
  return t;
}

/// Trajectory from a table with at least t, T and T0. Missing derived
/// columns are recomputed from the parameters when provided.
inline Trajectory trajectory_from_table(const CsvTable &t,
                                        const ThermalParams *params = nullptr) {
  Trajectory traj;
  traj.t = t.col("t");
  traj.T = t.col("T");
  traj.T0 = t.col("T0");
  const std::size_t n = traj.t.size();
  if (t.meta.count("dt"))
    traj.dt = std::strtod(t.meta.at("dt").c_str(), nullptr);
  else if (n >= 2)
    traj.dt = traj.t[1] - traj.t[0];
  for (std::size_t k = 1; k < n; ++k)
    if (std::abs(traj.t[k] - traj.t[k - 1] - traj.dt) > 1e-6 * std::max(1.0, traj.dt))
      throw SchemaError("time column must be uniformly spaced");
  auto get = [&](const char *name, std::vector<double> &dst, auto compute) {
    if (t.has(name)) {
      dst = t.col(name);
    } else {
      if (!params)
        throw SchemaError(std::string("missing column '") + name + "'");
      dst.resize(n);
      for (std::size_t k = 0; k < n; ++k)
        dst[k] = compute(k);
    }
  };
  get("u", traj.u, [&](std::size_t) -> double {
    throw SchemaError("missing column 'u'");
  });
  get("P_r_in", traj.P_r_in, [&](std::size_t k) { return params->P_rated * traj.u[k]; });
  get("P_r_out", traj.P_r_out,
      [&](std::size_t k) { return params->heat_injection(traj.T[k], traj.u[k]); });
  get("E", traj.E, [&](std::size_t k) { return params->Cw * (traj.T[k] - traj.T0[k]); });
  get("p", traj.p, [&](std::size_t k) {
    return params->Cw * params->dTdt(traj.T[k], traj.T0[k], traj.u[k]);
  });
  get("yz", traj.yz, [&](std::size_t k) { return (traj.T[k] - traj.T0[k]) / params->R; });
  traj.check_consistent();
  return traj;
}

enum class TemperatureUnit { celsius, fahrenheit };

inline TemperatureUnit unit_from_string(const std::string &s) {
  if (s == "celsius")
    return TemperatureUnit::celsius;
  if (s == "fahrenheit")
    return TemperatureUnit::fahrenheit;
  throw ConfigError("units must be 'celsius' or 'fahrenheit', got '" + s + "'");
}

inline double to_celsius(double v, TemperatureUnit u) {
  return u == TemperatureUnit::fahrenheit ? fahrenheit_to_celsius(v) : v;
}

/// Ambient profile from columns t and T0 in the given unit.
inline AmbientProfile ambient_from_table(const CsvTable &t, TemperatureUnit unit) {
  std::vector<double> T0 = t.col("T0");
  for (double &v : T0)
    v = to_celsius(v, unit);
  return AmbientProfile(t.col("t"), std::move(T0));
}

/// Regulation targets from columns k and P_reg (kW), ordered by k.
inline std::vector<double> regulation_from_table(const CsvTable &t) {
  const auto &k = t.col("k");
  const auto &P = t.col("P_reg");
  for (std::size_t i = 0; i < k.size(); ++i)
    if (k[i] != static_cast<double>(i))
      throw SchemaError("regulation periods must be numbered 0, 1, 2, ...");
  return P;
}

// ------------------------------------------------------------- scenario

inline constexpr int kSchemaVersion = 1;

struct StepConfig {
  double dP = 0.2;      ///< kW
  double time = 1800.0; ///< s, rounded to a T_s boundary
};

struct MpcConfig {
  double T_t = 300.0;
  std::size_t horizon_steps = 12;
  double mu_e = 10.0;
  double mu_reg = 100.0;
  double soft_penalty = 100.0;
  bool hard_bounds = false;
  std::vector<double> regulation; ///< per T_t period, kW
};

struct FleetConfig {
  std::size_t count = 50;
  double spread = 0.25;
  double T0_nominal = 17.0;
  double dt = 0.01;
  double scale = 5.0;             ///< kW per unit of the normalised signal
  std::vector<double> regulation; ///< normalised, per T_t period
  unsigned threads = 0;
};

/// Everything one run needs. Temperatures are stored in °C.
struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name = "custom";
  TemperatureUnit units = TemperatureUnit::celsius;
  std::uint64_t seed = 1;
  ThermalParams plant = ThermalParams::defaults(Mode::heating, 23.9);
  ComfortSpec comfort;
  PrimaryControllerConfig controller;
  bool calibrate_gains = true;
  AmbientProfile ambient = AmbientProfile(15.0);
  std::string ambient_path;
  PlantState initial{23.9, 0.0, 0.0, 0.0};
  double duration = 7200.0;
  double T_s = 300.0;
  std::size_t record_stride = 100;
  StepConfig step;
  MpcConfig mpc;
  FleetConfig fleet;
  MetricsSpec metrics;
  std::string output_dir = "out";

  /// Controller gains for the run: calibrated from the plant when asked.
  PrimaryControllerConfig controller_for_run() const {
    if (!calibrate_gains)
      return controller;
    const double d = plant_rate_bound(plant, comfort, ambient.min(), ambient.max(), T_s);
    return gridflex::calibrate_gains(controller, controller.K, d);
  }

  void validate() const {
    if (schema_version != kSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
    plant.validate();
    comfort.validate();
    controller_for_run().validate();
    metrics.validate();
    if (!(duration > 0.0) || !(T_s > 0.0))
      throw ConfigError("run.duration and run.T_s must be positive");
    if (controller.dt > T_s)
      throw ConfigError("controller.dt must not exceed run.T_s");
    const double r = T_s / controller.dt;
    if (std::abs(r - std::round(r)) > 1e-6 * r)
      throw ConfigError("run.T_s must be an integer multiple of controller.dt");
    const double q = mpc.T_t / T_s;
    if (q < 1.0 - 1e-12 || std::abs(q - std::round(q)) > 1e-9)
      throw ConfigError("mpc.T_t must be an integer multiple of run.T_s");
    if (record_stride == 0)
      throw ConfigError("run.record_stride must be positive");
  }
};

namespace detail {

/// Reads one JSON object, remembering which keys were used so that unknown
/// keys can be rejected.
class ObjectReader {
public:
  ObjectReader(const nlohmann::json &j, std::string where)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object())
      throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string &key) const { return j_.contains(key); }

  template <class T> void get(const std::string &key, T &out) {
    if (!j_.contains(key))
      return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json &sub(const std::string &key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto &[k, v] : j_.items())
      if (!used_.count(k))
        throw ConfigError("unknown field '" + k + "' in " + where_);
  }

private:
  const nlohmann::json &j_;
  std::string where_;
  std::set<std::string> used_;
};

} // namespace detail

/// Parse a scenario; file paths are resolved relative to `base_dir`.
inline ScenarioConfig config_from_json(const nlohmann::json &j,
                                       const std::filesystem::path &base_dir = ".") {
  ScenarioConfig c;
  detail::ObjectReader top(j, "config");
  if (!j.contains("schema_version"))
    throw ConfigError("config.schema_version is required");
  top.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  top.get("name", c.name);
  std::string units = "celsius";
  top.get("units", units);
  c.units = unit_from_string(units);
  const auto T = [&](double v) { return to_celsius(v, c.units); };
  const double dT = c.units == TemperatureUnit::fahrenheit ? 5.0 / 9.0 : 1.0;
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  if (top.has("comfort")) {
    detail::ObjectReader r(top.sub("comfort"), "comfort");
    double T_ref = NAN, T_db = NAN, T_min = NAN, T_max = NAN;
    r.get("T_ref", T_ref);
    r.get("T_db", T_db);
    r.get("T_min", T_min);
    r.get("T_max", T_max);
    r.finish();
    if (!std::isnan(T_ref))
      c.comfort.T_ref = T(T_ref);
    if (!std::isnan(T_db))
      c.comfort.T_db = T_db * dT;
    c.comfort.T_min = std::isnan(T_min) ? c.comfort.T_ref - c.comfort.T_db : T(T_min);
    c.comfort.T_max = std::isnan(T_max) ? c.comfort.T_ref + c.comfort.T_db : T(T_max);
  }

  if (top.has("plant")) {
    detail::ObjectReader r(top.sub("plant"), "plant");
    std::string mode = to_string(c.plant.mode), inj = to_string(c.plant.injection);
    r.get("mode", mode);
    const Mode m = mode_from_string(mode);
    c.plant = ThermalParams::defaults(m, c.comfort.T_ref);
    r.get("injection", inj);
    c.plant.injection = injection_from_string(inj);
    r.get("R", c.plant.R);
    r.get("Cw", c.plant.Cw);
    r.get("P_rated", c.plant.P_rated);
    r.get("Cp", c.plant.Cp);
    double T_sup = NAN;
    r.get("T_sup", T_sup);
    if (!std::isnan(T_sup))
      c.plant.T_sup = T(T_sup);
    c.plant.size_air_flow(c.comfort.T_ref);
    r.get("mdot_a", c.plant.mdot_a);
    r.finish();
  } else {
    c.plant = ThermalParams::defaults(Mode::heating, c.comfort.T_ref);
  }

  if (top.has("controller")) {
    detail::ObjectReader r(top.sub("controller"), "controller");
    auto &k = c.controller;
    r.get("calibrate", c.calibrate_gains);
    r.get("alpha", k.alpha);
    r.get("K", k.K);
    r.get("L_bar", k.L_bar);
    r.get("dt", k.dt);
    r.get("tau_min_on", k.tau_min_on);
    r.get("tau_max_on", k.tau_max_on);
    r.get("tau_min_off", k.tau_min_off);
    r.get("yz_plus", k.yz_plus);
    r.get("yz_minus", k.yz_minus);
    r.get("reach_band", k.reach_band);
    r.get("enforce_cycling", k.enforce_cycling);
    r.finish();
  }

  if (top.has("ambient")) {
    detail::ObjectReader r(top.sub("ambient"), "ambient");
    double constant = NAN;
    std::vector<double> t, T0;
    r.get("constant", constant);
    r.get("t", t);
    r.get("T0", T0);
    r.get("path", c.ambient_path);
    r.finish();
    const int given = !std::isnan(constant) + !t.empty() + !c.ambient_path.empty();
    if (given != 1)
      throw ConfigError("ambient needs exactly one of 'constant', 't'/'T0' or 'path'");
    if (!std::isnan(constant)) {
      c.ambient = AmbientProfile(T(constant));
    } else if (!t.empty()) {
      for (double &v : T0)
        v = T(v);
      try {
        c.ambient = AmbientProfile(t, T0);
      } catch (const Error &e) {
        throw ConfigError(std::string("ambient: ") + e.what());
      }
    } else {
      const auto p = base_dir / c.ambient_path;
      if (!std::filesystem::exists(p))
        throw ConfigError("ambient.path: file '" + p.string() + "' does not exist");
      c.ambient = ambient_from_table(read_csv_file(p), c.units);
    }
  }

  c.initial.T = c.comfort.T_ref;
  if (top.has("initial")) {
    detail::ObjectReader r(top.sub("initial"), "initial");
    double T0 = NAN;
    r.get("T", T0);
    if (!std::isnan(T0))
      c.initial.T = T(T0);
    r.get("u", c.initial.u);
    r.get("on_timer", c.initial.on_timer);
    r.finish();
  }

  if (top.has("run")) {
    detail::ObjectReader r(top.sub("run"), "run");
    r.get("duration", c.duration);
    r.get("T_s", c.T_s);
    r.get("record_stride", c.record_stride);
    r.finish();
  }

  if (top.has("step")) {
    detail::ObjectReader r(top.sub("step"), "step");
    r.get("dP", c.step.dP);
    r.get("time", c.step.time);
    r.finish();
  }

  if (top.has("mpc")) {
    detail::ObjectReader r(top.sub("mpc"), "mpc");
    r.get("T_t", c.mpc.T_t);
    r.get("horizon_steps", c.mpc.horizon_steps);
    r.get("mu_e", c.mpc.mu_e);
    r.get("mu_reg", c.mpc.mu_reg);
    r.get("soft_penalty", c.mpc.soft_penalty);
    r.get("hard_bounds", c.mpc.hard_bounds);
    r.get("regulation", c.mpc.regulation);
    std::string path;
    r.get("regulation_path", path);
    r.finish();
    if (!path.empty()) {
      const auto p = base_dir / path;
      if (!std::filesystem::exists(p))
        throw ConfigError("mpc.regulation_path: file '" + p.string() + "' does not exist");
      c.mpc.regulation = regulation_from_table(read_csv_file(p));
    }
  }

  if (top.has("fleet")) {
    detail::ObjectReader r(top.sub("fleet"), "fleet");
    r.get("count", c.fleet.count);
    r.get("spread", c.fleet.spread);
    double T0n = NAN;
    r.get("T0_nominal", T0n);
    if (!std::isnan(T0n))
      c.fleet.T0_nominal = T(T0n);
    r.get("dt", c.fleet.dt);
    r.get("scale", c.fleet.scale);
    r.get("regulation", c.fleet.regulation);
    r.get("threads", c.fleet.threads);
    r.finish();
  }

  if (top.has("metrics")) {
    detail::ObjectReader r(top.sub("metrics"), "metrics");
    auto &m = c.metrics;
    r.get("t_re_max", m.t_re_max);
    r.get("t_ra_max", m.t_ra_max);
    r.get("rmt_fraction", m.rmt_fraction);
    r.get("rmvt_fraction", m.rmvt_fraction);
    r.get("t_a_min", m.t_a_min);
    r.get("onset_fraction", m.onset_fraction);
    r.get("T_t", m.T_t);
    double basis = NAN;
    r.get("rmt_basis", basis);
    m.rmt_basis = basis;
    r.finish();
  }
  top.finish();
  try {
    c.validate();
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Serialise in °C with every field explicit.
inline nlohmann::ordered_json config_to_json(const ScenarioConfig &c) {
  nlohmann::ordered_json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["units"] = "celsius";
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["comfort"] = {{"T_ref", c.comfort.T_ref},
                  {"T_db", c.comfort.T_db},
                  {"T_min", c.comfort.T_min},
                  {"T_max", c.comfort.T_max}};
  j["plant"] = {{"mode", to_string(c.plant.mode)},
                {"injection", to_string(c.plant.injection)},
                {"R", c.plant.R},
                {"Cw", c.plant.Cw},
                {"P_rated", c.plant.P_rated},
                {"Cp", c.plant.Cp},
                {"T_sup", c.plant.T_sup},
                {"mdot_a", c.plant.mdot_a}};
  const auto &k = c.controller;
  j["controller"] = {{"calibrate", c.calibrate_gains}, {"alpha", k.alpha},
                     {"K", k.K},
                     {"L_bar", k.L_bar},
                     {"dt", k.dt},
                     {"tau_min_on", k.tau_min_on},
                     {"tau_max_on", k.tau_max_on},
                     {"tau_min_off", k.tau_min_off},
                     {"yz_plus", k.yz_plus},
                     {"yz_minus", k.yz_minus},
                     {"reach_band", k.reach_band},
                     {"enforce_cycling", k.enforce_cycling}};
  if (!c.ambient_path.empty())
    j["ambient"] = {{"t", c.ambient.times()}, {"T0", c.ambient.values()}};
  else if (c.ambient.times().size() == 1)
    j["ambient"] = {{"constant", c.ambient.values().front()}};
  else
    j["ambient"] = {{"t", c.ambient.times()}, {"T0", c.ambient.values()}};
  j["initial"] = {{"T", c.initial.T}, {"u", c.initial.u}, {"on_timer", c.initial.on_timer}};
  j["run"] = {{"duration", c.duration}, {"T_s", c.T_s}, {"record_stride", c.record_stride}};
  j["step"] = {{"dP", c.step.dP}, {"time", c.step.time}};
  j["mpc"] = {{"T_t", c.mpc.T_t},
              {"horizon_steps", c.mpc.horizon_steps},
              {"mu_e", c.mpc.mu_e},
              {"mu_reg", c.mpc.mu_reg},
              {"soft_penalty", c.mpc.soft_penalty},
              {"hard_bounds", c.mpc.hard_bounds},
              {"regulation", c.mpc.regulation}};
  j["fleet"] = {{"count", c.fleet.count},
                {"spread", c.fleet.spread},
                {"T0_nominal", c.fleet.T0_nominal},
                {"dt", c.fleet.dt},
                {"scale", c.fleet.scale},
                {"regulation", c.fleet.regulation},
                {"threads", c.fleet.threads}};
  const auto &m = c.metrics;
  j["metrics"] = {{"t_re_max", m.t_re_max},
                  {"t_ra_max", m.t_ra_max},
                  {"rmt_fraction", m.rmt_fraction},
                  {"rmvt_fraction", m.rmvt_fraction},
                  {"t_a_min", m.t_a_min},
                  {"onset_fraction", m.onset_fraction},
                  {"T_t", m.T_t}};
  if (!std::isnan(m.rmt_basis))
    j["metrics"]["rmt_basis"] = m.rmt_basis;
  return j;
}

/// Regulation pattern used by the secondary-control and fleet presets:
/// alternating half-hour and hour blocks, normalised to a peak of one.
inline std::vector<double> regulation_pattern() {
  std::vector<double> r;
  const std::pair<double, int> blocks[] = {{-0.6, 6}, {1.0, 12}, {-0.4, 6}, {0.8, 12}};
  for (const auto &[v, n] : blocks)
    r.insert(r.end(), static_cast<std::size_t>(n), v);
  return r;
}

/// Single-unit step-tracking experiment: T_ref = 75 °F with a 5 °F comfort
/// band, rising ambient, +0.2 kW adjustment half an hour in.
inline ScenarioConfig preset_paper_v_d() {
  ScenarioConfig c;
  c.name = "paper-v-d";
  c.units = TemperatureUnit::fahrenheit;
  c.comfort = ComfortSpec::around(fahrenheit_to_celsius(75.0), 2.5 * 5.0 / 9.0);
  c.plant = ThermalParams::defaults(Mode::heating, c.comfort.T_ref);
  c.controller.dt = 1e-3;
  c.ambient = AmbientProfile({0.0, 3600.0, 7200.0, 9000.0}, {15.0, 16.5, 18.0, 18.0});
  c.initial = {c.comfort.T_ref, 0.0, 0.0, 0.0};
  c.duration = 7200.0;
  c.T_s = 300.0;
  c.record_stride = 100;
  c.step = {0.2, 1800.0};
  c.mpc.regulation = regulation_pattern();
  for (double &v : c.mpc.regulation)
    v *= 0.5;
  c.metrics.t_a_min = 1800.0;
  c.metrics.T_t = 300.0;
  return c;
}

/// Fifty heterogeneous units tracking the scaled regulation pattern at
/// 10 ms controller steps.
inline ScenarioConfig preset_fleet_50() {
  ScenarioConfig c;
  c.name = "fleet-50";
  c.comfort = ComfortSpec::around(22.0, 1.0);
  c.plant = ThermalParams::defaults(Mode::heating, c.comfort.T_ref);
  c.controller.dt = 0.01;
  c.ambient = AmbientProfile(17.0);
  c.initial = {c.comfort.T_ref, 0.0, 0.0, 0.0};
  c.T_s = 300.0;
  c.record_stride = 100;
  c.mpc.T_t = 300.0;
  c.mpc.horizon_steps = 1;
  c.mpc.hard_bounds = true;
  c.fleet.count = 50;
  c.fleet.T0_nominal = 17.0;
  c.fleet.dt = 0.01;
  c.fleet.scale = 5.0;
  c.fleet.regulation = regulation_pattern();
  c.duration = c.mpc.T_t * static_cast<double>(c.fleet.regulation.size());
  return c;
}

inline ScenarioConfig preset(const std::string &name) {
  if (name == "paper-v-d")
    return preset_paper_v_d();
  if (name == "fleet-50")
    return preset_fleet_50();
  throw ConfigError("unknown preset '" + name + "' (expected paper-v-d or fleet-50)");
}

} // namespace gridflex
