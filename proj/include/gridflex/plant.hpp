#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridflex/energy.hpp"
#include "gridflex/error.hpp"
#include "gridflex/numerics.hpp"
#include "gridflex/params.hpp"
#include "gridflex/trajectory.hpp"

namespace gridflex {

/// Piecewise-linear ambient temperature T0(t); held constant outside the
/// breakpoint range.
class AmbientProfile {
public:
  AmbientProfile() = default;
  explicit AmbientProfile(double constant) : t_{0.0}, T0_{constant} {}
  AmbientProfile(std::vector<double> t, std::vector<double> T0)
      : t_(std::move(t)), T0_(std::move(T0)) {
    if (t_.empty() || t_.size() != T0_.size())
      throw InvalidArgument("ambient profile needs matching, non-empty columns");
    for (std::size_t k = 1; k < t_.size(); ++k)
      if (!(t_[k] > t_[k - 1]))
        throw InvalidArgument("ambient breakpoints must be strictly increasing");
    for (double v : T0_)
      require_finite(v, "ambient temperature");
  }

  double operator()(double t) const {
    if (t_.empty())
      throw InvalidArgument("ambient profile is empty");
    if (t <= t_.front())
      return T0_.front();
    if (t >= t_.back())
      return T0_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - t_.begin());
    const double w = (t - t_[j - 1]) / (t_[j] - t_[j - 1]);
    return T0_[j - 1] + w * (T0_[j] - T0_[j - 1]);
  }

  /// True when the breakpoints cover [t0, t1].
  bool covers(double t0, double t1) const {
    return !t_.empty() && (t_.size() == 1 || (t_.front() <= t0 && t1 <= t_.back()));
  }

  double min() const { return *std::min_element(T0_.begin(), T0_.end()); }
  double max() const { return *std::max_element(T0_.begin(), T0_.end()); }

  const std::vector<double> &times() const { return t_; }
  const std::vector<double> &values() const { return T0_; }

private:
  std::vector<double> t_;
  std::vector<double> T0_;
};

/// Zone temperature, switch position and compressor timer of one unit.
struct PlantState {
  double T = 20.0;
  double u = 0.0;
  double on_timer = 0.0; ///< seconds spent in the current compressor state
  double t = 0.0;
};

/// Compressor is considered running when the switch is at least half open.
inline bool compressor_on(double u) { return u >= 0.5; }

/// Advance the zone temperature by one explicit RK4 step with u and T0 held.
inline PlantState step_plant(const PlantState &s, const ThermalParams &params,
                             double T0, double dt) {
  if (!(dt > 0.0))
    throw InvalidArgument("dt must be positive");
  if (dt > params.tau() / 100.0)
    throw StepTooLarge("dt = " + std::to_string(dt) + " s exceeds tau/100 = " +
                       std::to_string(params.tau() / 100.0) + " s");
  const double u = std::clamp(s.u, 0.0, 1.0);
  const auto f = [&](double T) { return params.dTdt(T, T0, u); };
  const double k1 = f(s.T);
  const double k2 = f(s.T + 0.5 * dt * k1);
  const double k3 = f(s.T + 0.5 * dt * k2);
  const double k4 = f(s.T + dt * k3);
  PlantState next = s;
  next.T = s.T + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next.u = u;
  next.t = s.t + dt;
  next.on_timer = s.on_timer + dt;
  return next;
}

/// Thermostat hysteresis: switch on below the band, off above it, otherwise
/// hold. Cooling mirrors the thresholds.
inline double embedded_bang_bang(const PlantState &s, const ComfortSpec &comfort,
                                 Mode mode) {
  const double lo = comfort.T_ref - comfort.T_db;
  const double hi = comfort.T_ref + comfort.T_db;
  const bool was_on = s.u >= 0.5;
  if (mode == Mode::heating) {
    if (s.T < lo)
      return 1.0;
    if (s.T > hi)
      return 0.0;
  } else {
    if (s.T > hi)
      return 1.0;
    if (s.T < lo)
      return 0.0;
  }
  return was_on ? 1.0 : 0.0;
}

/// Collects decimated samples of a running simulation into a Trajectory.
/// P_r_in of a sample is the mean electrical power over the recording
/// interval that starts at the sample; every other column is instantaneous.
class TrajectoryRecorder {
public:
  TrajectoryRecorder(const ThermalParams &params, double dt, std::size_t stride)
      : params_(params), dt_(dt), stride_(std::max<std::size_t>(stride, 1)) {
    traj_.dt = dt_ * static_cast<double>(stride_);
  }

  void reserve(std::size_t n) { traj_.reserve(n / stride_ + 2); }

  /// Called once per integration step with the state at the start of the step
  /// and the ambient temperature applied over it.
  void observe(const PlantState &s, double T0) {
    if (count_ % stride_ == 0) {
      flush();
      traj_.t.push_back(s.t);
      traj_.T.push_back(s.T);
      traj_.T0.push_back(T0);
      traj_.u.push_back(s.u);
      traj_.P_r_in.push_back(0.0);
      const double heat = params_.heat_injection(s.T, s.u);
      traj_.P_r_out.push_back(heat);
      traj_.E.push_back(params_.Cw * (s.T - T0));
      traj_.p.push_back(params_.Cw * params_.dTdt(s.T, T0, s.u));
      traj_.yz.push_back((s.T - T0) / params_.R);
      open_ = true;
    }
    energy_ += params_.P_rated * s.u;
    ++in_interval_;
    ++count_;
  }

  Trajectory finish() {
    flush();
    return std::move(traj_);
  }

private:
  void flush() {
    if (open_ && in_interval_ > 0)
      traj_.P_r_in.back() = energy_ / static_cast<double>(in_interval_);
    energy_ = 0.0;
    in_interval_ = 0;
  }

  ThermalParams params_;
  double dt_;
  std::size_t stride_;
  Trajectory traj_;
  std::size_t count_ = 0;
  std::size_t in_interval_ = 0;
  double energy_ = 0.0;
  bool open_ = false;
};

inline std::size_t step_count(double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0))
    throw InvalidArgument("duration must be non-negative and dt positive");
  return static_cast<std::size_t>(std::llround(duration / dt));
}

/// Simulate with a fixed switch position.
inline Trajectory simulate_open_loop(const ThermalParams &params,
                                     const AmbientProfile &ambient,
                                     PlantState state, double duration,
                                     double dt, std::size_t stride = 1) {
  const std::size_t n = step_count(duration, dt);
  TrajectoryRecorder rec(params, dt, stride);
  rec.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double T0 = ambient(state.t);
    rec.observe(state, T0);
    state = step_plant(state, params, T0, dt);
    state.t = static_cast<double>(k + 1) * dt;
  }
  if (n % std::max<std::size_t>(stride, 1) == 0)
    rec.observe(state, ambient(state.t));
  return rec.finish();
}

/// Simulate under the embedded thermostat automation (the no-DR baseline).
inline Trajectory simulate_bang_bang(const ThermalParams &params,
                                     const ComfortSpec &comfort,
                                     const AmbientProfile &ambient,
                                     PlantState state, double duration,
                                     double dt, std::size_t stride = 1) {
  const std::size_t n = step_count(duration, dt);
  TrajectoryRecorder rec(params, dt, stride);
  rec.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double T0 = ambient(state.t);
    const double u = embedded_bang_bang(state, comfort, params.mode);
    if (compressor_on(u) != compressor_on(state.u))
      state.on_timer = 0.0;
    state.u = u;
    rec.observe(state, T0);
    state = step_plant(state, params, T0, dt);
    state.t = static_cast<double>(k + 1) * dt;
  }
  if (n % std::max<std::size_t>(stride, 1) == 0) {
    state.u = embedded_bang_bang(state, comfort, params.mode);
    rec.observe(state, ambient(state.t));
  }
  return rec.finish();
}

/// Mismatch between heat absorbed by the zone and electrical power injected.
struct ImbalanceReport {
  std::vector<double> imbalance;   ///< kW per sample
  std::vector<double> accumulated; ///< kJ, running trapezoidal integral
};

/// Imbalance P_r_out − s·P_r_in with P_r_out reconstructed from the measured
/// temperature as (T − T0)/R + Cw·dT/dt (finite differences).
inline ImbalanceReport power_imbalance_diagnostic(const Trajectory &traj,
                                                  const ThermalParams &params) {
  traj.check_consistent();
  const auto dTdt = derivative(traj.T, traj.dt);
  ImbalanceReport r;
  r.imbalance.resize(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double absorbed =
        (traj.T[k] - traj.T0[k]) / params.R + params.Cw * dTdt[k];
    r.imbalance[k] = absorbed - params.sign() * traj.P_r_in[k];
  }
  r.accumulated = cumulative_trapezoid(r.imbalance, traj.dt);
  return r;
}

/// Maximal compressor-ON intervals [start, end) in seconds. Intervals cut by
/// either end of the trajectory are flagged as censored.
struct OnInterval {
  double start = 0.0;
  double duration = 0.0;
  bool censored = false;
};

inline std::vector<OnInterval> on_intervals(std::span<const double> t,
                                            std::span<const double> u,
                                            double dt) {
  std::vector<OnInterval> out;
  bool in = false;
  double start = 0.0;
  bool start_censored = false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const bool on = compressor_on(u[k]);
    if (on && !in) {
      in = true;
      start = t[k];
      start_censored = (k == 0);
    } else if (!on && in) {
      in = false;
      out.push_back({start, t[k] - start, start_censored});
    }
  }
  if (in && !u.empty())
    out.push_back({start, t.back() + dt - start, true});
  return out;
}

} // namespace gridflex
