#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridflex/error.hpp"
#include "gridflex/numerics.hpp"
#include "gridflex/params.hpp"
#include "gridflex/plant.hpp"
#include "gridflex/trajectory.hpp"

namespace gridflex {

/// Sliding-mode controller settings. Gains in kW/s, times in s, thresholds
/// in kW.
struct PrimaryControllerConfig {
  double alpha = 10.0;
  double K = 2.5;
  double L_bar = 7.5;
  double dt = 1e-3;
  double tau_min_on = 300.0;
  double tau_max_on = 900.0;
  double tau_min_off = 0.0;
  double yz_plus = 0.005;
  double yz_minus = -0.005;
  /// |sigma| at or below this value counts as having reached the surface.
  double reach_band = 0.01;
  bool enforce_cycling = true;

  void validate() const {
    if (!(K > 0.0))
      throw InvalidArgument("reaching margin K must be positive");
    if (!(L_bar >= 0.0))
      throw InvalidArgument("disturbance bound must be non-negative");
    if (std::abs(alpha - (L_bar + K)) > 1e-9 * std::max(1.0, alpha))
      throw InvalidArgument("sliding gain must equal L_bar + K");
    if (!(dt > 0.0))
      throw InvalidArgument("controller dt must be positive");
    if (!(0.0 < tau_min_on && tau_min_on < tau_max_on))
      throw InvalidArgument("need 0 < tau_min_on < tau_max_on");
    if (!(tau_min_off >= 0.0))
      throw InvalidArgument("tau_min_off must be non-negative");
    if (!(yz_minus <= 0.0 && 0.0 <= yz_plus))
      throw InvalidArgument("need yz_minus <= 0 <= yz_plus");
    if (!(reach_band >= 0.0))
      throw InvalidArgument("reach band must be non-negative");
  }
};

/// Controller output, the power the zone loses to ambient, (T − T0)/R.
inline double output_yz(double T, double T0, double R) {
  if (!(R > 0.0))
    throw InvalidArgument("R must be positive");
  return (T - T0) / R;
}

/// Reference output: baseline power that holds T_ref plus the commanded
/// adjustment dP.
inline double reference_yz(const ComfortSpec &comfort, double T0, double R,
                           double dP) {
  if (!(R > 0.0))
    throw InvalidArgument("R must be positive");
  return (comfort.T_ref - T0) / R + dP;
}

/// Discontinuous sliding law alpha·sign(sigma) with sign(0) = 0.
inline double sliding_mode_qdot(double sigma,
                                const PrimaryControllerConfig &cfg) {
  return cfg.alpha * sign(sigma);
}

/// Sliding law with a deadband [yz_ref + yz_minus, yz_ref + yz_plus].
inline double thresholded_qdot(double yz, double yz_ref,
                               const PrimaryControllerConfig &cfg) {
  const double sigma = yz - yz_ref;
  if (cfg.yz_plus == 0.0 && cfg.yz_minus == 0.0)
    return sliding_mode_qdot(sigma, cfg);
  if (sigma >= cfg.yz_plus)
    return cfg.alpha;
  if (sigma <= cfg.yz_minus)
    return -cfg.alpha;
  return 0.0;
}

/// Switch position driven by the rate of reactive power through the switch.
inline double switch_update(double u, double Qdot, double P_rated, double dt) {
  if (!(P_rated > 0.0))
    throw InvalidArgument("P_rated must be positive");
  return std::clamp(u + dt * Qdot / (2.0 * P_rated), 0.0, 1.0);
}

/// Exact compressor ON time for a given output level,
/// RC·ln((T_max − T0 + R·yz)/(T_min − T0 + R·yz)). NaN when undefined.
inline double on_time_exact(const ComfortSpec &comfort,
                            const ThermalParams &params, double T0, double yz) {
  const double num = comfort.T_max - T0 + params.R * yz;
  const double den = comfort.T_min - T0 + params.R * yz;
  if (den == 0.0 || num / den <= 0.0)
    return std::nan("");
  return params.tau() * std::log(num / den);
}

struct CyclingThresholds {
  double yz_plus = 0.0;  ///< threshold for the longest ON time
  double yz_minus = 0.0; ///< threshold for the shortest ON time
  /// tau_max_on / (R·Cw); the linearisation assumes this is small.
  double on_time_ratio = 0.0;
  bool assumption_ok = true; ///< false when on_time_ratio > 0.2
};

/// Output thresholds that keep compressor ON times within
/// [tau_min_on, tau_max_on] under the small-ON-time linearisation.
inline CyclingThresholds cycling_thresholds(const ComfortSpec &comfort,
                                            const ThermalParams &params,
                                            double T0, double tau_min_on,
                                            double tau_max_on) {
  const double RC = params.tau();
  const double R = params.R;
  const auto level = [&](double tau_on) {
    return (comfort.T_min - T0) * (tau_on / RC) / R -
           (comfort.T_max - comfort.T_min) / R;
  };
  CyclingThresholds th;
  th.yz_plus = level(tau_max_on);
  th.yz_minus = level(tau_min_on);
  th.on_time_ratio = tau_max_on / RC;
  th.assumption_ok = th.on_time_ratio <= 0.2;
  return th;
}

/// Largest |p-dot| of the uncontrolled plant (switch fully open and fully
/// closed) started at T_ref across the ambient envelope, over one horizon.
inline double plant_rate_bound(const ThermalParams &params,
                               const ComfortSpec &comfort, double T0_min,
                               double T0_max, double horizon) {
  double bound = 0.0;
  const double dt = std::min(1.0, params.tau() / 100.0);
  const std::size_t n = step_count(horizon, dt);
  for (double T0 : {T0_min, T0_max}) {
    for (double u : {0.0, 1.0}) {
      PlantState s{comfort.T_ref, u, 0.0, 0.0};
      double p_prev = params.Cw * params.dTdt(s.T, T0, u);
      for (std::size_t k = 0; k < n; ++k) {
        s = step_plant(s, params, T0, dt);
        const double p = params.Cw * params.dTdt(s.T, T0, u);
        bound = std::max(bound, std::abs(p - p_prev) / dt);
        p_prev = p;
      }
    }
  }
  return bound;
}

/// Gains satisfying alpha = L_bar + K where L_bar is the calibrated
/// disturbance bound with safety factor 1.5. The disturbance seen by the
/// surface is the switch-driven rate alpha/2 plus the plant's own rate
/// bound, which gives the fixed point L_bar = 3K + 6·rate_bound.
inline PrimaryControllerConfig calibrate_gains(PrimaryControllerConfig cfg,
                                               double K, double rate_bound) {
  if (!(K > 0.0))
    throw InvalidArgument("K must be positive");
  cfg.K = K;
  cfg.L_bar = 3.0 * K + 6.0 * rate_bound;
  cfg.alpha = cfg.L_bar + cfg.K;
  return cfg;
}

/// Upper bound on the reaching time from the decay of sigma²/2,
/// |sigma0|/(sqrt(2)·K).
inline double reach_time_bound(double sigma0, double K) {
  return std::abs(sigma0) / (std::sqrt(2.0) * K);
}

/// Per-sample controller log.
struct ControllerLog {
  std::vector<double> t, sigma, Qdot_u, u, yz, yz_ref;
  std::vector<int> compressor_on;

  std::size_t size() const { return t.size(); }
};

/// Closed-loop run outcome.
struct PrimaryResult {
  Trajectory traj;
  ControllerLog log;
  std::vector<OnInterval> on_intervals;
  std::optional<double> reach_time;
  double sigma0 = 0.0;
  PlantState final_state;
  /// Largest increase of sigma²/2 over one step while outside the deadband
  /// and away from switch saturation and cycling overrides.
  double max_lyapunov_increase = 0.0;
};

/// Sliding-mode energy controller wrapped around one plant instance.
///
/// The surface compares the measured absorbed power, (T − T0)/R + Cw·dT/dt
/// with dT/dt from consecutive temperature readings, against the reference
/// output held over each secondary period. The controller reads only the
/// zone temperature, the ambient temperature and its own switch position.
class PrimaryLoop {
public:
  PrimaryLoop(ThermalParams params, ComfortSpec comfort,
              PrimaryControllerConfig cfg, AmbientProfile ambient,
              PlantState init, double T_s, std::size_t record_stride = 1)
      : params_(params), comfort_(comfort), cfg_(cfg),
        ambient_(std::move(ambient)), state_(init), T_s_(T_s),
        stride_(std::max<std::size_t>(record_stride, 1)),
        rec_(params, cfg.dt, stride_) {
    params_.validate();
    cfg_.validate();
    if (!(T_s_ > 0.0))
      throw InvalidArgument("secondary period must be positive");
    if (cfg_.dt > T_s_ / 1000.0)
      throw StepTooLarge("controller dt must not exceed T_s/1000");
    t0_ = state_.t;
    on_ = compressor_on(state_.u);
    on_start_ = state_.t - state_.on_timer;
    on_start_censored_ = state_.on_timer > 0.0;
    state_steps_ = static_cast<std::int64_t>(
        std::llround(state_.on_timer / cfg_.dt));
    result_.sigma0 = std::nan("");
  }

  const PlantState &state() const { return state_; }
  const ThermalParams &params() const { return params_; }
  const ComfortSpec &comfort() const { return comfort_; }
  const PrimaryControllerConfig &config() const { return cfg_; }
  double time() const { return t0_ + static_cast<double>(step_) * cfg_.dt; }

  /// Current output (T − T0)/R.
  double yz() const {
    return output_yz(state_.T, ambient_(time()), params_.R);
  }

  /// Set the adjustment applied from the next secondary period boundary on.
  void set_adjustment(double dP) { dP_ = dP; }

  /// Replace the reference immediately (used to start on or off the surface).
  void force_reference(double yz_ref) {
    yz_ref_ = yz_ref;
    ref_valid_ = true;
    forced_ref_ = true;
  }

  /// Advance the closed loop by the given duration.
  void advance(double duration) {
    const std::size_t n = step_count(duration, cfg_.dt);
    const std::size_t period_steps = step_count(T_s_, cfg_.dt);
    for (std::size_t i = 0; i < n; ++i)
      one_step(period_steps);
  }

  /// Close the run: record the final sample and return everything collected.
  PrimaryResult finish() {
    if (step_ % stride_ == 0) {
      const double T0 = ambient_(time());
      rec_.observe(state_, T0);
      log_sample(T0, last_sigma_, 0.0);
    }
    if (on_)
      intervals_.push_back({on_start_, time() - on_start_, true});
    result_.traj = rec_.finish();
    result_.log = std::move(log_);
    result_.on_intervals = std::move(intervals_);
    result_.final_state = state_;
    return std::move(result_);
  }

private:
  void one_step(std::size_t period_steps) {
    const double t = time();
    const double T0 = ambient_(t);
    const double s = params_.sign();

    if (!forced_ref_ && (step_ % period_steps == 0 || !ref_valid_)) {
      yz_ref_ = reference_yz(comfort_, T0, params_.R, dP_);
      ref_valid_ = true;
    }
    if (forced_ref_ && step_ % period_steps == 0 && step_ > 0) {
      forced_ref_ = false;
      yz_ref_ = reference_yz(comfort_, T0, params_.R, dP_);
    }

    // Measured absorbed power; the first step has no temperature history and
    // holds the switch.
    double sigma = 0.0;
    double qdot_u = 0.0;
    bool have_sigma = false;
    if (has_prev_) {
      const double dTdt = (state_.T - prev_T_) / cfg_.dt;
      const double absorbed =
          output_yz(state_.T, T0, params_.R) + params_.Cw * dTdt;
      sigma = absorbed - yz_ref_;
      qdot_u = thresholded_qdot(absorbed, yz_ref_, cfg_);
      have_sigma = true;
      if (std::isnan(result_.sigma0))
        result_.sigma0 = sigma;
      if (!result_.reach_time && std::abs(sigma) <= cfg_.reach_band)
        result_.reach_time = t - t0_;
    }

    // Physical reactive-power rate through the switch; the mode sign orients
    // it so that the surface is attractive in both heating and cooling.
    double u_next = switch_update(state_.u, -s * qdot_u, params_.P_rated, cfg_.dt);
    bool overridden = false;
    if (cfg_.enforce_cycling) {
      const double in_state = static_cast<double>(state_steps_) * cfg_.dt;
      const double eps = 1e-9;
      const bool next_on = compressor_on(u_next);
      if (on_ && !next_on && in_state < cfg_.tau_min_on - eps) {
        u_next = 0.5;
        overridden = true;
      } else if (!on_ && next_on && in_state < cfg_.tau_min_off - eps) {
        u_next = std::nextafter(0.5, 0.0);
        overridden = true;
      } else if (on_ && next_on && in_state >= cfg_.tau_max_on - eps) {
        u_next = std::nextafter(0.5, 0.0);
        overridden = true;
      }
    }

    if (have_sigma && last_have_sigma_) {
      const bool outside = sigma >= cfg_.yz_plus || sigma <= cfg_.yz_minus;
      const bool saturated = u_next <= 0.0 || u_next >= 1.0;
      if (outside && !saturated && !overridden && !last_overridden_) {
        const double dv = 0.5 * sigma * sigma - 0.5 * last_sigma_ * last_sigma_;
        result_.max_lyapunov_increase =
            std::max(result_.max_lyapunov_increase, dv);
      }
    }
    last_have_sigma_ = have_sigma;
    last_overridden_ = overridden;
    last_sigma_ = sigma;

    const bool next_on = compressor_on(u_next);
    if (next_on != on_) {
      if (on_)
        intervals_.push_back({on_start_, t - on_start_, on_start_censored_});
      else {
        on_start_ = t;
        on_start_censored_ = false;
      }
      on_ = next_on;
      state_steps_ = 0;
    }
    state_.u = u_next;
    state_.on_timer = static_cast<double>(state_steps_) * cfg_.dt;

    if (step_ % stride_ == 0)
      log_sample(T0, sigma, qdot_u);
    rec_.observe(state_, T0);

    prev_T_ = state_.T;
    has_prev_ = true;
    state_ = step_plant(state_, params_, T0, cfg_.dt);
    ++step_;
    ++state_steps_;
    state_.t = time();
    state_.on_timer = static_cast<double>(state_steps_) * cfg_.dt;
  }

  void log_sample(double T0, double sigma, double qdot_u) {
    log_.t.push_back(time());
    log_.sigma.push_back(sigma);
    log_.Qdot_u.push_back(qdot_u);
    log_.u.push_back(state_.u);
    log_.yz.push_back(output_yz(state_.T, T0, params_.R));
    log_.yz_ref.push_back(yz_ref_);
    log_.compressor_on.push_back(compressor_on(state_.u) ? 1 : 0);
  }

  ThermalParams params_;
  ComfortSpec comfort_;
  PrimaryControllerConfig cfg_;
  AmbientProfile ambient_;
  PlantState state_;
  double T_s_;
  std::size_t stride_;
  TrajectoryRecorder rec_;
  ControllerLog log_;
  std::vector<OnInterval> intervals_;
  PrimaryResult result_;

  double t0_ = 0.0;
  std::size_t step_ = 0;
  std::int64_t state_steps_ = 0;
  bool on_ = false;
  double on_start_ = 0.0;
  bool on_start_censored_ = true;
  double dP_ = 0.0;
  double yz_ref_ = 0.0;
  bool ref_valid_ = false;
  bool forced_ref_ = false;
  double prev_T_ = 0.0;
  bool has_prev_ = false;
  double last_sigma_ = 0.0;
  bool last_have_sigma_ = false;
  bool last_overridden_ = false;
};

/// Reference adjustment per secondary period; periods past the end hold the
/// last value.
struct AdjustmentSchedule {
  std::vector<double> dP;

  double at(std::size_t n) const {
    if (dP.empty())
      return 0.0;
    return n < dP.size() ? dP[n] : dP.back();
  }
};

struct PrimaryScenario {
  AmbientProfile ambient;
  PlantState init;
  double duration = 7200.0;
  double T_s = 300.0;
  std::size_t record_stride = 1;
};

/// Run the sliding-mode closed loop over a whole scenario.
inline PrimaryResult run_primary(const PrimaryScenario &sc,
                                 const ThermalParams &params,
                                 const ComfortSpec &comfort,
                                 const PrimaryControllerConfig &cfg,
                                 const AdjustmentSchedule &schedule) {
  PrimaryLoop loop(params, comfort, cfg, sc.ambient, sc.init, sc.T_s,
                   sc.record_stride);
  const std::size_t periods =
      static_cast<std::size_t>(std::ceil(sc.duration / sc.T_s - 1e-9));
  double remaining = sc.duration;
  for (std::size_t n = 0; n < periods; ++n) {
    loop.set_adjustment(schedule.at(n));
    const double span = std::min(sc.T_s, remaining);
    loop.advance(span);
    remaining -= span;
  }
  return loop.finish();
}

} // namespace gridflex
