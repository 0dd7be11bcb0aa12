#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridflex/error.hpp"
#include "gridflex/numerics.hpp"

namespace gridflex {

/// Demand-response qualification thresholds.
struct MetricsSpec {
  double t_re_max = 5.0;       ///< response time, s
  double t_ra_max = 300.0;     ///< ramp time, s
  double rmt_fraction = 0.07;  ///< minimum regulation amount, fraction of basis
  double rmvt_fraction = 0.05; ///< tolerated variation, fraction of the amount
  double t_a_min = 10800.0;    ///< availability, s
  double onset_fraction = 0.1; ///< response onset, fraction of the target
  double T_t = 300.0;          ///< averaging window, s
  /// Capacity the RMT fraction applies to; NaN means rated power.
  double rmt_basis = std::nan("");

  void validate() const {
    if (!(t_re_max > 0.0 && t_ra_max > 0.0 && rmt_fraction > 0.0 &&
          rmvt_fraction > 0.0 && t_a_min > 0.0 && onset_fraction > 0.0 &&
          T_t > 0.0))
      throw InvalidArgument("metric thresholds must be positive");
    if (!(rmvt_fraction < 1.0) || !(onset_fraction < 1.0))
      throw InvalidArgument("fractions must be below one");
    if (!std::isnan(rmt_basis) && !(rmt_basis > 0.0))
      throw InvalidArgument("RMT basis must be positive");
  }

  /// Short response and ramp targets.
  static MetricsSpec fast() {
    MetricsSpec s;
    s.t_ra_max = 5.0;
    return s;
  }
};

struct MetricsReport {
  std::optional<double> t_re;  ///< s after the command
  std::optional<double> t_ra;  ///< s after the command
  double rmt = 0.0;            ///< amount offered, |target|, kW
  double rmt_required = 0.0;   ///< kW
  double rmvt_band = 0.0;      ///< kW
  double worst_deviation = 0.0; ///< max |avg − target| after ramp completion, kW
  double availability = 0.0;   ///< s
  bool pass_t_re = false;
  bool pass_t_ra = false;
  bool pass_rmt = false;
  bool pass_rmvt = false;
  bool pass_availability = false;

  bool pass() const {
    return pass_t_re && pass_t_ra && pass_rmt && pass_rmvt && pass_availability;
  }
};

/// Trailing average of x over `window` samples that never reaches back
/// before index `from`; entries before `from` are NaN.
inline std::vector<double> trailing_average(std::span<const double> x,
                                            std::size_t window, std::size_t from) {
  if (window == 0)
    throw InvalidArgument("averaging window must span at least one sample");
  std::vector<double> out(x.size(), std::nan(""));
  double acc = 0.0;
  for (std::size_t k = from; k < x.size(); ++k) {
    acc += x[k];
    if (k >= from + window)
      acc -= x[k - window];
    out[k] = acc / static_cast<double>(std::min(window, k - from + 1));
  }
  return out;
}

/// Evaluate a power step against the thresholds. `P` and `P_base` are the
/// interval-mean electrical power of the controlled and reference runs on a
/// common grid with spacing dt starting at t0. The averaged deviation at
/// sample k covers intervals up to and including k, so it is stamped at the
/// end of that interval.
inline MetricsReport evaluate_step_response(std::span<const double> P,
                                            std::span<const double> P_base,
                                            double t0, double dt,
                                            double command_time, double target,
                                            double P_rated,
                                            const MetricsSpec &spec) {
  spec.validate();
  if (P.size() != P_base.size())
    throw DimensionMismatch("power series must have equal length");
  if (!(dt > 0.0))
    throw InvalidArgument("dt must be positive");
  if (target == 0.0)
    throw InvalidArgument("step target must be non-zero");
  const double t_end = t0 + dt * static_cast<double>(P.size());
  if (command_time < t0 || t_end - command_time < spec.t_a_min)
    throw WindowTooShort("need " + std::to_string(spec.t_a_min) +
                         " s after the command, have " +
                         std::to_string(t_end - command_time) + " s");
  const auto c = static_cast<std::size_t>(std::ceil((command_time - t0) / dt - 1e-9));
  const auto window =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.T_t / dt)));
  std::vector<double> dev(P.size());
  for (std::size_t k = 0; k < P.size(); ++k)
    dev[k] = P[k] - P_base[k];
  const auto avg = trailing_average(dev, window, c);
  const auto stamp = [&](std::size_t k) {
    return t0 + dt * static_cast<double>(k + 1) - command_time;
  };

  MetricsReport r;
  const double s = target > 0.0 ? 1.0 : -1.0;
  r.rmt = std::abs(target);
  r.rmt_required = spec.rmt_fraction * (std::isnan(spec.rmt_basis) ? P_rated : spec.rmt_basis);
  r.rmvt_band = spec.rmvt_fraction * std::abs(target);

  for (std::size_t k = c; k < avg.size(); ++k)
    if (s * avg[k] >= spec.onset_fraction * std::abs(target)) {
      r.t_re = stamp(k);
      break;
    }

  // Ramp completes where the averaged deviation enters the band for good:
  // the start of the in-band run that reaches the end of the record.
  std::size_t k = avg.size();
  while (k > c && std::abs(avg[k - 1] - target) <= r.rmvt_band) {
    --k;
    r.worst_deviation = std::max(r.worst_deviation, std::abs(avg[k] - target));
  }
  if (k < avg.size()) {
    r.t_ra = stamp(k);
    r.availability = dt * static_cast<double>(avg.size() - k);
  }

  r.pass_t_re = r.t_re && *r.t_re <= spec.t_re_max;
  r.pass_t_ra = r.t_ra && *r.t_ra <= spec.t_ra_max;
  r.pass_rmt = r.rmt >= r.rmt_required;
  r.pass_rmvt = r.t_ra.has_value() && r.worst_deviation <= r.rmvt_band;
  r.pass_availability = r.availability >= spec.t_a_min - 1e-9;
  return r;
}

} // namespace gridflex
