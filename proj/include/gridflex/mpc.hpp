#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gridflex/error.hpp"
#include "gridflex/lp.hpp"
#include "gridflex/numerics.hpp"
#include "gridflex/params.hpp"
#include "gridflex/primary.hpp"

namespace gridflex {

enum class DroopProvenance { formula, regression };

inline const char *to_string(DroopProvenance p) {
  return p == DroopProvenance::formula ? "formula" : "regression";
}

/// Quasi-static relation Δyz = (1 − σ_d)·Δyz_ref − σ_d·ΔP between a unit's
/// output, its reference and its power adjustment over one secondary step.
struct DroopModel {
  double sigma_d = 0.0;
  double a = 0.0; ///< rate coefficient −2/(R·Cw), 1/s
  double b = 0.0; ///< gain coefficient alpha/|sigma_band|, 1/s
  DroopProvenance provenance = DroopProvenance::formula;
  /// Regression only: relative RMS error of the fitted relation on its log.
  double fit_rel_rms = 0.0;
  std::size_t samples = 0;

  /// True when |σ_d| lies strictly between 0 and 1.
  bool plausible() const {
    return std::abs(sigma_d) > 0.0 && std::abs(sigma_d) < 1.0;
  }

  double predict(double dyz_ref, double dP) const {
    return (1.0 - sigma_d) * dyz_ref - sigma_d * dP;
  }
};

/// Droop constant from plant and controller constants.
inline DroopModel droop_from_params(const ThermalParams &params, double alpha,
                                    double sigma_band) {
  if (!(alpha > 0.0))
    throw InvalidArgument("alpha must be positive");
  if (sigma_band == 0.0)
    throw ZeroBand("representative sliding band must be non-zero");
  DroopModel d;
  d.a = -2.0 / (params.R * params.Cw);
  d.b = alpha / std::abs(sigma_band);
  d.sigma_d = d.a / d.b;
  d.provenance = DroopProvenance::formula;
  return d;
}

/// Droop constant with the representative band taken from the controller
/// deadband.
inline DroopModel droop_from_params(const ThermalParams &params,
                                    const PrimaryControllerConfig &cfg) {
  return droop_from_params(params, cfg.alpha,
                           std::max(std::abs(cfg.yz_plus), std::abs(cfg.yz_minus)));
}

/// One logged secondary step.
struct DroopSample {
  double dyz = 0.0;
  double dyz_ref = 0.0;
  double dP = 0.0;
};

/// Least-squares droop constant from logged steps. The relation rearranges
/// to Δyz − Δyz_ref = −σ_d·(Δyz_ref + ΔP), a one-parameter fit.
inline DroopModel droop_estimate(const std::vector<DroopSample> &log) {
  if (log.size() < 10)
    throw RankDeficient("need at least 10 logged steps, got " +
                        std::to_string(log.size()));
  double sxx = 0.0, sxy = 0.0, scale = 0.0;
  for (const auto &s : log) {
    const double x = s.dyz_ref + s.dP;
    const double y = s.dyz - s.dyz_ref;
    sxx += x * x;
    sxy += x * y;
    scale = std::max({scale, std::abs(s.dyz_ref), std::abs(s.dP)});
  }
  if (sxx <= 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(log.size()))
    throw RankDeficient("logged excitation has no component along the droop "
                        "direction");
  DroopModel d;
  d.sigma_d = -sxy / sxx;
  d.provenance = DroopProvenance::regression;
  d.samples = log.size();
  double se = 0.0, sy = 0.0;
  for (const auto &s : log) {
    const double e = d.predict(s.dyz_ref, s.dP) - s.dyz;
    se += e * e;
    sy += s.dyz * s.dyz;
  }
  d.fit_rel_rms = sy > 0.0 ? std::sqrt(se / sy) : std::sqrt(se);
  return d;
}

/// Secondary-layer optimisation data for one receding-horizon solve.
struct MpcProblem {
  double T_s = 300.0;
  double T_t = 300.0;
  std::size_t horizon_steps = 12;
  double mu_e = 10.0;          ///< $/kWh
  double mu_reg = 100.0;       ///< $/kW
  double soft_penalty = 100.0; ///< $/kW
  bool hard_bounds = false;
  double yz_lo = 0.0;
  double yz_hi = 0.0;
  double yz0 = 0.0;
  /// Thermal baseline power per step, (T_ref − T0)/R with T0 forecast.
  std::vector<double> baseline_P;
  /// Adjustment applied in the step before the horizon.
  double dP_prev = 0.0;
  /// Reference applied in the step before the horizon; NaN means the
  /// first-step baseline plus dP_prev.
  double yz_ref_prev = std::nan("");
  /// Capacity limits on the adjustment (defaults unbounded).
  double dP_lo = -kInf;
  double dP_hi = kInf;
  DroopModel droop;
  /// Regulation target per T_t period over the horizon.
  std::vector<double> regulation;

  std::size_t steps_per_period() const {
    const double r = T_t / T_s;
    const auto m = static_cast<std::size_t>(std::llround(r));
    if (m == 0 || std::abs(r - static_cast<double>(m)) > 1e-9)
      throw DimensionMismatch("T_t must be a positive integer multiple of T_s");
    return m;
  }

  std::size_t periods() const {
    const std::size_t m = steps_per_period();
    if (horizon_steps == 0 || horizon_steps % m != 0)
      throw DimensionMismatch(
          "horizon must cover an integer number of regulation periods");
    return horizon_steps / m;
  }

  void validate() const {
    const std::size_t P = periods();
    if (baseline_P.size() != horizon_steps)
      throw DimensionMismatch("baseline series must have one value per step");
    if (regulation.size() != P)
      throw DimensionMismatch("regulation series must have one value per period");
    for (double v : regulation)
      require_finite(v, "regulation sample");
    if (!(yz_lo <= yz_hi))
      throw InvalidArgument("output bounds must satisfy lo <= hi");
    if (!(T_s > 0.0) || !(mu_e >= 0.0) || !(mu_reg >= 0.0) ||
        !(soft_penalty >= 0.0))
      throw InvalidArgument("MPC weights and step must be non-negative");
  }
};

/// Comfort bounds on the output, (T_ref ∓ T_db − T0)/R.
inline std::pair<double, double> output_bounds(const ComfortSpec &comfort,
                                               double T0, double R) {
  return {(comfort.T_ref - comfort.T_db - T0) / R,
          (comfort.T_ref + comfort.T_db - T0) / R};
}

/// Variable indices of one unit's block within an MPC LP.
struct MpcBlock {
  std::vector<std::size_t> dyz_ref, dP, yz, s_lo, s_hi;
};

/// Add one unit's droop dynamics, reference coupling and comfort bounds.
inline MpcBlock add_unit_block(LinearProgram &lp, const MpcProblem &pb) {
  const std::size_t H = pb.horizon_steps;
  const double sig = pb.droop.sigma_d;
  const double step_h = pb.T_s / 3600.0;
  MpcBlock blk;
  for (std::size_t n = 0; n < H; ++n) {
    blk.dyz_ref.push_back(lp.add_variable(-kInf, kInf, 0.0));
    blk.dP.push_back(lp.add_variable(pb.dP_lo, pb.dP_hi, pb.mu_e * step_h));
    if (pb.hard_bounds) {
      blk.yz.push_back(lp.add_variable(pb.yz_lo, pb.yz_hi, 0.0));
    } else {
      blk.yz.push_back(lp.add_variable(-kInf, kInf, 0.0));
      blk.s_lo.push_back(lp.add_variable(0.0, kInf, pb.soft_penalty));
      blk.s_hi.push_back(lp.add_variable(0.0, kInf, pb.soft_penalty));
    }
  }
  for (std::size_t n = 0; n < H; ++n) {
    // yz[n] − yz[n−1] − (1 − σ)·dYzRef[n] + σ·dP[n] = 0, yz[−1] = yz0
    std::vector<LinearProgram::Term> dyn{{blk.yz[n], 1.0},
                                         {blk.dyz_ref[n], -(1.0 - sig)},
                                         {blk.dP[n], sig}};
    double rhs = 0.0;
    if (n > 0)
      dyn.push_back({blk.yz[n - 1], -1.0});
    else
      rhs = pb.yz0;
    lp.add_row(std::move(dyn), RowSense::eq, rhs);

    // The reference is the baseline plus the adjustment:
    // dYzRef[n] − dP[n] + dP[n−1] = baseline[n] − baseline[n−1].
    std::vector<LinearProgram::Term> ref{{blk.dyz_ref[n], 1.0}, {blk.dP[n], -1.0}};
    double ref_rhs = 0.0;
    if (n > 0) {
      ref.push_back({blk.dP[n - 1], 1.0});
      ref_rhs = pb.baseline_P[n] - pb.baseline_P[n - 1];
    } else {
      const double prev = std::isnan(pb.yz_ref_prev)
                              ? pb.baseline_P[0] + pb.dP_prev
                              : pb.yz_ref_prev;
      ref_rhs = pb.baseline_P[0] - prev;
    }
    lp.add_row(std::move(ref), RowSense::eq, ref_rhs);

    if (!pb.hard_bounds) {
      lp.add_row({{blk.yz[n], 1.0}, {blk.s_lo[n], 1.0}}, RowSense::ge, pb.yz_lo);
      lp.add_row({{blk.yz[n], 1.0}, {blk.s_hi[n], -1.0}}, RowSense::le, pb.yz_hi);
    }
  }
  return blk;
}

/// Epigraph slack t_j ≥ |mean_{n∈j} Σ_units dP[n] − P_reg[j]| per period.
inline std::vector<std::size_t>
add_regulation_epigraph(LinearProgram &lp, const std::vector<MpcBlock> &blocks,
                        const MpcProblem &pb) {
  const std::size_t m = pb.steps_per_period();
  const std::size_t P = pb.periods();
  std::vector<std::size_t> t;
  for (std::size_t j = 0; j < P; ++j) {
    const std::size_t tj = lp.add_variable(0.0, kInf, pb.mu_reg);
    t.push_back(tj);
    std::vector<LinearProgram::Term> plus{{tj, 1.0}}, minus{{tj, 1.0}};
    for (const auto &blk : blocks)
      for (std::size_t n = j * m; n < (j + 1) * m; ++n) {
        plus.push_back({blk.dP[n], -1.0 / static_cast<double>(m)});
        minus.push_back({blk.dP[n], 1.0 / static_cast<double>(m)});
      }
    lp.add_row(std::move(plus), RowSense::ge, -pb.regulation[j]);
    lp.add_row(std::move(minus), RowSense::ge, pb.regulation[j]);
  }
  return t;
}

/// Single-unit LP and the indices needed to read it back.
struct MpcLp {
  LinearProgram lp;
  MpcBlock block;
  std::vector<std::size_t> t;
  double constant_cost = 0.0; ///< energy cost of the baseline itself, $
};

inline MpcLp build_lp(const MpcProblem &pb) {
  pb.validate();
  MpcLp out;
  out.block = add_unit_block(out.lp, pb);
  out.t = add_regulation_epigraph(out.lp, {out.block}, pb);
  for (double b : pb.baseline_P)
    out.constant_cost += pb.mu_e * b * pb.T_s / 3600.0;
  return out;
}

/// Optimal schedule over the horizon.
struct LpSolution {
  std::vector<double> dYzRef, yz, dP;
  double objective = 0.0;
  double energy_cost = 0.0;
  double regulation_cost = 0.0;
  double comfort_cost = 0.0;
  std::vector<double> s_lo, s_hi;
  double max_violation = 0.0;
};

inline LpSolution read_solution(const MpcProblem &pb, const LinearProgram &lp,
                                const MpcBlock &blk,
                                const std::vector<std::size_t> &t,
                                const LpResult &r, double constant_cost) {
  LpSolution s;
  const double step_h = pb.T_s / 3600.0;
  for (std::size_t n = 0; n < pb.horizon_steps; ++n) {
    s.dYzRef.push_back(r.x[blk.dyz_ref[n]]);
    s.dP.push_back(r.x[blk.dP[n]]);
    s.yz.push_back(r.x[blk.yz[n]]);
    s.energy_cost += pb.mu_e * (pb.baseline_P[n] + s.dP.back()) * step_h;
    if (!pb.hard_bounds) {
      s.s_lo.push_back(r.x[blk.s_lo[n]]);
      s.s_hi.push_back(r.x[blk.s_hi[n]]);
      s.comfort_cost += pb.soft_penalty * (s.s_lo.back() + s.s_hi.back());
    }
  }
  for (std::size_t j : t)
    s.regulation_cost += pb.mu_reg * r.x[j];
  s.objective = r.objective + constant_cost;
  s.max_violation = lp.max_violation(r.x);
  return s;
}

inline LpSolution solve_mpc(const MpcProblem &pb) {
  auto m = build_lp(pb);
  const auto r = solve_lp(m.lp);
  return read_solution(pb, m.lp, m.block, m.t, r, m.constant_cost);
}

/// Regulation mismatch Σ_j |mean dP over period j − P_reg[j]| of a schedule.
inline double regulation_mismatch(const MpcProblem &pb,
                                  const std::vector<double> &dP) {
  const std::size_t m = pb.steps_per_period();
  double acc = 0.0;
  for (std::size_t j = 0; j < pb.periods(); ++j) {
    double mean = 0.0;
    for (std::size_t n = j * m; n < (j + 1) * m; ++n)
      mean += dP[n];
    acc += std::abs(mean / static_cast<double>(m) - pb.regulation[j]);
  }
  return acc;
}

/// Regulation window starting at period k, padded with the last sample.
inline std::vector<double> regulation_window(const std::vector<double> &reg,
                                             std::size_t k, std::size_t periods) {
  std::vector<double> w;
  for (std::size_t j = 0; j < periods; ++j) {
    const std::size_t idx = std::min(k + j, reg.empty() ? 0 : reg.size() - 1);
    w.push_back(reg.empty() ? 0.0 : reg[idx]);
  }
  return w;
}

/// Result of applying one receding-horizon step.
struct MpcStep {
  LpSolution solution;
  std::vector<double> dP_apply; ///< adjustments for the first period's steps
  std::vector<double> yz_ref;   ///< references for the first period's steps
};

/// Solve from the measured output and return the first period of the
/// schedule.
inline MpcStep mpc_step(MpcProblem pb, double measured_yz0) {
  pb.yz0 = measured_yz0;
  MpcStep st;
  st.solution = solve_mpc(pb);
  const std::size_t m = pb.steps_per_period();
  for (std::size_t n = 0; n < m; ++n) {
    st.dP_apply.push_back(st.solution.dP[n]);
    st.yz_ref.push_back(pb.baseline_P[n] + st.solution.dP[n]);
  }
  return st;
}

/// Settings for a closed-loop receding-horizon experiment on one unit.
struct MpcScenario {
  PrimaryScenario plant;
  MpcProblem templ; ///< horizon, weights, droop, bounds mode
  std::vector<double> regulation; ///< per T_t period over the whole run
};

/// Per-period record of a closed-loop receding-horizon run.
struct MpcRunResult {
  std::vector<double> P_reg;
  std::vector<double> realized_dP;  ///< measured mean power deviation per period
  std::vector<double> commanded_dP; ///< mean applied adjustment per period
  std::vector<double> predicted_dyz, realized_dyz;
  std::vector<DroopSample> droop_log;
  double mismatch_cost = 0.0; ///< μ_reg · Σ|realized − P_reg|
  double energy_cost = 0.0;
  double max_lp_violation = 0.0;
  double T_min = kInf, T_max = -kInf;
  PrimaryResult dr, baseline;
};

/// Receding-horizon secondary control closed around a primary loop. A twin
/// loop with zero adjustment provides the baseline power.
inline MpcRunResult run_mpc(const MpcScenario &sc, const ThermalParams &params,
                            const ComfortSpec &comfort,
                            const PrimaryControllerConfig &cfg) {
  const auto &tp = sc.templ;
  const std::size_t m = tp.steps_per_period();
  PrimaryLoop loop(params, comfort, cfg, sc.plant.ambient, sc.plant.init, tp.T_s,
                   sc.plant.record_stride);
  PrimaryLoop base(params, comfort, cfg, sc.plant.ambient, sc.plant.init, tp.T_s,
                   sc.plant.record_stride);
  const std::size_t periods = sc.regulation.size();
  MpcRunResult res;
  double dP_prev = 0.0;
  double yz_ref_prev = std::nan("");
  for (std::size_t k = 0; k < periods; ++k) {
    MpcProblem pb = tp;
    const double t_start = loop.time();
    pb.baseline_P.clear();
    for (std::size_t n = 0; n < tp.horizon_steps; ++n) {
      // Forecast ambient as the mean over the step.
      const double ta = t_start + static_cast<double>(n) * tp.T_s;
      const double T0 = 0.5 * (sc.plant.ambient(ta) + sc.plant.ambient(ta + tp.T_s));
      pb.baseline_P.push_back(reference_yz(comfort, T0, params.R, 0.0));
    }
    const auto T0_now = sc.plant.ambient(t_start);
    const auto [lo, hi] = output_bounds(comfort, T0_now, params.R);
    pb.yz_lo = lo;
    pb.yz_hi = hi;
    pb.dP_prev = dP_prev;
    pb.yz_ref_prev = yz_ref_prev;
    pb.regulation = regulation_window(sc.regulation, k, pb.periods());
    const double yz0 = loop.yz();
    const auto st = mpc_step(pb, yz0);
    res.max_lp_violation = std::max(res.max_lp_violation, st.solution.max_violation);

    double applied = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      loop.set_adjustment(st.dP_apply[n]);
      base.set_adjustment(0.0);
      loop.advance(tp.T_s);
      base.advance(tp.T_s);
      applied += st.dP_apply[n];
    }
    const double yz1 = loop.yz();
    const double dyz_ref =
        st.yz_ref[0] - (std::isnan(yz_ref_prev) ? pb.baseline_P[0] : yz_ref_prev);
    res.droop_log.push_back({yz1 - yz0, dyz_ref, st.dP_apply[0]});
    res.predicted_dyz.push_back(st.solution.yz[m - 1] - yz0);
    res.realized_dyz.push_back(yz1 - yz0);
    res.commanded_dP.push_back(applied / static_cast<double>(m));
    res.P_reg.push_back(sc.regulation[k]);
    for (std::size_t n = 0; n < m; ++n)
      res.energy_cost +=
          tp.mu_e * (pb.baseline_P[n] + st.dP_apply[n]) * tp.T_s / 3600.0;
    yz_ref_prev = st.yz_ref[m - 1];
    dP_prev = st.dP_apply[m - 1];
  }
  res.dr = loop.finish();
  res.baseline = base.finish();
  // Realized deviation per period from the recorded electrical power.
  const auto &a = res.dr.traj.P_r_in;
  const auto &b = res.baseline.traj.P_r_in;
  const double rec_dt = res.dr.traj.dt;
  const auto per_period = static_cast<std::size_t>(std::llround(tp.T_t / rec_dt));
  for (std::size_t k = 0; k < periods; ++k) {
    double acc = 0.0;
    for (std::size_t j = k * per_period; j < (k + 1) * per_period && j < a.size(); ++j)
      acc += a[j] - b[j];
    const double dev = acc / static_cast<double>(per_period);
    res.realized_dP.push_back(dev);
    res.mismatch_cost += tp.mu_reg * std::abs(dev - sc.regulation[k]);
  }
  for (double T : res.dr.traj.T) {
    res.T_min = std::min(res.T_min, T);
    res.T_max = std::max(res.T_max, T);
  }
  return res;
}

} // namespace gridflex
