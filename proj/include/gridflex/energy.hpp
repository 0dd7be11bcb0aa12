#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gridflex/error.hpp"
#include "gridflex/numerics.hpp"
#include "gridflex/params.hpp"
#include "gridflex/trajectory.hpp"

namespace gridflex {

/// Uniformly sampled effort/flow pair of one port.
struct PortSignal {
  std::vector<double> effort;
  std::vector<double> flow;
  double dt = 0.0;
};

/// Stored energy relative to ambient, kJ.
inline double stored_energy(double T, double T0, double Cw) {
  require_finite(T, "T");
  require_finite(T0, "T0");
  require_finite(Cw, "Cw");
  if (!(Cw > 0.0))
    throw InvalidArgument("Cw must be positive");
  return Cw * (T - T0);
}

/// Stored energy in tangent space, Cw/(2(T − T0))·(dT/dt)².
inline double tangent_energy(double T, double dTdt, double T0, double Cw) {
  require_finite(T, "T");
  require_finite(dTdt, "dTdt");
  require_finite(T0, "T0");
  const double dT = T - T0;
  if (std::abs(dT) <= kEpsTemp)
    throw DegenerateTemperature("|T - T0| = " + std::to_string(std::abs(dT)) +
                                " is within the singular guard");
  return Cw / (2.0 * dT) * dTdt * dTdt;
}

struct ReactivePower {
  std::vector<double> P;    ///< instantaneous power e·f
  std::vector<double> Qdot; ///< rate of reactive power e·ḟ − ė·f
};

/// Instantaneous power and rate of change of generalized reactive power of a
/// port.
inline ReactivePower real_reactive_power(const PortSignal &port) {
  if (port.effort.size() != port.flow.size())
    throw DimensionMismatch("effort and flow series differ in length");
  if (port.effort.size() < 3)
    throw SeriesTooShort("real/reactive power needs at least 3 samples");
  const auto de = derivative(port.effort, port.dt);
  const auto df = derivative(port.flow, port.dt);
  ReactivePower out;
  const std::size_t n = port.effort.size();
  out.P.resize(n);
  out.Qdot.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.P[k] = port.effort[k] * port.flow[k];
    out.Qdot[k] = port.effort[k] * df[k] - de[k] * port.flow[k];
  }
  return out;
}

/// Entropy flow of the supply-air port, ṁ_a·C_p·(T_sup − T)/(T − T0).
inline double entropy_flow(double T, double T0, const ThermalParams &params) {
  const double dT = T - T0;
  if (std::abs(dT) <= kEpsTemp)
    throw DegenerateTemperature("entropy flow undefined at T = T0");
  return params.mdot_cp() * (params.T_sup - T) / dT;
}

/// Thermal rate of reactive power of the zone port with effort (T − T0) and
/// flow S_f, (T − T0)·Ṡ_f − S_f·d(T − T0)/dt, by finite differences.
inline std::vector<double> thermal_qdot(std::span<const double> T,
                                        std::span<const double> T0,
                                        const ThermalParams &params,
                                        double dt) {
  if (T.size() != T0.size())
    throw DimensionMismatch("T and T0 series differ in length");
  PortSignal port;
  port.dt = dt;
  port.effort.resize(T.size());
  port.flow.resize(T.size());
  for (std::size_t k = 0; k < T.size(); ++k) {
    port.effort[k] = T[k] - T0[k];
    port.flow[k] = entropy_flow(T[k], T0[k], params);
  }
  return real_reactive_power(port).Qdot;
}

/// Per-sample energy-space quantities derived from a trajectory.
struct EnergyDerived {
  std::vector<double> E_t;        ///< tangent-space energy
  std::vector<double> Qdot_T;     ///< thermal rate of reactive power, kW/s
  std::vector<double> Qdot_r_out; ///< terminal rate of reactive power, kW/s
  std::vector<double> P_r_out;    ///< absorbed power p + E/τ, kW
  std::vector<double> P_r_in;     ///< injected electrical power, kW
  std::vector<double> pdot;       ///< finite-difference derivative of p, kW/s
};

/// Interaction variables of the zone: P_r_out = p + E/τ and
/// Q̇_r_out = 4E_t − Q̇_u − ṗ.
inline EnergyDerived interaction_variables(const Trajectory &traj,
                                           const ThermalParams &params,
                                           std::span<const double> Qdot_u) {
  traj.check_consistent();
  if (Qdot_u.size() != traj.size())
    throw DimensionMismatch("Qdot_u series length differs from trajectory");
  const std::size_t n = traj.size();
  EnergyDerived d;
  d.pdot = derivative(traj.p, traj.dt);
  d.E_t.resize(n);
  d.P_r_out.resize(n);
  d.Qdot_r_out.resize(n);
  d.P_r_in = traj.P_r_in;
  const double tau = params.tau();
  for (std::size_t k = 0; k < n; ++k) {
    const double dTdt = traj.p[k] / params.Cw;
    d.E_t[k] = tangent_energy(traj.T[k], dTdt, traj.T0[k], params.Cw);
    d.P_r_out[k] = traj.p[k] + traj.E[k] / tau;
    d.Qdot_r_out[k] = 4.0 * d.E_t[k] - Qdot_u[k] - d.pdot[k];
  }
  d.Qdot_T = thermal_qdot(traj.T, traj.T0, params, traj.dt);
  return d;
}

/// Residual series of the two energy-space equations.
struct EnergyResiduals {
  /// p − (−E/τ + P_r_out), scaled by max(1, |P_r_out|).
  std::vector<double> storage;
  /// ṗ − 4E_t − Q̇_T, scaled by max(1, |ṗ|).
  std::vector<double> tangent;
  /// Switch balance with Q̇_sw,R = Q̇_sw,L + Q̇_u: Q̇_r_out + Q̇_u + Q̇_T.
  std::vector<double> switch_balance;
  /// Switch balance with Q̇_u = Q̇_sw,L − Q̇_sw,R: Q̇_u − Q̇_r_out − Q̇_T.
  std::vector<double> switch_balance_alt;
  double max_storage = 0.0;
  double max_tangent = 0.0;
  double max_switch_balance = 0.0;
  double max_switch_balance_alt = 0.0;
};

inline EnergyResiduals energy_residuals(const Trajectory &traj,
                                        const ThermalParams &params,
                                        std::span<const double> Qdot_u) {
  const auto d = interaction_variables(traj, params, Qdot_u);
  const std::size_t n = traj.size();
  EnergyResiduals r;
  r.storage.resize(n);
  r.tangent.resize(n);
  r.switch_balance.resize(n);
  r.switch_balance_alt.resize(n);
  const double tau = params.tau();
  for (std::size_t k = 0; k < n; ++k) {
    const double rhs = -traj.E[k] / tau + traj.P_r_out[k];
    r.storage[k] =
        (traj.p[k] - rhs) / std::max(1.0, std::abs(traj.P_r_out[k]));
    r.tangent[k] = (d.pdot[k] - 4.0 * d.E_t[k] - d.Qdot_T[k]) /
                   std::max(1.0, std::abs(d.pdot[k]));
    r.switch_balance[k] = d.Qdot_r_out[k] + Qdot_u[k] + d.Qdot_T[k];
    r.switch_balance_alt[k] = Qdot_u[k] - d.Qdot_r_out[k] - d.Qdot_T[k];
    r.max_storage = std::max(r.max_storage, std::abs(r.storage[k]));
    r.max_tangent = std::max(r.max_tangent, std::abs(r.tangent[k]));
    r.max_switch_balance =
        std::max(r.max_switch_balance, std::abs(r.switch_balance[k]));
    r.max_switch_balance_alt =
        std::max(r.max_switch_balance_alt, std::abs(r.switch_balance_alt[k]));
  }
  return r;
}

} // namespace gridflex
