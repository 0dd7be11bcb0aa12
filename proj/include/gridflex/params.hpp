#pragma once

#include <cmath>
#include <string>

#include "gridflex/error.hpp"

namespace gridflex {

/// Guard on |T - T0| below which energy quantities with a (T - T0)
/// denominator are undefined.
inline constexpr double kEpsTemp = 1e-3;

/// Specific heat of air, kJ/(kg·°C).
inline constexpr double kCpAir = 1.005;

enum class Mode { heating, cooling };

/// How the switch position maps to heat delivered to the zone.
enum class Injection {
  rated,      ///< s·P_rated·u (constant-capacity lumped model)
  supply_air, ///< ṁ_a·C_p·(T_sup − T)·u (air-handler supply model)
};

inline const char *to_string(Mode m) {
  return m == Mode::heating ? "heating" : "cooling";
}
inline const char *to_string(Injection i) {
  return i == Injection::rated ? "rated" : "supply_air";
}

inline Mode mode_from_string(const std::string &s) {
  if (s == "heating")
    return Mode::heating;
  if (s == "cooling")
    return Mode::cooling;
  throw ConfigError("mode must be 'heating' or 'cooling', got '" + s + "'");
}

inline Injection injection_from_string(const std::string &s) {
  if (s == "rated")
    return Injection::rated;
  if (s == "supply_air")
    return Injection::supply_air;
  throw ConfigError("injection must be 'rated' or 'supply_air', got '" + s +
                    "'");
}

/// Physical constants of one single-zone HVAC unit.
/// Units: R °C/kW, Cw kJ/°C, P_rated kW, mdot_a kg/s, Cp kJ/(kg·°C), T_sup °C.
struct ThermalParams {
  double R = 2.0;
  double Cw = 7200.0;
  double P_rated = 5.0;
  double mdot_a = 0.0;
  double Cp = kCpAir;
  double T_sup = 45.0;
  Mode mode = Mode::heating;
  Injection injection = Injection::rated;

  double tau() const { return R * Cw; }
  /// +1 for heating, −1 for cooling.
  double sign() const { return mode == Mode::heating ? 1.0 : -1.0; }
  double mdot_cp() const { return mdot_a * Cp; }

  /// Heat delivered to the zone at temperature T with switch position u, kW.
  double heat_injection(double T, double u) const {
    if (injection == Injection::supply_air)
      return mdot_cp() * (T_sup - T) * u;
    return sign() * P_rated * u;
  }

  /// Temperature derivative of the RC plant, °C/s.
  double dTdt(double T, double T0, double u) const {
    return (-(T - T0) / R + heat_injection(T, u)) / Cw;
  }

  void validate() const {
    if (!(R > 0.0) || !(Cw > 0.0) || !(P_rated > 0.0) || !(Cp > 0.0))
      throw InvalidArgument("R, Cw, P_rated and Cp must be positive");
    if (!(mdot_a > 0.0))
      throw InvalidArgument("mdot_a must be positive");
    if (!std::isfinite(T_sup))
      throw InvalidArgument("T_sup must be finite");
  }

  /// Typical single-zone defaults with the air flow sized so that the supply
  /// model delivers exactly P_rated at T_ref.
  static ThermalParams defaults(Mode mode, double T_ref) {
    ThermalParams p;
    p.mode = mode;
    p.T_sup = mode == Mode::heating ? 45.0 : 12.0;
    p.size_air_flow(T_ref);
    return p;
  }

  /// Resize mdot_a so that ṁ_a·C_p·|T_sup − T_ref| = P_rated.
  void size_air_flow(double T_ref) {
    const double dT = std::abs(T_sup - T_ref);
    if (!(dT > kEpsTemp))
      throw InvalidArgument("T_sup must differ from T_ref");
    mdot_a = P_rated / (Cp * dT);
  }

  /// Relative mismatch between the supply-air capacity at T and P_rated.
  double rated_consistency(double T) const {
    return (mdot_cp() * std::abs(T_sup - T) - P_rated) / P_rated;
  }
};

/// Occupant comfort band.
struct ComfortSpec {
  double T_ref = 23.9;
  double T_db = 1.4;
  double T_min = 22.5;
  double T_max = 25.3;

  static ComfortSpec around(double T_ref, double T_db) {
    return {T_ref, T_db, T_ref - T_db, T_ref + T_db};
  }

  void validate() const {
    if (!(T_db > 0.0))
      throw InvalidArgument("T_db must be positive");
    if (!(T_min <= T_ref - T_db && T_ref + T_db <= T_max))
      throw InvalidArgument(
          "comfort band must satisfy T_min <= T_ref - T_db < T_ref + T_db <= "
          "T_max");
  }
};

inline double fahrenheit_to_celsius(double f) { return (f - 32.0) * 5.0 / 9.0; }
inline double celsius_to_fahrenheit(double c) { return c * 9.0 / 5.0 + 32.0; }

} // namespace gridflex
