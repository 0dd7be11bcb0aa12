#pragma once

#include <cstddef>
#include <vector>

#include "gridflex/error.hpp"

namespace gridflex {

/// Uniformly sampled closed- or open-loop plant trajectory.
///
/// Sample k holds the state at t[k] and the switch position u[k] that is
/// applied over [t[k], t[k] + dt).
///   P_r_in  electrical power drawn, P_rated·u (kW)
///   P_r_out heat delivered to the zone (kW, signed: negative when cooling)
///   E       stored energy Cw·(T − T0) (kJ)
///   p       rate of stored energy Cw·dT/dt from the plant right-hand side (kW)
///   yz      output (T − T0)/R (kW)
struct Trajectory {
  double dt = 0.0;
  std::vector<double> t, T, T0, u, P_r_in, P_r_out, E, p, yz;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }

  void reserve(std::size_t n) {
    for (auto *v : columns())
      v->reserve(n);
  }

  std::vector<std::vector<double> *> columns() {
    return {&t, &T, &T0, &u, &P_r_in, &P_r_out, &E, &p, &yz};
  }

  void check_consistent() const {
    const std::size_t n = t.size();
    for (const auto *v : {&T, &T0, &u, &P_r_in, &P_r_out, &E, &p, &yz})
      if (v->size() != n)
        throw DimensionMismatch("trajectory columns differ in length");
    if (n >= 2 && !(dt > 0.0))
      throw InvalidArgument("trajectory sample spacing must be positive");
  }
};

} // namespace gridflex
