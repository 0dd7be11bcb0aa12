#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridflex/error.hpp"

namespace gridflex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { le, eq, ge };

/// Linear program in the form
///   minimise c·x  subject to  row_i(x) {≤,=,≥} b_i,  lo ≤ x ≤ hi.
class LinearProgram {
public:
  struct Term {
    std::size_t var;
    double coef;
  };
  struct Row {
    std::vector<Term> terms;
    RowSense sense;
    double rhs;
  };

  std::size_t add_variable(double lo, double hi, double cost) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw InvalidArgument("variable bounds must satisfy lo <= hi");
    if (!std::isfinite(cost))
      throw InvalidArgument("objective coefficients must be finite");
    lo_.push_back(lo);
    hi_.push_back(hi);
    cost_.push_back(cost);
    return cost_.size() - 1;
  }

  void add_row(std::vector<Term> terms, RowSense sense, double rhs) {
    if (!std::isfinite(rhs))
      throw InvalidArgument("row right-hand side must be finite");
    for (const auto &t : terms) {
      if (t.var >= cost_.size())
        throw DimensionMismatch("row refers to an unknown variable");
      if (!std::isfinite(t.coef))
        throw InvalidArgument("row coefficients must be finite");
    }
    rows_.push_back({std::move(terms), sense, rhs});
  }

  void set_cost(std::size_t var, double cost) { cost_.at(var) = cost; }

  std::size_t num_variables() const { return cost_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<double> &lower() const { return lo_; }
  const std::vector<double> &upper() const { return hi_; }
  const std::vector<double> &cost() const { return cost_; }
  const std::vector<Row> &rows() const { return rows_; }

  double objective(const std::vector<double> &x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      v += cost_[j] * x[j];
    return v;
  }

  /// Largest violation of any row or bound by x.
  double max_violation(const std::vector<double> &x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      worst = std::max(worst, lo_[j] - x[j]);
      worst = std::max(worst, x[j] - hi_[j]);
    }
    for (const auto &r : rows_) {
      double lhs = 0.0;
      for (const auto &t : r.terms)
        lhs += t.coef * x[t.var];
      switch (r.sense) {
      case RowSense::le: worst = std::max(worst, lhs - r.rhs); break;
      case RowSense::ge: worst = std::max(worst, r.rhs - lhs); break;
      case RowSense::eq: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
      }
    }
    return worst;
  }

private:
  std::vector<double> lo_, hi_, cost_;
  std::vector<Row> rows_;
};

struct LpResult {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

/// Dense tableau simplex on  min c·y, A y = b (b ≥ 0), y ≥ 0, with an initial
/// basis supplied by the caller. Bland's rule throughout.
class Tableau {
public:
  Tableau(std::size_t m, std::size_t n)
      : m_(m), n_(n), a_((m + 1) * (n + 1), 0.0), basis_(m, 0) {}

  double &at(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * (n_ + 1) + j]; }
  double &rhs(std::size_t i) { return at(i, n_); }
  double &obj(std::size_t j) { return at(m_, j); }
  std::vector<std::size_t> &basis() { return basis_; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    for (std::size_t j = 0; j <= n_; ++j)
      at(r, j) /= p;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r)
        continue;
      const double f = at(i, c);
      if (f == 0.0)
        continue;
      for (std::size_t j = 0; j <= n_; ++j)
        at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
    basis_[r] = c;
  }

  /// Load the cost vector into the objective row as reduced costs.
  void set_objective(const std::vector<double> &c) {
    for (std::size_t j = 0; j <= n_; ++j)
      obj(j) = j < n_ ? c[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0)
        continue;
      for (std::size_t j = 0; j <= n_; ++j)
        obj(j) -= cb * at(i, j);
    }
  }

  /// Returns false when unbounded.
  bool optimise(const std::vector<char> &allowed, double tol,
                std::size_t &iterations, std::size_t max_iter) {
    while (true) {
      std::size_t enter = n_;
      for (std::size_t j = 0; j < n_; ++j)
        if (allowed[j] && obj(j) < -tol) {
          enter = j;
          break;
        }
      if (enter == n_)
        return true;
      std::size_t leave = m_;
      double best = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double aij = at(i, enter);
        if (aij <= tol)
          continue;
        const double ratio = std::max(rhs(i), 0.0) / aij;
        const double slack = 1e-12 * std::max(1.0, best);
        if (leave == m_ || ratio < best - slack ||
            (ratio <= best + slack && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == m_)
        return false;
      pivot(leave, enter);
      if (++iterations > max_iter)
        throw Error("simplex iteration limit exceeded");
    }
  }

private:
  std::size_t m_, n_;
  std::vector<double> a_;
  std::vector<std::size_t> basis_;
};

} // namespace detail

/// Exact optimum of a dense LP by the two-phase simplex method with Bland's
/// anti-cycling rule (deterministic pivot sequence).
inline LpResult solve_lp(const LinearProgram &lp, double tol = 1e-10) {
  const std::size_t nx = lp.num_variables();
  const auto &lo = lp.lower();
  const auto &hi = lp.upper();

  // Map each original variable onto non-negative standard-form columns.
  enum class Kind { shift, mirror, split };
  std::vector<Kind> kind(nx);
  std::vector<std::size_t> col(nx);
  std::size_t ny = 0;
  for (std::size_t j = 0; j < nx; ++j) {
    col[j] = ny;
    if (std::isfinite(lo[j])) {
      kind[j] = Kind::shift;
      ny += 1;
    } else if (std::isfinite(hi[j])) {
      kind[j] = Kind::mirror;
      ny += 1;
    } else {
      kind[j] = Kind::split;
      ny += 2;
    }
  }

  struct StdRow {
    std::vector<double> a;
    RowSense sense;
    double b;
  };
  std::vector<StdRow> rows;
  rows.reserve(lp.num_rows() + nx);
  for (const auto &r : lp.rows()) {
    StdRow s{std::vector<double>(ny, 0.0), r.sense, r.rhs};
    for (const auto &t : r.terms) {
      const std::size_t j = t.var;
      switch (kind[j]) {
      case Kind::shift:
        s.a[col[j]] += t.coef;
        s.b -= t.coef * lo[j];
        break;
      case Kind::mirror:
        s.a[col[j]] -= t.coef;
        s.b -= t.coef * hi[j];
        break;
      case Kind::split:
        s.a[col[j]] += t.coef;
        s.a[col[j] + 1] -= t.coef;
        break;
      }
    }
    rows.push_back(std::move(s));
  }
  for (std::size_t j = 0; j < nx; ++j) {
    if (kind[j] == Kind::shift && std::isfinite(hi[j])) {
      StdRow s{std::vector<double>(ny, 0.0), RowSense::le, hi[j] - lo[j]};
      s.a[col[j]] = 1.0;
      rows.push_back(std::move(s));
    }
  }
  for (auto &s : rows) {
    if (s.b < 0.0) {
      for (double &v : s.a)
        v = -v;
      s.b = -s.b;
      if (s.sense == RowSense::le)
        s.sense = RowSense::ge;
      else if (s.sense == RowSense::ge)
        s.sense = RowSense::le;
    }
  }

  const std::size_t m = rows.size();
  std::size_t n_slack = 0, n_art = 0;
  for (const auto &s : rows) {
    if (s.sense != RowSense::eq)
      ++n_slack;
    if (s.sense != RowSense::le)
      ++n_art;
  }
  const std::size_t n = ny + n_slack + n_art;
  const std::size_t art_begin = ny + n_slack;

  detail::Tableau tab(m, n);
  std::size_t next_slack = ny, next_art = art_begin;
  for (std::size_t i = 0; i < m; ++i) {
    const auto &s = rows[i];
    for (std::size_t j = 0; j < ny; ++j)
      tab.at(i, j) = s.a[j];
    tab.rhs(i) = s.b;
    if (s.sense == RowSense::le) {
      tab.at(i, next_slack) = 1.0;
      tab.basis()[i] = next_slack++;
    } else {
      if (s.sense == RowSense::ge)
        tab.at(i, next_slack++) = -1.0;
      tab.at(i, next_art) = 1.0;
      tab.basis()[i] = next_art++;
    }
  }

  LpResult res;
  const std::size_t max_iter = 50000 + 50 * (m + n);
  std::vector<char> allowed(n, 1);

  if (n_art > 0) {
    std::vector<double> c1(n, 0.0);
    for (std::size_t j = art_begin; j < n; ++j)
      c1[j] = 1.0;
    tab.set_objective(c1);
    tab.optimise(allowed, tol, res.iterations, max_iter);
    double infeas = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      scale = std::max(scale, std::abs(rows[i].b));
      if (tab.basis()[i] >= art_begin)
        infeas += std::abs(tab.rhs(i));
    }
    if (infeas > 1e-8 * scale)
      throw Infeasible("no point satisfies every constraint (phase-one residual " +
                       std::to_string(infeas) + ")");
    // Drive remaining zero-level artificials out of the basis.
    for (std::size_t i = 0; i < m; ++i) {
      if (tab.basis()[i] < art_begin)
        continue;
      for (std::size_t j = 0; j < art_begin; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    for (std::size_t j = art_begin; j < n; ++j)
      allowed[j] = 0;
  }

  std::vector<double> c2(n, 0.0);
  for (std::size_t j = 0; j < nx; ++j) {
    const double c = lp.cost()[j];
    switch (kind[j]) {
    case Kind::shift: c2[col[j]] = c; break;
    case Kind::mirror: c2[col[j]] = -c; break;
    case Kind::split:
      c2[col[j]] = c;
      c2[col[j] + 1] = -c;
      break;
    }
  }
  tab.set_objective(c2);
  if (!tab.optimise(allowed, tol, res.iterations, max_iter))
    throw Unbounded("objective decreases without limit");

  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    y[tab.basis()[i]] = std::max(tab.rhs(i), 0.0);
  res.x.assign(nx, 0.0);
  for (std::size_t j = 0; j < nx; ++j) {
    switch (kind[j]) {
    case Kind::shift: res.x[j] = lo[j] + y[col[j]]; break;
    case Kind::mirror: res.x[j] = hi[j] - y[col[j]]; break;
    case Kind::split: res.x[j] = y[col[j]] - y[col[j] + 1]; break;
    }
    res.x[j] = std::clamp(res.x[j], lo[j], hi[j]);
  }
  res.objective = lp.objective(res.x);
  return res;
}

} // namespace gridflex
