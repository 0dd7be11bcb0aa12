#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "gridflex/lp.hpp"

using namespace gridflex;

namespace {

/// Brute-force optimum over every vertex of {x : G x ≤ h}, where the box
/// bounds are part of G. Solves each n-subset of active constraints by
/// Gaussian elimination with partial pivoting.
std::optional<double> vertex_enumeration(const std::vector<std::vector<double>> &G,
                                         const std::vector<double> &h,
                                         const std::vector<double> &c) {
  const std::size_t n = c.size(), m = G.size();
  std::optional<double> best;
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i)
    pick[i] = i;
  while (true) {
    std::vector<std::vector<double>> M(n, std::vector<double>(n + 1));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < n; ++j)
        M[r][j] = G[pick[r]][j];
      M[r][n] = h[pick[r]];
    }
    bool singular = false;
    for (std::size_t k = 0; k < n && !singular; ++k) {
      std::size_t p = k;
      for (std::size_t r = k + 1; r < n; ++r)
        if (std::abs(M[r][k]) > std::abs(M[p][k]))
          p = r;
      if (std::abs(M[p][k]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(M[p], M[k]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == k)
          continue;
        const double f = M[r][k] / M[k][k];
        for (std::size_t j = k; j <= n; ++j)
          M[r][j] -= f * M[k][j];
      }
    }
    if (!singular) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j)
        x[j] = M[j][n] / M[j][j];
      bool feasible = true;
      for (std::size_t r = 0; r < m && feasible; ++r) {
        double lhs = 0;
        for (std::size_t j = 0; j < n; ++j)
          lhs += G[r][j] * x[j];
        feasible = lhs <= h[r] + 1e-9;
      }
      if (feasible) {
        double v = 0;
        for (std::size_t j = 0; j < n; ++j)
          v += c[j] * x[j];
        if (!best || v < *best)
          best = v;
      }
    }
    // Next combination in lexicographic order.
    std::size_t i = n;
    while (i > 0 && pick[i - 1] == m - n + i - 1)
      --i;
    if (i == 0)
      break;
    ++pick[i - 1];
    for (std::size_t j = i; j < n; ++j)
      pick[j] = pick[j - 1] + 1;
  }
  return best;
}

} // namespace

TEST(SolveLp, HandExample) {
  LinearProgram lp;
  const auto x = lp.add_variable(1.0, kInf, 1.0);
  const auto y = lp.add_variable(2.0, kInf, 1.0);
  const auto r = solve_lp(lp);
  EXPECT_NEAR(r.x[x], 1.0, 1e-12);
  EXPECT_NEAR(r.x[y], 2.0, 1e-12);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
}

TEST(SolveLp, HandExampleAsRows) {
  LinearProgram lp;
  const auto x = lp.add_variable(-kInf, kInf, 1.0);
  const auto y = lp.add_variable(-kInf, kInf, 1.0);
  lp.add_row({{x, 1.0}}, RowSense::ge, 1.0);
  lp.add_row({{y, 1.0}}, RowSense::ge, 2.0);
  const auto r = solve_lp(lp);
  EXPECT_NEAR(r.x[x], 1.0, 1e-12);
  EXPECT_NEAR(r.x[y], 2.0, 1e-12);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
}

TEST(SolveLp, EqualityAndUpperBounds) {
  // max x + 2y s.t. x + y = 4, y ≤ 3, x ≥ 0
  LinearProgram lp;
  const auto x = lp.add_variable(0.0, kInf, -1.0);
  const auto y = lp.add_variable(-kInf, 3.0, -2.0);
  lp.add_row({{x, 1.0}, {y, 1.0}}, RowSense::eq, 4.0);
  const auto r = solve_lp(lp);
  EXPECT_NEAR(r.x[x], 1.0, 1e-12);
  EXPECT_NEAR(r.x[y], 3.0, 1e-12);
  EXPECT_NEAR(r.objective, -7.0, 1e-12);
}

TEST(SolveLp, DegenerateTieIsDeterministic) {
  // Many optimal vertices: min x + y with x + y ≥ 1 in the unit box.
  auto build = [] {
    LinearProgram lp;
    const auto x = lp.add_variable(0.0, 1.0, 1.0);
    const auto y = lp.add_variable(0.0, 1.0, 1.0);
    lp.add_row({{x, 1.0}, {y, 1.0}}, RowSense::ge, 1.0);
    lp.add_row({{x, 1.0}, {y, -1.0}}, RowSense::le, 1.0);
    return lp;
  };
  const auto a = solve_lp(build());
  for (int rep = 0; rep < 20; ++rep) {
    const auto b = solve_lp(build());
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.objective, b.objective);
  }
  EXPECT_NEAR(a.objective, 1.0, 1e-12);
}

TEST(SolveLp, Infeasible) {
  LinearProgram lp;
  const auto x = lp.add_variable(0.0, 1.0, 1.0);
  lp.add_row({{x, 1.0}}, RowSense::ge, 2.0);
  EXPECT_THROW(solve_lp(lp), Infeasible);
}

TEST(SolveLp, Unbounded) {
  LinearProgram lp;
  const auto x = lp.add_variable(0.0, kInf, -1.0);
  lp.add_row({{x, 1.0}}, RowSense::ge, 2.0);
  EXPECT_THROW(solve_lp(lp), Unbounded);
}

TEST(SolveLp, FreeVariableAbsoluteValueEpigraph) {
  // min |x − 0.2| via t ≥ ±(x − 0.2)
  LinearProgram lp;
  const auto x = lp.add_variable(-kInf, kInf, 0.0);
  const auto t = lp.add_variable(0.0, kInf, 1.0);
  lp.add_row({{t, 1.0}, {x, -1.0}}, RowSense::ge, -0.2);
  lp.add_row({{t, 1.0}, {x, 1.0}}, RowSense::ge, 0.2);
  const auto r = solve_lp(lp);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
  EXPECT_NEAR(r.x[x], 0.2, 1e-12);
}

TEST(SolveLp, RejectsBadInput) {
  LinearProgram lp;
  EXPECT_THROW(lp.add_variable(1.0, 0.0, 0.0), InvalidArgument);
  const auto x = lp.add_variable(0.0, 1.0, 0.0);
  EXPECT_THROW(lp.add_row({{x + 1, 1.0}}, RowSense::le, 1.0), DimensionMismatch);
}

TEST(SolveLp, MatchesVertexEnumerationOnRandomLps) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> dimN(2, 6), dimM(1, 5);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = dimN(rng), m = dimM(rng);
    LinearProgram lp;
    std::vector<double> c(n);
    std::vector<std::vector<double>> G;
    std::vector<double> h;
    for (int j = 0; j < n; ++j) {
      c[j] = U(rng);
      const double lo = -1.0 - std::abs(U(rng)), hi = 1.0 + std::abs(U(rng));
      lp.add_variable(lo, hi, c[j]);
      std::vector<double> e(n, 0.0);
      e[j] = 1.0;
      G.push_back(e);
      h.push_back(hi);
      e[j] = -1.0;
      G.push_back(e);
      h.push_back(-lo);
    }
    for (int i = 0; i < m; ++i) {
      std::vector<LinearProgram::Term> terms;
      std::vector<double> g(n);
      for (int j = 0; j < n; ++j) {
        g[j] = U(rng);
        terms.push_back({static_cast<std::size_t>(j), g[j]});
      }
      const double b = 0.5 * std::abs(U(rng)); // origin stays feasible
      lp.add_row(terms, RowSense::le, b);
      G.push_back(g);
      h.push_back(b);
    }
    const auto oracle = vertex_enumeration(G, h, c);
    ASSERT_TRUE(oracle.has_value());
    const auto r = solve_lp(lp);
    EXPECT_NEAR(r.objective, *oracle, 1e-9) << "trial " << trial;
    EXPECT_LE(lp.max_violation(r.x), 1e-9);
  }
}
