#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "irsfs/solvers.hpp"

using namespace irsfs;

namespace {

// Dense Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A[i][k]) > std::abs(A[p][k])) p = i;
    std::swap(A[k], A[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A[i][k] / A[k][k];
      for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  return x;
}

// Thomas algorithm for a tridiagonal system.
std::vector<double> tridiagonal_solve(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                                      std::vector<double> b) {
  const std::size_t n = di.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lo[i] / di[i - 1];
    di[i] -= m * up[i - 1];
    b[i] -= m * b[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = b[n - 1] / di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (b[i] - up[i] * x[i + 1]) / di[i];
  return x;
}

// Dirichlet 5-point Poisson matrix on a w x h grid.
StencilSystem poisson(int w, int h) {
  StencilSystem sys(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = sys.index(r, c);
      sys.set_active(i, true);
      sys.coeff(i, stencil_slot(0, 0)) = 4.0;
      if (c + 1 < w) sys.coeff(i, stencil_slot(0, 1)) = -1.0;
      if (c > 0) sys.coeff(i, stencil_slot(0, -1)) = -1.0;
      if (r + 1 < h) sys.coeff(i, stencil_slot(1, 0)) = -1.0;
      if (r > 0) sys.coeff(i, stencil_slot(-1, 0)) = -1.0;
    }
  return sys;
}

std::vector<std::vector<double>> to_dense(const StencilSystem& sys) {
  const std::size_t n = static_cast<std::size_t>(sys.width()) * sys.height();
  std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
  for (int r = 0; r < sys.height(); ++r)
    for (int c = 0; c < sys.width(); ++c) {
      const std::size_t i = sys.index(r, c);
      for (int k = 0; k < kStencilSize; ++k) {
        const double a = sys.coeff(i, k);
        if (a != 0.0) A[i][sys.index(r + kStencilOffsets[k][0], c + kStencilOffsets[k][1])] += a;
      }
    }
  return A;
}

Grid2D random_grid(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Grid2D g(w, h);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = u(rng);
  return g;
}

}  // namespace

TEST(Shrink, ScalarExamples) {
  EXPECT_EQ(shrink_scalar(5.0, 2.0), 3.0);
  EXPECT_EQ(shrink_scalar(-1.0, 2.0), 0.0);
  EXPECT_EQ(shrink_scalar(-5.0, 2.0), -3.0);
  EXPECT_EQ(shrink_scalar(0.7, 0.0), 0.7);
}

TEST(Shrink, VectorExamples) {
  Vec2 v = shrink_vector({3, 4}, 5.0);
  EXPECT_EQ(v.x, 0.0);
  EXPECT_EQ(v.y, 0.0);
  v = shrink_vector({3, 4}, 0.0);
  EXPECT_EQ(v.x, 3.0);
  EXPECT_EQ(v.y, 4.0);
  v = shrink_vector({6, 8}, 5.0);
  EXPECT_DOUBLE_EQ(v.x, 3.0);
  EXPECT_DOUBLE_EQ(v.y, 4.0);
}

TEST(Shrink, NonExpansive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0), t(0.0, 5.0);
  for (int k = 0; k < 2000; ++k) {
    const double a = u(rng), b = u(rng), th = t(rng);
    EXPECT_LE(std::abs(shrink_scalar(a, th) - shrink_scalar(b, th)), std::abs(a - b) + 1e-15);
    const Vec2 p{u(rng), u(rng)}, q{u(rng), u(rng)};
    const Vec2 sp = shrink_vector(p, th), sq = shrink_vector(q, th);
    EXPECT_LE(std::hypot(sp.x - sq.x, sp.y - sq.y), std::hypot(p.x - q.x, p.y - q.y) + 1e-12);
  }
}

TEST(StencilSystem, AddRowBuildsNormalEquations) {
  StencilSystem sys(3, 1);
  // 2 * (x0 - 3 x1 - 1)^2 + (x2 - 4)^2
  sys.add_row({Term{0, 0, 1.0}, Term{0, 1, -3.0}}, 2.0, 1.0);
  sys.add_row({Term{0, 2, 1.0}}, 1.0, 4.0);
  EXPECT_EQ(sys.coeff(0, stencil_slot(0, 0)), 2.0);
  EXPECT_EQ(sys.coeff(0, stencil_slot(0, 1)), -6.0);
  EXPECT_EQ(sys.coeff(1, stencil_slot(0, -1)), -6.0);
  EXPECT_EQ(sys.coeff(1, stencil_slot(0, 0)), 18.0);
  EXPECT_EQ(sys.rhs()[0], 2.0);
  EXPECT_EQ(sys.rhs()[1], -6.0);
  EXPECT_EQ(sys.rhs()[2], 4.0);
}

TEST(StencilSystem, RejectsOffsetsOutsideStencil) {
  StencilSystem sys(4, 4);
  EXPECT_THROW(sys.add_row({Term{0, 0, 1.0}, Term{1, 1, 1.0}}, 1.0, 0.0), Error);
  EXPECT_THROW(sys.add_row({Term{0, 0, 1.0}, Term{0, 3, 1.0}}, 1.0, 0.0), Error);
}

TEST(GaussSeidel, IdentitySystemOneSweep) {
  StencilSystem sys(5, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) sys.add_row({Term{r, c, 1.0}}, 1.0, 0.0);
  const Grid2D rhs = random_grid(5, 4, 1);
  const Grid2D x = gauss_seidel_solve(sys, rhs, Grid2D(5, 4, 0.0), 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i], rhs[i]);
}

TEST(GaussSeidel, Poisson1DMatchesTridiagonalSolve) {
  const int n = 16;
  StencilSystem sys = poisson(n, 1);
  std::vector<double> lo(n, -1.0), di(n, 4.0), up(n, -1.0);
  lo[0] = 0.0;
  up[n - 1] = 0.0;
  const Grid2D rhs = random_grid(n, 1, 2);
  const std::vector<double> x_ref = tridiagonal_solve(lo, di, up, rhs.data());
  for (SweepOrder order : {SweepOrder::RedBlack, SweepOrder::Lexicographic}) {
    const Grid2D x = gauss_seidel_solve(sys, rhs, Grid2D(n, 1, 0.0), 200, order);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], x_ref[i], 1e-6);
  }
}

TEST(GaussSeidel, Poisson2DMatchesDirectSolve) {
  const int n = 16;
  StencilSystem sys = poisson(n, n);
  const Grid2D rhs = random_grid(n, n, 3);
  const std::vector<double> x_ref = dense_solve(to_dense(sys), rhs.data());
  const Grid2D x = gauss_seidel_solve(sys, rhs, Grid2D(n, n, 0.0), 2000);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], x_ref[i], 1e-6);
}

TEST(GaussSeidel, ExactSolutionIsFixedPoint) {
  const int n = 8;
  StencilSystem sys = poisson(n, n);
  const Grid2D x_true = random_grid(n, n, 4);
  Grid2D rhs = x_true;
  rhs.data() = sys.apply(x_true.data());
  const Grid2D x = gauss_seidel_solve(sys, rhs, x_true, 3);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], x_true[i], 1e-14);
}

TEST(GaussSeidel, ResidualNonIncreasingOnDominantSystem) {
  const int n = 12;
  StencilSystem sys = poisson(n, n);
  for (std::size_t i = 0; i < sys.rhs().size(); ++i) sys.coeff(i, 0) += 0.5;  // strictly dominant
  sys.rhs() = random_grid(n, n, 6).data();
  std::vector<double> x(static_cast<std::size_t>(n) * n, 0.0);
  double prev = sys.residual_norm(x);
  for (int s = 0; s < 40; ++s) {
    gauss_seidel_sweeps(sys, x, 1);
    const double cur = sys.residual_norm(x);
    EXPECT_LE(cur, prev + 1e-12);
    prev = cur;
  }
}

TEST(GaussSeidel, RedBlackAndLexicographicAgree) {
  // Wider stencil: second differences plus a data term.
  const int w = 14, h = 11;
  StencilSystem sys(w, h);
  const Grid2D target = random_grid(w, h, 8);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      sys.add_row({Term{r, c, 1.0}}, 1.0, target(r, c));
      if (c > 0 && c + 1 < w) sys.add_row({Term{r, c - 1, 1.0}, Term{r, c, -2.0}, Term{r, c + 1, 1.0}}, 0.3, 0.0);
      if (r > 0 && r + 1 < h) sys.add_row({Term{r - 1, c, 1.0}, Term{r, c, -2.0}, Term{r + 1, c, 1.0}}, 0.3, 0.0);
      if (c + 1 < w && r + 1 < h)
        sys.add_row({Term{r, c, 1.0}, Term{r + 1, c, -0.5}, Term{r, c + 1, -0.5}}, 0.4, 0.1);
    }
  const Grid2D x0(w, h, 0.0);
  Grid2D rhs(w, h);
  rhs.data() = sys.rhs();
  const Grid2D a = gauss_seidel_solve(sys, rhs, x0, 3000, SweepOrder::RedBlack);
  const Grid2D b = gauss_seidel_solve(sys, rhs, x0, 3000, SweepOrder::Lexicographic);
  const std::vector<double> ref = dense_solve(to_dense(sys), sys.rhs());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-6);
    EXPECT_NEAR(a[i], ref[i], 1e-6);
  }
}

TEST(GaussSeidel, ZeroDiagonalNamesPixel) {
  StencilSystem sys(3, 3);
  sys.add_row({Term{0, 0, 1.0}}, 1.0, 1.0);
  sys.set_active(sys.index(2, 1), true);
  try {
    std::vector<double> x(9, 0.0);
    gauss_seidel_sweeps(sys, x, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 2, col 1"), std::string::npos);
  }
}

TEST(GaussSeidel, InactivePixelsKeepStartValue) {
  StencilSystem sys(2, 1);
  sys.add_row({Term{0, 0, 2.0}}, 1.0, 2.0);
  Grid2D x0(2, 1, 7.0);
  Grid2D rhs(2, 1);
  rhs.data() = sys.rhs();
  const Grid2D x = gauss_seidel_solve(sys, rhs, x0, 1);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_EQ(x[1], 7.0);
}

TEST(AlState, Invariants) {
  AlState st(Grid2D(3, 2, 0.0), 2, 1.5);
  EXPECT_TRUE(st.check_invariants());
  EXPECT_EQ(st.auxiliaries.size(), 2u);
  EXPECT_THROW(AlState(Grid2D(1, 1), 1, 0.0), Error);
  st.multipliers[1] = Grid2D(2, 2);
  EXPECT_FALSE(st.check_invariants());
}

TEST(RelativeChange, Basic) {
  Grid2D a(2, 1, 0.0), b(2, 1, 0.0);
  a[0] = 3.0;
  a[1] = 4.0;
  b[0] = 3.0;
  b[1] = 3.0;
  EXPECT_DOUBLE_EQ(relative_change(a, b), 0.2);
  EXPECT_EQ(relative_change(a, a), 0.0);
}

TEST(BestIterate, KeepsLowestObjective) {
  BestIterate best(Grid2D(1, 1, 0.0), 5.0);
  EXPECT_TRUE(best.offer(Grid2D(1, 1, 1.0), 3.0));
  EXPECT_FALSE(best.offer(Grid2D(1, 1, 2.0), 4.0));
  EXPECT_EQ(best.value(), 3.0);
  EXPECT_EQ(best.best()[0], 1.0);
}
