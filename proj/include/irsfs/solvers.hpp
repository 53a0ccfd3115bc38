#ifndef IRSFS_SOLVERS_HPP
#define IRSFS_SOLVERS_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "irsfs/grid.hpp"

namespace irsfs {

/// sign(x) * max(|x| - threshold, 0).
inline double shrink_scalar(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

/// Isotropic shrinkage: v * max(|v| - threshold, 0) / |v|, zero stays zero.
inline Vec2 shrink_vector(Vec2 v, double threshold) {
  const double len = std::hypot(v.x, v.y);
  if (len <= threshold || len == 0.0) return {};
  const double s = (len - threshold) / len;
  return {v.x * s, v.y * s};
}

/// Neighbour offsets (d_row, d_col) a stencil row may couple. This covers
/// every pairing produced by the three-point shading linearisation, the
/// forward-difference gradients and the centred second differences.
inline constexpr std::array<std::array<int, 2>, 11> kStencilOffsets{{
    {0, 0}, {0, 1}, {0, -1}, {1, 0}, {-1, 0}, {1, -1}, {-1, 1}, {0, 2}, {0, -2}, {2, 0}, {-2, 0}}};
inline constexpr int kStencilSize = static_cast<int>(kStencilOffsets.size());

inline constexpr int stencil_slot(int d_row, int d_col) {
  for (int k = 0; k < kStencilSize; ++k)
    if (kStencilOffsets[k][0] == d_row && kStencilOffsets[k][1] == d_col) return k;
  return -1;
}

/// One entry of a sparse linear functional over the pixel grid.
struct Term {
  int row;
  int col;
  double coeff;
};

/// Sparse symmetric system on the pixel grid, stored as per-pixel
/// coefficients for the fixed offset set above. Built from weighted
/// least-squares rows: adding w * (sum_k c_k x_k - t)^2 to the objective
/// adds w c c^T to the matrix and w c t to the right-hand side.
class StencilSystem {
 public:
  StencilSystem() = default;
  StencilSystem(int width, int height)
      : width_(width),
        height_(height),
        coeff_(static_cast<std::size_t>(width) * height * kStencilSize, 0.0),
        rhs_(static_cast<std::size_t>(width) * height, 0.0),
        active_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width_ + col; }

  double& coeff(std::size_t pixel, int slot) { return coeff_[pixel * kStencilSize + slot]; }
  double coeff(std::size_t pixel, int slot) const { return coeff_[pixel * kStencilSize + slot]; }
  double diagonal(std::size_t pixel) const { return coeff(pixel, 0); }

  std::vector<double>& rhs() { return rhs_; }
  const std::vector<double>& rhs() const { return rhs_; }
  bool active(std::size_t pixel) const { return active_[pixel] != 0; }
  void set_active(std::size_t pixel, bool a) { active_[pixel] = a ? 1 : 0; }

  /// Accumulates weight * (terms . x - target)^2.
  void add_row(std::initializer_list<Term> terms, double weight, double target) {
    if (weight == 0.0) return;
    for (const Term& a : terms) {
      const std::size_t ia = index(a.row, a.col);
      active_[ia] = 1;
      rhs_[ia] += weight * a.coeff * target;
      for (const Term& b : terms) {
        const int slot = stencil_slot(b.row - a.row, b.col - a.col);
        if (slot < 0) throw Error("StencilSystem: row couples pixels outside the stencil");
        coeff_[ia * kStencilSize + slot] += weight * a.coeff * b.coeff;
      }
    }
  }

  /// Adds only the right-hand-side part of a row whose matrix part is already
  /// present; used when the matrix is reused across iterations.
  void add_rhs(std::initializer_list<Term> terms, double weight, double target) {
    if (weight == 0.0) return;
    for (const Term& a : terms) rhs_[index(a.row, a.col)] += weight * a.coeff * target;
  }

  void clear_rhs() { std::fill(rhs_.begin(), rhs_.end(), 0.0); }

  /// y = A x restricted to active pixels (inactive rows are 0).
  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(x.size(), 0.0);
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c) {
        const std::size_t i = index(r, c);
        if (!active(i)) continue;
        double acc = 0.0;
        for (int k = 0; k < kStencilSize; ++k) {
          const double a = coeff(i, k);
          if (a == 0.0) continue;
          acc += a * x[index(r + kStencilOffsets[k][0], c + kStencilOffsets[k][1])];
        }
        y[i] = acc;
      }
    return y;
  }

  /// Euclidean norm of rhs - A x over active pixels.
  double residual_norm(const std::vector<double>& x) const {
    const auto ax = apply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (active(i)) s += (rhs_[i] - ax[i]) * (rhs_[i] - ax[i]);
    return std::sqrt(s);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> coeff_;
  std::vector<double> rhs_;
  std::vector<std::uint8_t> active_;
};

enum class SweepOrder { RedBlack, Lexicographic };

/// In-place Gauss-Seidel sweeps on the active pixels of `sys`.
///
/// Red-black order visits all pixels with even (row + col) first, then the
/// odd ones, each colour in raster order. Same-colour couplings (the
/// diagonal and distance-two offsets) simply see the freshest values, so
/// the iteration is plain Gauss-Seidel under a permuted ordering.
inline void gauss_seidel_sweeps(const StencilSystem& sys, std::vector<double>& x, int sweeps,
                                SweepOrder order = SweepOrder::RedBlack) {
  const int w = sys.width(), h = sys.height();
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = sys.index(r, c);
      if (sys.active(i) && !(sys.diagonal(i) != 0.0))
        throw Error("gauss_seidel_solve: zero diagonal at pixel (row " + std::to_string(r) + ", col " +
                    std::to_string(c) + ")");
    }
  const auto& rhs = sys.rhs();
  auto relax = [&](int r, int c) {
    const std::size_t i = sys.index(r, c);
    if (!sys.active(i)) return;
    double acc = rhs[i];
    for (int k = 1; k < kStencilSize; ++k) {
      const double a = sys.coeff(i, k);
      if (a == 0.0) continue;
      acc -= a * x[sys.index(r + kStencilOffsets[k][0], c + kStencilOffsets[k][1])];
    }
    x[i] = acc / sys.diagonal(i);
  };
  for (int s = 0; s < sweeps; ++s) {
    if (order == SweepOrder::RedBlack) {
      for (int colour = 0; colour < 2; ++colour)
        for (int r = 0; r < h; ++r)
          for (int c = (r + colour) & 1; c < w; c += 2) relax(r, c);
    } else {
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) relax(r, c);
    }
  }
}

/// Grid-level wrapper: solves sys x = rhs starting from x0. Pixels that are
/// inactive keep their x0 value; the result mask is x0's mask.
inline Grid2D gauss_seidel_solve(StencilSystem sys, const Grid2D& rhs, const Grid2D& x0, int sweeps,
                                 SweepOrder order = SweepOrder::RedBlack) {
  if (rhs.width() != sys.width() || rhs.height() != sys.height() || !rhs.same_shape(x0))
    throw Error("gauss_seidel_solve: grid dimensions do not match");
  sys.rhs() = rhs.data();
  std::vector<double> x = x0.data();
  gauss_seidel_sweeps(sys, x, sweeps, order);
  Grid2D out = x0;
  out.data() = std::move(x);
  return out;
}

/// Splitting state: one primal field, auxiliaries and scaled multipliers of
/// matching shapes, and a fixed penalty.
struct AlState {
  Grid2D primal;
  std::vector<Grid2D> auxiliaries;
  std::vector<Grid2D> multipliers;
  double penalty = 1.0;
  int iteration = 0;

  AlState() = default;
  AlState(Grid2D x, int n_aux, double rho) : primal(std::move(x)), penalty(rho) {
    if (!(rho > 0.0)) throw Error("AlState: penalty must be positive");
    auxiliaries.assign(n_aux, Grid2D(primal.width(), primal.height(), 0.0));
    multipliers.assign(n_aux, Grid2D(primal.width(), primal.height(), 0.0));
  }

  bool check_invariants() const {
    if (!(penalty > 0.0) || auxiliaries.size() != multipliers.size()) return false;
    for (std::size_t k = 0; k < auxiliaries.size(); ++k)
      if (!auxiliaries[k].same_shape(multipliers[k]) || !auxiliaries[k].same_shape(primal)) return false;
    return true;
  }
};

/// Outcome of an iterative solve.
struct SolveReport {
  std::vector<double> objective;  // objective of the reported iterate after each outer iteration
  int iterations = 0;
  bool converged = false;
  bool warning = false;
  std::string message;
};

/// Relative change ||a - b|| / max(||a||, tiny) over pixels valid in `a`.
inline double relative_change(const Grid2D& a, const Grid2D& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.valid(i)) continue;
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), std::numeric_limits<double>::min());
}

/// Keeps the lowest-objective iterate seen so far (monotone safeguard, as in
/// monotone FISTA): the reported sequence never increases even when the
/// underlying splitting iteration oscillates.
class BestIterate {
 public:
  explicit BestIterate(Grid2D initial, double objective) : best_(std::move(initial)), value_(objective) {}

  /// Returns true when `candidate` was accepted.
  bool offer(const Grid2D& candidate, double objective) {
    if (objective <= value_) {
      best_ = candidate;
      value_ = objective;
      return true;
    }
    return false;
  }
  const Grid2D& best() const { return best_; }
  double value() const { return value_; }

 private:
  Grid2D best_;
  double value_;
};

}  // namespace irsfs

#endif  // IRSFS_SOLVERS_HPP
