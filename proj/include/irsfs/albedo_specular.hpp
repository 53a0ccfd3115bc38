#ifndef IRSFS_ALBEDO_SPECULAR_HPP
#define IRSFS_ALBEDO_SPECULAR_HPP

#include <algorithm>
#include <cmath>

#include "irsfs/config.hpp"
#include "irsfs/grid.hpp"
#include "irsfs/lighting.hpp"
#include "irsfs/solvers.hpp"

namespace irsfs {

struct SpecularAlbedo {
  Grid2D rho_s;
  SolveReport report;
};

/// I - (S~diff + S_amb), left unclamped.
inline Grid2D specular_residual(const Grid2D& I, const ShadingMaps& maps, const GlobalLight& light) {
  require_same_shape("specular_residual", I, maps.s_diff_tilde);
  Grid2D res = intersect_mask(I, maps.s_diff_tilde);
  for (std::size_t i = 0; i < res.size(); ++i)
    res[i] = res.valid(i) ? I[i] - (maps.s_diff_tilde[i] + light.s_amb) : 0.0;
  return res;
}

namespace detail {

/// Forward-difference gradient restricted to `domain`; a component is zero
/// when the forward neighbour is outside the domain.
inline Vec2 masked_gradient(const Grid2D& f, const Grid2D& domain, int r, int c) {
  Vec2 g;
  if (domain.valid_at(r, c + 1)) g.x = f(r, c + 1) - f(r, c);
  if (domain.valid_at(r + 1, c)) g.y = f(r + 1, c) - f(r, c);
  return g;
}

}  // namespace detail

/// lambda1 ||rho S~spec - res||^2 + lambda2 ||rho||_1 + lambda3 ||grad rho||_1
/// (isotropic TV) over the pixels valid in both `res` and `s_spec_tilde`.
inline double specular_objective(const Grid2D& rho, const Grid2D& res, const Grid2D& s_spec_tilde,
                                 const SolverConfig& cfg) {
  const Grid2D domain = intersect_mask(res, s_spec_tilde);
  double fid = 0.0, l1 = 0.0, tv = 0.0;
  for (int r = 0; r < rho.height(); ++r)
    for (int c = 0; c < rho.width(); ++c) {
      if (!domain.valid(r, c)) continue;
      const double e = rho(r, c) * s_spec_tilde(r, c) - res(r, c);
      fid += e * e;
      l1 += std::abs(rho(r, c));
      const Vec2 g = detail::masked_gradient(rho, domain, r, c);
      tv += std::hypot(g.x, g.y);
    }
  return cfg.lambda_s1 * fid + cfg.lambda_s2 * l1 + cfg.lambda_s3 * tv;
}

/// Sparse, smooth specular albedo from the residual image.
///
/// Augmented Lagrangian splitting with u = rho (sparsity) and v = grad rho
/// (TV): the rho step is a linear solve done by red-black Gauss-Seidel, u and
/// v are shrinkage steps, multipliers take unit steps. The u step also
/// projects onto rho >= 0, and u is the reported iterate, so exact zeros
/// survive. A split is dropped when its weight is zero.
inline SpecularAlbedo estimate_specular_albedo(const Grid2D& res, const Grid2D& s_spec_tilde,
                                               const SolverConfig& cfg) {
  require_same_shape("estimate_specular_albedo", res, s_spec_tilde);
  cfg.validate();
  const int w = res.width(), h = res.height();
  const Grid2D domain = intersect_mask(res, s_spec_tilde);
  const double pen = cfg.specular_penalty();
  const bool use_l1 = cfg.lambda_s2 > 0.0;
  const bool use_tv = cfg.lambda_s3 > 0.0;

  AlState st(Grid2D(w, h, 0.0), 3, pen);
  Grid2D& rho = st.primal;
  Grid2D& u = st.auxiliaries[0];
  Grid2D& vx = st.auxiliaries[1];
  Grid2D& vy = st.auxiliaries[2];
  Grid2D& y = st.multipliers[0];
  Grid2D& qx = st.multipliers[1];
  Grid2D& qy = st.multipliers[2];

  // Matrix of the rho subproblem; only the right-hand side changes later.
  StencilSystem sys(w, h);
  auto for_rows = [&](auto&& emit) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!domain.valid(r, c)) continue;
        const std::size_t i = domain.index(r, c);
        if (s_spec_tilde[i] != 0.0) emit({Term{r, c, s_spec_tilde[i]}}, cfg.lambda_s1, res[i]);
        if (use_l1) emit({Term{r, c, 1.0}}, 0.5 * pen, u[i] - y[i]);
        if (use_tv) {
          if (domain.valid_at(r, c + 1)) emit({Term{r, c + 1, 1.0}, Term{r, c, -1.0}}, 0.5 * pen, vx[i] - qx[i]);
          if (domain.valid_at(r + 1, c)) emit({Term{r + 1, c, 1.0}, Term{r, c, -1.0}}, 0.5 * pen, vy[i] - qy[i]);
        }
      }
  };
  for_rows([&](std::initializer_list<Term> t, double wgt, double tgt) { sys.add_row(t, wgt, tgt); });

  Grid2D reported(w, h, 0.0);
  reported.mask() = domain.mask();
  BestIterate best(reported, specular_objective(reported, res, s_spec_tilde, cfg));
  SpecularAlbedo out;
  std::vector<double> x = rho.data();
  Grid2D prev = reported;
  Grid2D prev_rho = reported;

  for (int it = 0; it < cfg.al_outer_iters; ++it) {
    st.iteration = it + 1;
    sys.clear_rhs();
    for_rows([&](std::initializer_list<Term> t, double wgt, double tgt) { sys.add_rhs(t, wgt, tgt); });
    gauss_seidel_sweeps(sys, x, cfg.gs_sweeps);
    rho.data() = x;

    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!domain.valid(r, c)) continue;
        const std::size_t i = rho.index(r, c);
        if (use_l1) {
          u[i] = std::max(rho[i] + y[i] - cfg.lambda_s2 / pen, 0.0);
          y[i] += rho[i] - u[i];
        } else {
          u[i] = std::max(rho[i], 0.0);
        }
        if (use_tv) {
          const Vec2 g = detail::masked_gradient(rho, domain, r, c);
          const Vec2 v = shrink_vector({g.x + qx[i], g.y + qy[i]}, cfg.lambda_s3 / pen);
          vx[i] = v.x;
          vy[i] = v.y;
          qx[i] += g.x - v.x;
          qy[i] += g.y - v.y;
        }
      }

    for (std::size_t i = 0; i < reported.size(); ++i) reported[i] = domain.valid(i) ? u[i] : 0.0;
    best.offer(reported, specular_objective(reported, res, s_spec_tilde, cfg));
    out.report.objective.push_back(best.value());
    out.report.iterations = it + 1;
    const bool settled = relative_change(reported, prev) < cfg.tolerance &&
                         relative_change(rho, prev_rho) < cfg.tolerance;
    if (it > 0 && settled) {
      out.report.converged = true;
      break;
    }
    prev = reported;
    prev_rho = rho;
  }
  if (!out.report.converged) {
    out.report.warning = true;
    out.report.message = "specular albedo: no convergence within al_outer_iters";
  }
  out.rho_s = best.best();
  return out;
}

}  // namespace irsfs

#endif  // IRSFS_ALBEDO_SPECULAR_HPP
