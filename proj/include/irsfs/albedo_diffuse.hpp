#ifndef IRSFS_ALBEDO_DIFFUSE_HPP
#define IRSFS_ALBEDO_DIFFUSE_HPP

#include <algorithm>
#include <cmath>

#include "irsfs/albedo_specular.hpp"
#include "irsfs/config.hpp"
#include "irsfs/grid.hpp"
#include "irsfs/lighting.hpp"
#include "irsfs/solvers.hpp"

namespace irsfs {

/// Per-pixel symmetric 2x2 metric of the (x, y, bI*I, bz*z, brho*rho) embedding.
struct BeltramiMetric {
  Grid2D g11;
  Grid2D g12;
  Grid2D g22;

  double det(std::size_t i) const { return g11[i] * g22[i] - g12[i] * g12[i]; }
};

struct DiffuseAlbedo {
  Grid2D rho_d;
  SolveReport report;
};

struct ManifoldGradient {
  Vec3Grid grad;  // (gx, gy, 0)
  int non_positive_definite = 0;
};

/// I - rho_s * S~spec.
inline Grid2D diffuse_residual(const Grid2D& I, const Grid2D& rho_s, const ShadingMaps& maps) {
  require_same_shape("diffuse_residual", I, rho_s, maps.s_spec_tilde);
  Grid2D res = intersect_mask(I, maps.s_spec_tilde);
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (!res.valid(i)) continue;
    res[i] = rho_s.valid(i) ? I[i] - rho_s[i] * maps.s_spec_tilde[i] : I[i];
  }
  return res;
}

namespace detail {

/// Forward difference of one channel; zero when either sample is masked out.
inline Vec2 channel_gradient(const Grid2D& f, int r, int c) {
  Vec2 g;
  if (!f.valid(r, c)) return g;
  if (f.valid_at(r, c + 1)) g.x = f(r, c + 1) - f(r, c);
  if (f.valid_at(r + 1, c)) g.y = f(r + 1, c) - f(r, c);
  return g;
}

}  // namespace detail

/// G = [[<Mx,Mx>, <Mx,My>], [<Mx,My>, <My,My>]] with forward differences.
/// Valid wherever i_res_d is valid; a missing neighbour zeroes that channel's
/// derivative, so G degrades gracefully to the identity.
inline BeltramiMetric compute_metric(const Grid2D& i_res_d, const Grid2D& z, const Grid2D& rho_d,
                                     const SolverConfig& cfg) {
  require_same_shape("compute_metric", i_res_d, z, rho_d);
  const int w = i_res_d.width(), h = i_res_d.height();
  BeltramiMetric G{Grid2D(w, h, 1.0, false), Grid2D(w, h, 0.0, false), Grid2D(w, h, 1.0, false)};
  const double bI2 = cfg.beta_I * cfg.beta_I, bz2 = cfg.beta_z * cfg.beta_z, br2 = cfg.beta_rho * cfg.beta_rho;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!i_res_d.valid(r, c)) continue;
      const Vec2 gi = detail::channel_gradient(i_res_d, r, c);
      const Vec2 gz = detail::channel_gradient(z, r, c);
      const Vec2 gr = detail::channel_gradient(rho_d, r, c);
      const std::size_t i = G.g11.index(r, c);
      G.g11[i] = 1.0 + bI2 * gi.x * gi.x + bz2 * gz.x * gz.x + br2 * gr.x * gr.x;
      G.g12[i] = bI2 * gi.x * gi.y + bz2 * gz.x * gz.y + br2 * gr.x * gr.y;
      G.g22[i] = 1.0 + bI2 * gi.y * gi.y + bz2 * gz.y * gz.y + br2 * gr.y * gr.y;
      G.g11.set_valid(i, true);
      G.g12.set_valid(i, true);
      G.g22.set_valid(i, true);
    }
  return G;
}

namespace detail {

struct Sym2 {
  double a11 = 1.0, a12 = 0.0, a22 = 1.0;
};

/// G^-1 at pixel i; identity (and `bad` bumped) when G is not positive definite.
inline Sym2 metric_inverse(const BeltramiMetric& G, std::size_t i, int& bad) {
  const double d = G.det(i);
  if (!(G.g11[i] > 0.0) || !(G.g22[i] > 0.0) || !(d > 0.0) || !std::isfinite(d)) {
    ++bad;
    return {};
  }
  return {G.g22[i] / d, -G.g12[i] / d, G.g11[i] / d};
}

}  // namespace detail

/// G^-1 grad rho with forward differences inside the metric's domain.
inline ManifoldGradient manifold_gradient(const Grid2D& rho_d, const BeltramiMetric& G) {
  require_same_shape("manifold_gradient", rho_d, G.g11);
  ManifoldGradient out{Vec3Grid(rho_d.width(), rho_d.height(), Vec3{}, false), 0};
  for (int r = 0; r < rho_d.height(); ++r)
    for (int c = 0; c < rho_d.width(); ++c) {
      if (!G.g11.valid(r, c)) continue;
      const std::size_t i = G.g11.index(r, c);
      const Vec2 g = detail::masked_gradient(rho_d, G.g11, r, c);
      const auto m = detail::metric_inverse(G, i, out.non_positive_definite);
      out.grad[i] = {m.a11 * g.x + m.a12 * g.y, m.a12 * g.x + m.a22 * g.y, 0.0};
      out.grad.set_valid(i, true);
    }
  return out;
}

/// Shading S~diff + S_amb multiplying rho_d in the fidelity term.
inline Grid2D diffuse_irradiance(const ShadingMaps& maps, const GlobalLight& light) {
  Grid2D s = maps.s_diff_tilde;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = s.valid(i) ? s[i] + light.s_amb : 0.0;
  return s;
}

/// lambda1 ||rho (S~diff + S_amb) - I_res^d||^2 + lambda2 ||G(rho)^-1 grad rho||_1,
/// with the metric evaluated at `rho` itself.
inline double diffuse_objective(const Grid2D& rho, const Grid2D& i_res_d, const Grid2D& irradiance,
                                const Grid2D& z, const SolverConfig& cfg) {
  const Grid2D domain = intersect_mask(i_res_d, irradiance);
  const BeltramiMetric G = compute_metric(domain, z, rho, cfg);
  const ManifoldGradient mg = manifold_gradient(rho, G);
  double fid = 0.0, tv = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!domain.valid(i)) continue;
    const double e = rho[i] * irradiance[i] - i_res_d[i];
    fid += e * e;
    tv += std::hypot(mg.grad[i].x, mg.grad[i].y);
  }
  return cfg.lambda_d1 * fid + cfg.lambda_d2 * tv;
}

/// Piecewise-smooth diffuse albedo.
///
/// Augmented Lagrangian with v = G^-1 grad rho. The metric is rebuilt from
/// the current rho at the start of each outer iteration and frozen inside it,
/// which keeps the rho step a linear solve (red-black Gauss-Seidel).
inline DiffuseAlbedo estimate_diffuse_albedo(const Grid2D& i_res_d, const ShadingMaps& maps, const GlobalLight& light,
                                             const Grid2D& z, const SolverConfig& cfg) {
  require_same_shape("estimate_diffuse_albedo", i_res_d, maps.s_diff_tilde, z);
  cfg.validate();
  const int w = i_res_d.width(), h = i_res_d.height();
  const Grid2D irradiance = diffuse_irradiance(maps, light);
  const Grid2D domain = intersect_mask(i_res_d, irradiance);
  const double pen = cfg.diffuse_penalty();
  const bool use_tv = cfg.lambda_d2 > 0.0;

  AlState st(Grid2D(w, h, 1.0), 2, use_tv ? pen : 1.0);
  Grid2D& rho = st.primal;
  rho.mask() = domain.mask();
  Grid2D& v1 = st.auxiliaries[0];
  Grid2D& v2 = st.auxiliaries[1];
  Grid2D& q1 = st.multipliers[0];
  Grid2D& q2 = st.multipliers[1];

  DiffuseAlbedo out;
  Grid2D reported = rho;
  for (std::size_t i = 0; i < reported.size(); ++i)
    if (!domain.valid(i)) reported[i] = 0.0;
  BestIterate best(reported, diffuse_objective(reported, i_res_d, irradiance, z, cfg));
  Grid2D prev = reported;
  std::vector<double> x = rho.data();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!domain.valid(i)) x[i] = 0.0;

  for (int it = 0; it < cfg.al_outer_iters; ++it) {
    st.iteration = it + 1;
    rho.data() = x;
    const BeltramiMetric G = compute_metric(domain, z, rho, cfg);
    std::vector<detail::Sym2> minv(rho.size());
    int bad = 0;
    for (std::size_t i = 0; i < rho.size(); ++i)
      if (domain.valid(i)) minv[i] = detail::metric_inverse(G, i, bad);

    StencilSystem sys(w, h);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!domain.valid(r, c)) continue;
        const std::size_t i = domain.index(r, c);
        if (irradiance[i] != 0.0) sys.add_row({Term{r, c, irradiance[i]}}, cfg.lambda_d1, i_res_d[i]);
        if (!use_tv) continue;
        const bool has_r = domain.valid_at(r, c + 1), has_d = domain.valid_at(r + 1, c);
        if (!has_r && !has_d) continue;
        const auto& m = minv[i];
        const double rows[2][2] = {{m.a11, m.a12}, {m.a12, m.a22}};
        const double targets[2] = {v1[i] - q1[i], v2[i] - q2[i]};
        for (int k = 0; k < 2; ++k) {
          const double cr = has_r ? rows[k][0] : 0.0;
          const double cd = has_d ? rows[k][1] : 0.0;
          if (has_r && has_d)
            sys.add_row({Term{r, c + 1, cr}, Term{r + 1, c, cd}, Term{r, c, -(cr + cd)}}, 0.5 * pen, targets[k]);
          else if (has_r)
            sys.add_row({Term{r, c + 1, cr}, Term{r, c, -cr}}, 0.5 * pen, targets[k]);
          else
            sys.add_row({Term{r + 1, c, cd}, Term{r, c, -cd}}, 0.5 * pen, targets[k]);
        }
      }
    gauss_seidel_sweeps(sys, x, cfg.gs_sweeps);
    rho.data() = x;

    if (use_tv) {
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          if (!domain.valid(r, c)) continue;
          const std::size_t i = domain.index(r, c);
          const Vec2 g = detail::masked_gradient(rho, domain, r, c);
          const auto& m = minv[i];
          const Vec2 mg{m.a11 * g.x + m.a12 * g.y, m.a12 * g.x + m.a22 * g.y};
          const Vec2 v = shrink_vector({mg.x + q1[i], mg.y + q2[i]}, cfg.lambda_d2 / pen);
          v1[i] = v.x;
          v2[i] = v.y;
          q1[i] += mg.x - v.x;
          q2[i] += mg.y - v.y;
        }
    }

    for (std::size_t i = 0; i < reported.size(); ++i) reported[i] = domain.valid(i) ? std::max(rho[i], 0.0) : 0.0;
    best.offer(reported, diffuse_objective(reported, i_res_d, irradiance, z, cfg));
    out.report.objective.push_back(best.value());
    out.report.iterations = it + 1;
    if (it > 0 && relative_change(reported, prev) < cfg.tolerance) {
      out.report.converged = true;
      break;
    }
    prev = reported;
  }
  if (!out.report.converged) {
    out.report.warning = true;
    out.report.message = "diffuse albedo: no convergence within al_outer_iters";
  }
  out.rho_d = best.best();
  return out;
}

}  // namespace irsfs

#endif  // IRSFS_ALBEDO_DIFFUSE_HPP
