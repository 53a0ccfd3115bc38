#ifndef IRSFS_DEPTH_REFINE_HPP
#define IRSFS_DEPTH_REFINE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "irsfs/camera.hpp"
#include "irsfs/config.hpp"
#include "irsfs/geometry.hpp"
#include "irsfs/grid.hpp"
#include "irsfs/lighting.hpp"
#include "irsfs/solvers.hpp"

namespace irsfs {

/// Reflectance inputs of the depth stage. The specular term rho_s * S~spec
/// is held fixed while the depth moves.
struct Albedos {
  Grid2D rho_d;
  Grid2D rho_s;
  Grid2D s_spec_tilde;
};

/// Per-pixel fidelity weight sqrt(1 + ((j-cx)/fx)^2 + ((i-cy)/fy)^2), i.e. the
/// length of the pixel ray with unit z, so w (z - z0) is a distance along it.
inline Grid2D fidelity_weights(int width, int height, const CameraRig& rig) {
  Grid2D w(width, height, 1.0);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) w(r, c) = norm(rig.ray(r, c));
  return w;
}

/// Diffuse shading f(z_ij, z_i+1,j, z_i,j+1) = K (N . l_p) / d_p^2 and its
/// partial derivatives with respect to the three depths, K = a * rho_d.
struct ShadingJet {
  double value = 0.0;
  double d_center = 0.0;
  double d_down = 0.0;
  double d_right = 0.0;
  bool valid = false;
};

/// Evaluates the three-point shading function at one pixel.
///
/// With P = z r, A = P_down - P, B = P_right - P and c = A x B (camera
/// facing up to the sign s), L = o - P and d = |L|:
///   f = K s (c . L) / (|c| d^3)
/// so every partial follows from dc, dL and dd by the quotient rule. The
/// Lambertian clamp zeroes f and its partials when s (c . L) <= 0.
inline ShadingJet shading_jet(double z, double z_down, double z_right, const Vec3& ray, const Vec3& ray_down,
                              const Vec3& ray_right, const Vec3& projector, double K, bool with_partials = true) {
  ShadingJet j;
  const Vec3 P = ray * z;
  const Vec3 A = ray_down * z_down - P;
  const Vec3 B = ray_right * z_right - P;
  const Vec3 cvec = cross(A, B);
  const double h = norm(cvec);
  const Vec3 L = projector - P;
  const double d = norm(L);
  if (!(h > 0.0) || !(d > 0.0) || !std::isfinite(h)) return j;
  j.valid = true;
  const double s = dot(cvec, -P) < 0.0 ? -1.0 : 1.0;
  const double g = dot(cvec, L);
  if (s * g <= 0.0) return j;
  const double d3 = d * d * d;
  j.value = K * s * g / (h * d3);
  if (!with_partials) return j;

  auto partial = [&](const Vec3& dc, const Vec3& dL, double dd) {
    const double dg = dot(dc, L) + dot(cvec, dL);
    const double dh = dot(cvec, dc) / h;
    return K * s * (dg / (h * d3) - g * dh / (h * h * d3) - 3.0 * g * dd / (h * d3 * d));
  };
  const Vec3 zero{};
  j.d_down = partial(cross(ray_down, B), zero, 0.0);
  j.d_right = partial(cross(A, ray_right), zero, 0.0);
  j.d_center = partial(cross(ray, A - B), -ray, dot(L, -ray) / d);
  return j;
}

/// Per-pixel rendered intensity from depth:
///   (a rho_d / d_p^2)(N . l_p)_+ + rho_d S_amb + rho_s S~spec
/// with N, l_p, d_p recomputed from z. Pixels without a forward stencil or
/// with a degenerate normal are masked out.
inline Grid2D shading_value(const Grid2D& z, const CameraRig& rig, const GlobalLight& light, const Albedos& alb) {
  require_same_shape("shading_value", z, alb.rho_d, alb.rho_s, alb.s_spec_tilde);
  Grid2D out(z.width(), z.height(), 0.0, false);
  for (int r = 0; r + 1 < z.height(); ++r)
    for (int c = 0; c + 1 < z.width(); ++c) {
      if (!z.valid(r, c) || !z.valid(r + 1, c) || !z.valid(r, c + 1)) continue;
      if (!alb.rho_d.valid(r, c)) continue;
      const ShadingJet jet = shading_jet(z(r, c), z(r + 1, c), z(r, c + 1), rig.ray(r, c), rig.ray(r + 1, c),
                                         rig.ray(r, c + 1), rig.projector_offset, light.a * alb.rho_d(r, c), false);
      if (!jet.valid) continue;
      const double spec = alb.rho_s.valid(r, c) && alb.s_spec_tilde.valid(r, c)
                              ? alb.rho_s(r, c) * alb.s_spec_tilde(r, c)
                              : 0.0;
      out(r, c) = jet.value + alb.rho_d(r, c) * light.s_amb + spec;
      out.set_valid(r, c, true);
    }
  return out;
}

/// First-order model of the diffuse shading about z_k:
///   f(z) ~ value + center (z_ij - z_ij^k) + down (z_i+1,j - ...) + right (z_i,j+1 - ...)
/// `target` is I - rho_d S_amb - rho_s S~spec and
/// `rhs` = target - f(z_k) + center z_ij^k + down z_i+1,j^k + right z_i,j+1^k,
/// so that each row reads  center z_ij + down z_i+1,j + right z_i,j+1 = rhs.
struct ShadingLinearization {
  Grid2D coeff_center;
  Grid2D coeff_down;
  Grid2D coeff_right;
  Grid2D value;
  Grid2D target;
  Grid2D rhs;
};

/// Pixels that carry a shading term: valid I, albedo and a full forward stencil.
inline Grid2D shading_domain(const Grid2D& z, const Grid2D& I, const Albedos& alb) {
  Grid2D dom(z.width(), z.height(), 0.0, false);
  for (int r = 0; r + 1 < z.height(); ++r)
    for (int c = 0; c + 1 < z.width(); ++c)
      if (z.valid(r, c) && z.valid(r + 1, c) && z.valid(r, c + 1) && I.valid(r, c) && alb.rho_d.valid(r, c))
        dom.set_valid(r, c, true);
  return dom;
}

inline ShadingLinearization linearize_shading(const Grid2D& z_k, const Grid2D& I, const CameraRig& rig,
                                              const GlobalLight& light, const Albedos& alb, const Grid2D& domain) {
  require_same_shape("linearize_shading", z_k, I, alb.rho_d, alb.rho_s, alb.s_spec_tilde, domain);
  const int w = z_k.width(), h = z_k.height();
  ShadingLinearization lin{Grid2D(w, h, 0.0, false), Grid2D(w, h, 0.0, false), Grid2D(w, h, 0.0, false),
                           Grid2D(w, h, 0.0, false), Grid2D(w, h, 0.0, false), Grid2D(w, h, 0.0, false)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!domain.valid(r, c)) continue;
      const std::size_t i = z_k.index(r, c);
      const ShadingJet jet = shading_jet(z_k(r, c), z_k(r + 1, c), z_k(r, c + 1), rig.ray(r, c), rig.ray(r + 1, c),
                                         rig.ray(r, c + 1), rig.projector_offset, light.a * alb.rho_d[i]);
      const double spec = alb.rho_s.valid(i) && alb.s_spec_tilde.valid(i) ? alb.rho_s[i] * alb.s_spec_tilde[i] : 0.0;
      lin.coeff_center[i] = jet.d_center;
      lin.coeff_down[i] = jet.d_down;
      lin.coeff_right[i] = jet.d_right;
      lin.value[i] = jet.value;
      lin.target[i] = I[i] - alb.rho_d[i] * light.s_amb - spec;
      lin.rhs[i] = lin.target[i] - jet.value + jet.d_center * z_k(r, c) + jet.d_down * z_k(r + 1, c) +
                   jet.d_right * z_k(r, c + 1);
      for (Grid2D* g : {&lin.coeff_center, &lin.coeff_down, &lin.coeff_right, &lin.value, &lin.target, &lin.rhs})
        g->set_valid(i, true);
    }
  return lin;
}

inline ShadingLinearization linearize_shading(const Grid2D& z_k, const Grid2D& I, const CameraRig& rig,
                                              const GlobalLight& light, const Albedos& alb) {
  return linearize_shading(z_k, I, rig, light, alb, shading_domain(z_k, I, alb));
}

/// Centred second difference along one axis; defined only where both
/// neighbours are valid, so it vanishes on affine depth up to rounding.
inline bool second_difference(const Grid2D& z, int r, int c, int dr, int dc, double& out) {
  if (!z.valid(r, c) || !z.valid_at(r - dr, c - dc) || !z.valid_at(r + dr, c + dc)) return false;
  out = z(r - dr, c - dc) - 2.0 * z(r, c) + z(r + dr, c + dc);
  return true;
}

/// ||H z||_1 = sum |D_xx z| + |D_yy z|.
inline double second_order_tv(const Grid2D& z) {
  double s = 0.0, v = 0.0;
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) {
      if (second_difference(z, r, c, 0, 1, v)) s += std::abs(v);
      if (second_difference(z, r, c, 1, 0, v)) s += std::abs(v);
    }
  return s;
}

/// Terms of the depth objective, reported separately for diagnostics.
struct DepthCost {
  double shading = 0.0;
  double fidelity = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

/// lambda1 E_sh + lambda2 ||w (z - z0)||^2 + lambda3 ||H z||_1 evaluated with
/// the full non-linear shading over `domain`.
inline DepthCost depth_cost(const Grid2D& z, const Grid2D& z0, const Grid2D& I, const CameraRig& rig,
                            const GlobalLight& light, const Albedos& alb, const Grid2D& domain,
                            const SolverConfig& cfg) {
  DepthCost cost;
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) {
      if (!domain.valid(r, c)) continue;
      const std::size_t i = z.index(r, c);
      const ShadingJet jet = shading_jet(z(r, c), z(r + 1, c), z(r, c + 1), rig.ray(r, c), rig.ray(r + 1, c),
                                         rig.ray(r, c + 1), rig.projector_offset, light.a * alb.rho_d[i], false);
      const double spec = alb.rho_s.valid(i) && alb.s_spec_tilde.valid(i) ? alb.rho_s[i] * alb.s_spec_tilde[i] : 0.0;
      const double e = jet.value - (I[i] - alb.rho_d[i] * light.s_amb - spec);
      cost.shading += e * e;
    }
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) {
      if (!z.valid(r, c)) continue;
      const double wgt = norm(rig.ray(r, c));
      const double e = wgt * (z(r, c) - z0(r, c));
      cost.fidelity += e * e;
    }
  cost.smoothness = second_order_tv(z);
  cost.total = cfg.lambda_z1 * cost.shading + cfg.lambda_z2 * cost.fidelity + cfg.lambda_z3 * cost.smoothness;
  return cost;
}

struct DepthRefinement {
  Grid2D z;
  SolveReport report;             // objective: full cost after each Taylor iteration
  std::vector<DepthCost> costs;   // initial cost followed by one entry per Taylor iteration
  std::vector<double> step_sizes; // accepted line-search step per Taylor iteration
};

namespace detail {

/// Solves one linearised problem
///   min lambda1 ||A z - rhs||^2 + lambda2 ||w (z - z0)||^2 + lambda3 ||H z||_1
/// by Augmented Lagrangian splitting q = H z with shrinkage and Gauss-Seidel
/// sweeps. q and the scaled multipliers mu persist across Taylor iterations
/// since H does not change.
struct SecondOrderSplit {
  Grid2D qx, qy, mux, muy;
};

inline void solve_linearized_depth(const ShadingLinearization& lin, const Grid2D& z0, const Grid2D& weights,
                                   const SolverConfig& cfg, SecondOrderSplit& split, std::vector<double>& x) {
  const int w = z0.width(), h = z0.height();
  const double pen = cfg.depth_penalty();
  const bool use_tv = cfg.lambda_z3 > 0.0;

  auto emit_rows = [&](auto&& emit) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!z0.valid(r, c)) continue;
        const std::size_t i = z0.index(r, c);
        if (lin.rhs.valid(i))
          emit({Term{r, c, lin.coeff_center[i]}, Term{r + 1, c, lin.coeff_down[i]}, Term{r, c + 1, lin.coeff_right[i]}},
               cfg.lambda_z1, lin.rhs[i]);
        emit({Term{r, c, 1.0}}, cfg.lambda_z2 * weights[i] * weights[i], z0[i]);
        if (!use_tv) continue;
        if (z0.valid_at(r, c - 1) && z0.valid_at(r, c + 1))
          emit({Term{r, c - 1, 1.0}, Term{r, c, -2.0}, Term{r, c + 1, 1.0}}, 0.5 * pen, split.qx[i] - split.mux[i]);
        if (z0.valid_at(r - 1, c) && z0.valid_at(r + 1, c))
          emit({Term{r - 1, c, 1.0}, Term{r, c, -2.0}, Term{r + 1, c, 1.0}}, 0.5 * pen, split.qy[i] - split.muy[i]);
      }
  };

  StencilSystem sys(w, h);
  emit_rows([&](std::initializer_list<Term> t, double wgt, double tgt) { sys.add_row(t, wgt, tgt); });
  const int inner = use_tv ? cfg.depth_al_iters : 1;
  Grid2D zg = z0;
  for (int it = 0; it < inner; ++it) {
    if (it > 0) {
      sys.clear_rhs();
      emit_rows([&](std::initializer_list<Term> t, double wgt, double tgt) { sys.add_rhs(t, wgt, tgt); });
    }
    gauss_seidel_sweeps(sys, x, cfg.gs_sweeps);
    if (!use_tv) continue;
    zg.data() = x;
    double v = 0.0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = zg.index(r, c);
        if (second_difference(zg, r, c, 0, 1, v)) {
          split.qx[i] = shrink_scalar(v + split.mux[i], cfg.lambda_z3 / pen);
          split.mux[i] += v - split.qx[i];
        }
        if (second_difference(zg, r, c, 1, 0, v)) {
          split.qy[i] = shrink_scalar(v + split.muy[i], cfg.lambda_z3 / pen);
          split.muy[i] += v - split.qy[i];
        }
      }
  }
}

}  // namespace detail

/// Refines depth against the IR image with the lighting and albedos fixed.
///
/// Each outer iteration linearises the shading about the current depth
/// (refreshing N, l_p and d_p), solves the convex subproblem, and then
/// backtracks along the step until the full non-linear cost does not
/// increase. A step that cannot be made non-increasing ends the loop.
inline DepthRefinement refine_depth(const Grid2D& z0, const Grid2D& I, const CameraRig& rig, const GlobalLight& light,
                                    const Albedos& alb, const SolverConfig& cfg) {
  require_same_shape("refine_depth", z0, I, alb.rho_d, alb.rho_s, alb.s_spec_tilde);
  cfg.validate();
  DepthRefinement out;
  out.z = z0;
  if (cfg.lambda_z1 == 0.0 && cfg.lambda_z3 == 0.0) {
    // Pure fidelity: z0 is the exact minimiser.
    out.report.converged = true;
    return out;
  }
  const int w = z0.width(), h = z0.height();
  const Grid2D weights = fidelity_weights(w, h, rig);
  const Grid2D domain = shading_domain(z0, I, alb);

  detail::SecondOrderSplit split{Grid2D(w, h, 0.0), Grid2D(w, h, 0.0), Grid2D(w, h, 0.0), Grid2D(w, h, 0.0)};
  {
    double v = 0.0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = z0.index(r, c);
        if (second_difference(z0, r, c, 0, 1, v)) split.qx[i] = v;
        if (second_difference(z0, r, c, 1, 0, v)) split.qy[i] = v;
      }
  }

  Grid2D z = z0;
  DepthCost cost = depth_cost(z, z0, I, rig, light, alb, domain, cfg);
  out.costs.push_back(cost);
  for (int k = 0; k < cfg.taylor_iters; ++k) {
    const ShadingLinearization lin = linearize_shading(z, I, rig, light, alb, domain);
    std::vector<double> x = z.data();
    detail::solve_linearized_depth(lin, z0, weights, cfg, split, x);

    // Backtracking on the non-linear cost.
    Grid2D trial = z;
    double step = 1.0;
    bool accepted = false;
    DepthCost trial_cost;
    for (int halving = 0; halving < 8; ++halving, step *= 0.5) {
      for (std::size_t i = 0; i < z.size(); ++i)
        if (z.valid(i)) trial[i] = z[i] + step * (x[i] - z[i]);
      trial_cost = depth_cost(trial, z0, I, rig, light, alb, domain, cfg);
      if (trial_cost.total <= cost.total) {
        accepted = true;
        break;
      }
    }
    out.report.iterations = k + 1;
    if (!accepted) {
      // Stationary for the linearised scheme; re-linearising at the same
      // depth would produce the same step.
      out.report.objective.push_back(cost.total);
      out.costs.push_back(cost);
      out.step_sizes.push_back(0.0);
      out.report.converged = true;
      out.report.message = "depth refinement: stopped, no cost decrease along the linearised step";
      break;
    }
    const double change = relative_change(trial, z);
    z = trial;
    cost = trial_cost;
    out.report.objective.push_back(cost.total);
    out.costs.push_back(cost);
    out.step_sizes.push_back(step);
    if (change < cfg.tolerance * 1e-3) {
      // Depth is ~1 m, so the relative change is scaled to micrometres.
      out.report.converged = true;
      break;
    }
  }
  out.z = z;
  return out;
}

}  // namespace irsfs

#endif  // IRSFS_DEPTH_REFINE_HPP
