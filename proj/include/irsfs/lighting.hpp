#ifndef IRSFS_LIGHTING_HPP
#define IRSFS_LIGHTING_HPP

#include <algorithm>
#include <cmath>

#include "irsfs/geometry.hpp"
#include "irsfs/grid.hpp"

namespace irsfs {

/// Projector intensity `a` (intensity * m^2) and constant ambient term.
struct GlobalLight {
  double a = 1.0;
  double s_amb = 0.0;
};

struct ShadingMaps {
  Grid2D s_diff;
  Grid2D s_spec;
  Grid2D s_diff_tilde;  // a / d_p^2 * s_diff
  Grid2D s_spec_tilde;  // a / d_p^2 * s_spec
};

/// Lambertian term max(N . l_p, 0).
inline double lambert(const Vec3& n, const Vec3& l_p) { return std::max(dot(n, l_p), 0.0); }

/// Phong term max(r . l_c, 0)^alpha with r the mirror of l_p about N.
/// Zero when the projector is behind the surface.
inline double phong(const Vec3& n, const Vec3& l_p, const Vec3& l_c, double alpha) {
  const double nl = dot(n, l_p);
  if (nl <= 0.0) return 0.0;
  const Vec3 r = 2.0 * nl * n - l_p;
  const double rv = std::max(dot(r, l_c), 0.0);
  return alpha == 2.0 ? rv * rv : std::pow(rv, alpha);
}

inline Grid2D diffuse_shading(const LightingGeometry& geom) {
  Grid2D s(geom.normals.width(), geom.normals.height(), 0.0, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!geom.normals.valid(i) || !geom.l_p.valid(i)) continue;
    s[i] = lambert(geom.normals[i], geom.l_p[i]);
    s.set_valid(i, true);
  }
  return s;
}

inline Grid2D specular_shading(const LightingGeometry& geom, double alpha) {
  if (!(alpha >= 1.0)) throw Error("specular_shading: alpha must be >= 1");
  Grid2D s(geom.normals.width(), geom.normals.height(), 0.0, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!geom.normals.valid(i) || !geom.l_p.valid(i) || !geom.l_c.valid(i)) continue;
    s[i] = phong(geom.normals[i], geom.l_p[i], geom.l_c[i], alpha);
    s.set_valid(i, true);
  }
  return s;
}

/// Scales a shading map by the inverse-square falloff a / d_p^2.
inline Grid2D attenuate(const Grid2D& shading, const Grid2D& d_p, double a) {
  require_same_shape("attenuate", shading, d_p);
  Grid2D out = intersect_mask(shading, d_p);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out.valid(i) ? a / (d_p[i] * d_p[i]) * shading[i] : 0.0;
  return out;
}

inline ShadingMaps shading_maps(const LightingGeometry& geom, const GlobalLight& light, double alpha) {
  ShadingMaps m;
  m.s_diff = diffuse_shading(geom);
  m.s_spec = specular_shading(geom, alpha);
  m.s_diff_tilde = attenuate(m.s_diff, geom.d_p, light.a);
  m.s_spec_tilde = attenuate(m.s_spec, geom.d_p, light.a);
  return m;
}

/// Least-squares fit of I = a * S_diff / d_p^2 + S_amb over every pixel
/// valid in all three inputs, assuming rho_d = 1 and rho_s = 0.
/// A negative ambient estimate is clamped to zero and `a` refitted alone.
inline GlobalLight fit_global_light(const Grid2D& I, const Grid2D& s_diff, const Grid2D& d_p) {
  require_same_shape("fit_global_light", I, s_diff, d_p);
  double n = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) {
    if (!I.valid(i) || !s_diff.valid(i) || !d_p.valid(i)) continue;
    n += 1.0;
    sx += s_diff[i] / (d_p[i] * d_p[i]);
    sy += I[i];
  }
  if (n < 2.0) throw Error("fit_global_light: fewer than two valid pixels");
  const double mx = sx / n, my = sy / n;
  // Centred second pass for accuracy.
  double sxx = 0.0, sxy = 0.0, sxx_raw = 0.0, sxy_raw = 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) {
    if (!I.valid(i) || !s_diff.valid(i) || !d_p.valid(i)) continue;
    const double x = s_diff[i] / (d_p[i] * d_p[i]);
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (I[i] - my);
    sxx_raw += x * x;
    sxy_raw += x * I[i];
  }
  if (!(sxx > 1e-12 * sxx_raw) || !(sxx > 0.0))
    throw Error("fit_global_light: degenerate geometry, S_diff / d_p^2 has no variation");
  GlobalLight light;
  light.a = sxy / sxx;
  light.s_amb = my - light.a * mx;
  if (light.s_amb < 0.0) {
    light.s_amb = 0.0;
    light.a = sxy_raw / sxx_raw;
  }
  return light;
}

}  // namespace irsfs

#endif  // IRSFS_LIGHTING_HPP
