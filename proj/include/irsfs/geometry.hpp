#ifndef IRSFS_GEOMETRY_HPP
#define IRSFS_GEOMETRY_HPP

#include <cmath>

#include "irsfs/camera.hpp"
#include "irsfs/grid.hpp"

namespace irsfs {

/// Per-pixel quantities of the near-field lighting model. Each grid carries
/// its own mask: normals are missing on the last row/column, while the
/// directions and distances exist wherever a 3D point does.
struct LightingGeometry {
  Vec3Grid points;
  Vec3Grid normals;
  Vec3Grid l_p;  // unit, surface -> projector
  Vec3Grid l_c;  // unit, surface -> camera
  Grid2D d_p;
  Grid2D d_c;
};

/// P(i,j) = ((j - cx)/fx * z, (i - cy)/fy * z, z).
inline Vec3Grid backproject(const Grid2D& z, const CameraRig& rig) {
  Vec3Grid p(z.width(), z.height(), Vec3{}, false);
  for (int r = 0; r < z.height(); ++r) {
    for (int c = 0; c < z.width(); ++c) {
      if (!z.valid(r, c) || !(z(r, c) > 0.0)) continue;
      p(r, c) = rig.ray(r, c) * z(r, c);
      p.set_valid(r, c, true);
    }
  }
  return p;
}

/// Inverse of backproject for a single point: returns (row, col, depth).
inline Vec3 project(const Vec3& p, const CameraRig& rig) {
  return {rig.fy * p.y / p.z + rig.cy, rig.fx * p.x / p.z + rig.cx, p.z};
}

/// Unnormalised camera-facing normal from the forward-difference tangents:
/// P_y x P_x, which points towards the camera for the usual
/// x-right / y-down / z-forward frame.
inline Vec3 forward_normal(const Vec3& p, const Vec3& p_right, const Vec3& p_down) {
  return cross(p_down - p, p_right - p);
}

/// Unit normals by forward differences, oriented so N . l_c > 0.
/// Pixels lacking a valid right or down neighbour, or with a degenerate
/// cross product, are masked out.
inline Vec3Grid compute_normals(const Vec3Grid& points) {
  Vec3Grid n(points.width(), points.height(), Vec3{}, false);
  for (int r = 0; r + 1 < points.height(); ++r) {
    for (int c = 0; c + 1 < points.width(); ++c) {
      if (!points.valid(r, c) || !points.valid(r, c + 1) || !points.valid(r + 1, c)) continue;
      const Vec3& p = points(r, c);
      Vec3 v = forward_normal(p, points(r, c + 1), points(r + 1, c));
      const double len = norm(v);
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      v = v / len;
      if (dot(v, -p) < 0.0) v = -v;
      n(r, c) = v;
      n.set_valid(r, c, true);
    }
  }
  return n;
}

/// Directions and distances towards projector and camera (camera at origin).
inline LightingGeometry lighting_geometry(const Vec3Grid& points, const Vec3Grid& normals, const CameraRig& rig) {
  require_same_shape("lighting_geometry", points, normals);
  const int w = points.width(), h = points.height();
  LightingGeometry g{points,
                     normals,
                     Vec3Grid(w, h, Vec3{}, false),
                     Vec3Grid(w, h, Vec3{}, false),
                     Grid2D(w, h, 0.0, false),
                     Grid2D(w, h, 0.0, false)};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid(i)) continue;
    const Vec3& p = points[i];
    const Vec3 to_proj = rig.projector_offset - p;
    const double dp = norm(to_proj);
    const double dc = norm(p);
    if (!(dp > 0.0) || !(dc > 0.0)) {
      g.normals.set_valid(i, false);
      continue;
    }
    g.l_p[i] = to_proj / dp;
    g.l_c[i] = -p / dc;
    g.d_p[i] = dp;
    g.d_c[i] = dc;
    g.l_p.set_valid(i, true);
    g.l_c.set_valid(i, true);
    g.d_p.set_valid(i, true);
    g.d_c.set_valid(i, true);
  }
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!points.valid(i)) g.normals.set_valid(i, false);
  return g;
}

inline LightingGeometry lighting_geometry(const Vec3Grid& points, const CameraRig& rig) {
  return lighting_geometry(points, compute_normals(points), rig);
}

/// Convenience: depth -> full lighting geometry.
inline LightingGeometry geometry_from_depth(const Grid2D& z, const CameraRig& rig) {
  return lighting_geometry(backproject(z, rig), rig);
}

}  // namespace irsfs

#endif  // IRSFS_GEOMETRY_HPP
