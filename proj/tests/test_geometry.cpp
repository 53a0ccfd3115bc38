#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "irsfs/geometry.hpp"

using namespace irsfs;

namespace {

CameraRig rig_at(double cx, double cy, double fx, double fy) {
  CameraRig rig;
  rig.cx = cx;
  rig.cy = cy;
  rig.fx = fx;
  rig.fy = fy;
  return rig;
}

// Depth of the plane n . P = k along every pixel ray.
Grid2D plane_depth(int w, int h, const CameraRig& rig, const Vec3& n, double k) {
  Grid2D z(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) z(r, c) = k / dot(n, rig.ray(r, c));
  return z;
}

}  // namespace

TEST(Backproject, PrincipalPointAndUnitTangents) {
  const CameraRig rig = rig_at(2.0, 1.0, 1.0, 1.0);
  Grid2D z(5, 4, 1.0);
  z(1, 3) = 2.0;
  z(2, 2) = 0.5;
  const Vec3Grid p = backproject(z, rig);
  EXPECT_EQ(p(1, 2).x, 0.0);
  EXPECT_EQ(p(1, 2).y, 0.0);
  EXPECT_EQ(p(1, 2).z, 1.0);
  // (cy, cx + fx), z = 2 -> (2, 0, 2)
  EXPECT_DOUBLE_EQ(p(1, 3).x, 2.0);
  EXPECT_DOUBLE_EQ(p(1, 3).y, 0.0);
  EXPECT_DOUBLE_EQ(p(1, 3).z, 2.0);
  // (cy + fy, cx), z = 0.5 -> (0, 0.5, 0.5)
  EXPECT_DOUBLE_EQ(p(2, 2).x, 0.0);
  EXPECT_DOUBLE_EQ(p(2, 2).y, 0.5);
  EXPECT_DOUBLE_EQ(p(2, 2).z, 0.5);
}

TEST(Backproject, MaskedAndNonPositiveDepthStayMasked) {
  Grid2D z(3, 3, 1.0);
  z.set_valid(0, 0, false);
  z(1, 1) = 0.0;
  const Vec3Grid p = backproject(z, CameraRig{});
  EXPECT_FALSE(p.valid(0, 0));
  EXPECT_FALSE(p.valid(1, 1));
  EXPECT_TRUE(p.valid(2, 2));
}

TEST(Backproject, ReprojectionRoundTrip) {
  const CameraRig rig;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> depth(0.3, 5.0);
  Grid2D z(64, 48);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = depth(rng);
  const Vec3Grid p = backproject(z, rig);
  double worst = 0.0;
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) {
      const Vec3 q = project(p(r, c), rig);
      worst = std::max({worst, std::abs(q.x - r), std::abs(q.y - c), std::abs(q.z - z(r, c))});
    }
  EXPECT_LT(worst, 1e-9);
}

TEST(Normals, FrontoParallelPlaneFacesCamera) {
  const Vec3Grid n = compute_normals(backproject(Grid2D(8, 6, 1.0), CameraRig{}));
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 8; ++c) {
      if (r == 5 || c == 7) {
        EXPECT_FALSE(n.valid(r, c));
        continue;
      }
      ASSERT_TRUE(n.valid(r, c));
      EXPECT_NEAR(n(r, c).x, 0.0, 1e-12);
      EXPECT_NEAR(n(r, c).y, 0.0, 1e-12);
      EXPECT_NEAR(n(r, c).z, -1.0, 1e-12);
    }
}

TEST(Normals, AnalyticPlanesMatchClosedForm) {
  const CameraRig rig = rig_at(31.5, 23.5, 60.0, 55.0);
  const Vec3 planes[] = {{0.35, 0.0, 1.0}, {-0.2, 0.4, 1.0}, {0.1, -0.6, 0.9}};
  for (Vec3 n_true : planes) {
    n_true = n_true / norm(n_true);
    const Grid2D z = plane_depth(64, 48, rig, n_true, 0.8);
    const Vec3Grid n = compute_normals(backproject(z, rig));
    const Vec3 expected = -n_true;  // faces the camera at the origin
    double worst = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i)
      if (n.valid(i)) worst = std::max(worst, norm(n[i] - expected));
    EXPECT_LT(worst, 1e-6);
  }
}

TEST(Normals, WorldSlopePlane) {
  // z = z0 + s X  =>  N is proportional to (-s, 0, 1) up to orientation.
  const CameraRig rig = rig_at(15.5, 11.5, 30.0, 30.0);
  const double s = 0.4, z0 = 1.2;
  Grid2D z(32, 24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 32; ++c) z(r, c) = z0 / (1.0 - s * rig.ray(r, c).x);
  const Vec3Grid n = compute_normals(backproject(z, rig));
  Vec3 e{-s, 0.0, 1.0};
  e = -(e / norm(e));
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n.valid(i)) EXPECT_LT(norm(n[i] - e), 1e-9);
}

TEST(Normals, MaskedNeighbourMasksPixel) {
  Grid2D z(4, 4, 1.0);
  z.set_valid(1, 2, false);
  const Vec3Grid n = compute_normals(backproject(z, CameraRig{}));
  EXPECT_FALSE(n.valid(1, 1));  // right neighbour missing
  EXPECT_FALSE(n.valid(0, 2));  // down neighbour missing
  EXPECT_FALSE(n.valid(1, 2));
  EXPECT_TRUE(n.valid(0, 0));
}

TEST(Normals, UnitLengthOnCurvedSurface) {
  const CameraRig rig = rig_at(31.5, 23.5, 50.0, 50.0);
  Grid2D z(64, 48);
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 64; ++c) z(r, c) = 1.0 + 0.05 * std::sin(0.2 * c) * std::cos(0.15 * r);
  const Vec3Grid n = compute_normals(backproject(z, rig));
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n.valid(i)) EXPECT_NEAR(norm(n[i]), 1.0, 1e-12);
}

TEST(LightingGeometry, ProjectorAtOrigin) {
  Vec3Grid p(1, 1, Vec3{0, 0, 1});
  Vec3Grid n(1, 1, Vec3{0, 0, -1});
  CameraRig rig;
  rig.projector_offset = {0, 0, 0};
  const LightingGeometry g = lighting_geometry(p, n, rig);
  EXPECT_DOUBLE_EQ(g.d_p(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.l_p(0, 0).z, -1.0);
  EXPECT_DOUBLE_EQ(g.l_c(0, 0).z, -1.0);
  EXPECT_DOUBLE_EQ(g.d_c(0, 0), 1.0);
}

TEST(LightingGeometry, OffsetProjector) {
  Vec3Grid p(1, 1, Vec3{0, 0, 1});
  Vec3Grid n(1, 1, Vec3{0, 0, -1});
  const LightingGeometry g = lighting_geometry(p, n, CameraRig{});
  const double dp = std::sqrt(1.0025);
  EXPECT_NEAR(g.d_p(0, 0), 1.001249219725, 1e-12);
  EXPECT_NEAR(g.d_p(0, 0), dp, 1e-15);
  EXPECT_NEAR(g.l_p(0, 0).x, 0.05 / dp, 1e-15);
  EXPECT_NEAR(g.l_p(0, 0).y, 0.0, 1e-15);
  EXPECT_NEAR(g.l_p(0, 0).z, -1.0 / dp, 1e-15);
}

TEST(LightingGeometry, UnitDirections) {
  const CameraRig rig = rig_at(15.5, 11.5, 30.0, 30.0);
  Grid2D z(32, 24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 32; ++c) z(r, c) = 0.7 + 0.01 * r + 0.002 * c * c / 32.0;
  const LightingGeometry g = geometry_from_depth(z, rig);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!g.l_p.valid(i)) continue;
    EXPECT_NEAR(norm(g.l_p[i]), 1.0, 1e-12);
    EXPECT_NEAR(norm(g.l_c[i]), 1.0, 1e-12);
    if (g.normals.valid(i)) EXPECT_GT(dot(g.normals[i], g.l_c[i]), 0.0);
  }
}
