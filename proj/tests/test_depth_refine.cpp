#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "irsfs/depth_refine.hpp"
#include "irsfs/geometry.hpp"
#include "irsfs/synth.hpp"
#include "test_util.hpp"

using namespace irsfs;

namespace {

struct Oracle {
  SyntheticScene scene;
  ShadingMaps maps;
  Grid2D I;
  Albedos alb;
};

Oracle oracle(const std::string& preset, const SceneParams& p) {
  Oracle o;
  o.scene = make_scene(preset, p);
  o.maps = shading_maps(geometry_from_depth(o.scene.depth_true, o.scene.rig), o.scene.light, o.scene.alpha);
  o.I = render_ir(o.scene);
  o.alb = {o.scene.rho_d_true, o.scene.rho_s_true, o.maps.s_spec_tilde};
  return o;
}

SceneParams without_patches(SceneParams p) {
  p.patches = std::vector<SpecularPatch>{};
  return p;
}

}  // namespace

TEST(FidelityWeights, Formula) {
  CameraRig rig;
  rig.cx = 2.0;
  rig.cy = 1.0;
  rig.fx = 4.0;
  rig.fy = 2.0;
  const Grid2D w = fidelity_weights(5, 3, rig);
  EXPECT_EQ(w(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(w(0, 4), std::sqrt(1.0 + 0.25 + 0.25));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_GE(w[i], 1.0);
}

TEST(ShadingValue, MatchesOracleRender) {
  for (const char* preset : {"sphere-on-plane", "sinusoid-relief", "slanted-plane"}) {
    const Oracle o = oracle(preset, test::small_params());
    const Grid2D f = shading_value(o.scene.depth_true, o.scene.rig, o.scene.light, o.alb);
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_EQ(f.valid(i), o.I.valid(i));
      if (f.valid(i)) EXPECT_NEAR(f[i], o.I[i], 1e-6) << preset;
    }
  }
}

TEST(ShadingValue, ZeroAlbedoIsDark) {
  const Oracle o = oracle("sphere-on-plane", test::small_params(40, 30));
  const Grid2D zero(40, 30, 0.0);
  const Grid2D f = shading_value(o.scene.depth_true, o.scene.rig, o.scene.light, {zero, zero, o.maps.s_spec_tilde});
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.valid(i)) EXPECT_EQ(f[i], 0.0);
}

TEST(ShadingValue, LinearInProjectorIntensity) {
  const Oracle o = oracle("sinusoid-relief", without_patches(test::small_params(40, 30)));
  GlobalLight L = o.scene.light;
  const Grid2D f1 = shading_value(o.scene.depth_true, o.scene.rig, L, o.alb);
  L.a *= 2.0;
  const Grid2D f2 = shading_value(o.scene.depth_true, o.scene.rig, L, o.alb);
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (!f1.valid(i)) continue;
    const double amb = o.alb.rho_d[i] * L.s_amb;
    EXPECT_NEAR(f2[i] - amb, 2.0 * (f1[i] - amb), 1e-14);
  }
}

TEST(Linearization, ZerothOrderConsistency) {
  const Oracle o = oracle("sphere-on-plane", test::small_params());
  const Grid2D z = o.scene.depth_true;
  const ShadingLinearization lin = linearize_shading(z, o.I, o.scene.rig, o.scene.light, o.alb);
  const Grid2D f = shading_value(z, o.scene.rig, o.scene.light, o.alb);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!lin.value.valid(i)) continue;
    const double spec = o.alb.rho_s[i] * o.alb.s_spec_tilde[i];
    EXPECT_NEAR(lin.value[i] + o.alb.rho_d[i] * o.scene.light.s_amb + spec, f[i], 1e-15);
  }
}

TEST(Linearization, PartialsMatchCentralDifferences) {
  std::mt19937_64 rng(42);
  for (const char* preset : {"sphere-on-plane", "sinusoid-relief", "slanted-plane"}) {
    const Oracle o = oracle(preset, test::small_params(320, 240));
    const Grid2D& z = o.scene.depth_true;
    const CameraRig& rig = o.scene.rig;
    const ShadingLinearization lin = linearize_shading(z, o.I, rig, o.scene.light, o.alb);
    std::uniform_int_distribution<int> row(0, z.height() - 2), col(0, z.width() - 2);
    const double h = 1e-5;
    int tested = 0;
    while (tested < 334) {
      const int r = row(rng), c = col(rng);
      const std::size_t i = z.index(r, c);
      if (!lin.value.valid(i) || lin.value[i] <= 0.0) continue;
      const double K = o.scene.light.a * o.alb.rho_d[i];
      auto f = [&](double zc, double zd, double zr) {
        return shading_jet(zc, zd, zr, rig.ray(r, c), rig.ray(r + 1, c), rig.ray(r, c + 1), rig.projector_offset, K,
                           false)
            .value;
      };
      const double zc = z(r, c), zd = z(r + 1, c), zr = z(r, c + 1);
      const double fd[3] = {(f(zc + h, zd, zr) - f(zc - h, zd, zr)) / (2 * h),
                            (f(zc, zd + h, zr) - f(zc, zd - h, zr)) / (2 * h),
                            (f(zc, zd, zr + h) - f(zc, zd, zr - h)) / (2 * h)};
      const double an[3] = {lin.coeff_center[i], lin.coeff_down[i], lin.coeff_right[i]};
      double scale = 0.0, err = 0.0;
      for (int k = 0; k < 3; ++k) {
        scale = std::max(scale, std::abs(an[k]));
        err = std::max(err, std::abs(an[k] - fd[k]));
      }
      EXPECT_LE(err / scale, 1e-4) << preset << " at (" << r << ", " << c << ")";
      ++tested;
    }
  }
}

TEST(Linearization, FrontoParallelPlaneAtPrincipalPoint) {
  // Normal incidence: the cosine is stationary under tilts, so only the
  // inverse-square falloff responds: df/dz = -2 K / z^3, neighbours 0.
  SceneParams p = test::small_params(41, 31);
  p.projector_offset = {0.0, 0.0, 0.0};
  p.distance = 0.9;
  p.rho_d = 0.7;
  const Oracle o = oracle("plane", without_patches(p));
  const ShadingLinearization lin =
      linearize_shading(o.scene.depth_true, o.I, o.scene.rig, o.scene.light, o.alb);
  const double K = p.a * p.rho_d, z = p.distance;
  EXPECT_NEAR(lin.value(15, 20), K / (z * z), 1e-12);
  EXPECT_NEAR(lin.coeff_center(15, 20), -2.0 * K / (z * z * z), 1e-9);
  EXPECT_NEAR(lin.coeff_down(15, 20), 0.0, 1e-9);
  EXPECT_NEAR(lin.coeff_right(15, 20), 0.0, 1e-9);
  // Mirror pixels across the diagonal swap the roles of down and right.
  for (int k = 3; k <= 9; k += 3) {
    EXPECT_NEAR(lin.coeff_down(15 + k, 20), lin.coeff_right(15, 20 + k), 1e-12);
    EXPECT_NEAR(lin.coeff_right(15 + k, 20), lin.coeff_down(15, 20 + k), 1e-12);
    EXPECT_NEAR(lin.coeff_center(15 + k, 20), lin.coeff_center(15, 20 + k), 1e-12);
  }
}

TEST(SecondOrderTv, ZeroOnAffineDepth) {
  Grid2D z(12, 9);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 12; ++c) z(r, c) = 1.0 + 0.25 * c - 0.125 * r;
  EXPECT_EQ(second_order_tv(z), 0.0);
  z(4, 4) += 0.5;
  EXPECT_DOUBLE_EQ(second_order_tv(z), 4.0);  // centre 2, four neighbours 0.5 each
}

TEST(SecondOrderTv, MaskedNeighbourDisablesRow) {
  Grid2D z(3, 1, 0.0);
  z(0, 1) = 1.0;
  double v = 0.0;
  EXPECT_TRUE(second_difference(z, 0, 1, 0, 1, v));
  EXPECT_EQ(v, -2.0);
  z.set_valid(0, 2, false);
  EXPECT_FALSE(second_difference(z, 0, 1, 0, 1, v));
}

TEST(RefineDepth, PureFidelityReturnsInput) {
  const Oracle o = oracle("sinusoid-relief", test::small_params(60, 40));
  const Grid2D zq = quantize_depth(o.scene.depth_true);
  SolverConfig cfg;
  cfg.lambda_z1 = 0.0;
  cfg.lambda_z3 = 0.0;
  const DepthRefinement out = refine_depth(zq, o.I, o.scene.rig, o.scene.light, o.alb, cfg);
  for (std::size_t i = 0; i < zq.size(); ++i) EXPECT_EQ(out.z[i], zq[i]);
}

TEST(RefineDepth, ExactRenderIsNearFixedPoint) {
  const Oracle o = oracle("sphere-on-plane", test::small_params());
  const DepthRefinement out =
      refine_depth(o.scene.depth_true, o.I, o.scene.rig, o.scene.light, o.alb, SolverConfig{});
  double worst = 0.0;
  for (std::size_t i = 0; i < out.z.size(); ++i)
    if (out.z.valid(i)) worst = std::max(worst, std::abs(out.z[i] - o.scene.depth_true[i]));
  EXPECT_LT(worst, 0.05e-3);
}

TEST(RefineDepth, QuantizedPlaneErrorHalved) {
  const Oracle o = oracle("slanted-plane", without_patches(test::small_params(320, 240)));
  const Grid2D zq = quantize_depth(o.scene.depth_true);
  const DepthRefinement out = refine_depth(zq, o.I, o.scene.rig, o.scene.light, o.alb, SolverConfig{});
  const Grid2D all(zq.width(), zq.height(), 0.0, true);
  const ErrorMetrics before = error_metrics(zq, o.scene.depth_true, all);
  const ErrorMetrics after = error_metrics(out.z, o.scene.depth_true, all);
  EXPECT_LE(after.median, 0.5 * before.median) << before.median << " -> " << after.median;
}

TEST(RefineDepth, CostNonIncreasingAndBoundedMotion) {
  for (const char* preset : {"sphere-on-plane", "sinusoid-relief", "slanted-plane"}) {
    const Oracle o = oracle(preset, test::small_params(320, 240));
    const Grid2D zq = quantize_depth(o.scene.depth_true);
    const DepthRefinement out = refine_depth(zq, o.I, o.scene.rig, o.scene.light, o.alb, SolverConfig{});
    ASSERT_GE(out.costs.size(), 2u);
    for (std::size_t k = 1; k < out.costs.size(); ++k)
      EXPECT_LE(out.costs[k].total, out.costs[k - 1].total + 1e-8) << preset;
    for (std::size_t k = 1; k < out.report.objective.size(); ++k)
      EXPECT_LE(out.report.objective[k], out.report.objective[k - 1] + 1e-8) << preset;
    double worst = 0.0;
    for (std::size_t i = 0; i < zq.size(); ++i)
      if (zq.valid(i)) worst = std::max(worst, std::abs(out.z[i] - zq[i]));
    EXPECT_LE(worst, 3.0 * 0.0015) << preset;
  }
}

TEST(RefineDepth, RejectsMismatchedShapes) {
  const Oracle o = oracle("plane", test::small_params(20, 10));
  EXPECT_THROW(refine_depth(Grid2D(20, 11, 1.0), o.I, o.scene.rig, o.scene.light, o.alb, SolverConfig{}), Error);
}
