#ifndef IRSFS_SYNTH_HPP
#define IRSFS_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsfs/camera.hpp"
#include "irsfs/geometry.hpp"
#include "irsfs/grid.hpp"
#include "irsfs/lighting.hpp"

namespace irsfs {

/// Ground truth for one synthetic experiment.
struct SyntheticScene {
  std::string preset;
  Grid2D depth_true;
  Grid2D rho_d_true;
  Grid2D rho_s_true;
  CameraRig rig;
  GlobalLight light;
  double alpha = 2.0;
};

/// A disc of specular albedo in image coordinates.
struct SpecularPatch {
  double row = 0.0;
  double col = 0.0;
  double radius = 0.0;  // pixels
};

/// Parameters accepted by make_scene. Every field has a default so an empty
/// JSON object selects the stock scene of the preset.
struct SceneParams {
  int width = 640;
  int height = 480;
  double fx = 525.0;
  double fy = 525.0;
  std::optional<double> cx;  // default (width - 1) / 2
  std::optional<double> cy;  // default (height - 1) / 2
  Vec3 projector_offset{0.05, 0.0, 0.0};
  double distance = 0.8;   // background plane depth, meters
  double a = 0.35;         // projector intensity, intensity * m^2
  double s_amb = 0.05;
  double alpha = 2.0;
  double rho_d = 0.8;
  double rho_s = 0.6;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;     // additive IR noise, intensity units
  double quant_step = 0.0015;   // meters
  // slanted-plane
  double slope = 0.35;
  // sphere-on-plane
  double sphere_radius = 0.15;
  double cap_height = 0.06;
  // sinusoid-relief
  double relief_amplitude = 0.006;
  double relief_period = 0.2;  // meters on the base plane
  // two-albedo-split
  double rho_d_left = 0.3;
  double rho_d_right = 0.9;
  // Explicit patches replace the preset's default placement.
  std::optional<std::vector<SpecularPatch>> patches;
};

inline void from_json(const nlohmann::json& j, SceneParams& p) {
  if (!j.is_object()) throw Error("scene params: expected a JSON object");
  static const std::array<const char*, 26> known = {
      "width",   "height", "fx",          "fy",         "cx",          "cy",           "projector_offset",
      "distance", "a",     "s_amb",       "alpha",      "rho_d",       "rho_s",        "seed",
      "noise_sigma", "quant_step", "slope", "sphere_radius", "cap_height", "relief_amplitude",
      "relief_period", "rho_d_left", "rho_d_right", "patches", "preset", "comment"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
      throw Error("scene params: unknown field " + key);
  auto get = [&](const char* key, auto& member) {
    if (auto it = j.find(key); it != j.end()) member = it->get<std::decay_t<decltype(member)>>();
  };
  get("width", p.width);
  get("height", p.height);
  get("fx", p.fx);
  get("fy", p.fy);
  if (j.contains("cx")) p.cx = j.at("cx").get<double>();
  if (j.contains("cy")) p.cy = j.at("cy").get<double>();
  if (j.contains("projector_offset")) {
    const auto& o = j.at("projector_offset");
    if (!o.is_array() || o.size() != 3) throw Error("scene params: projector_offset must have 3 entries");
    p.projector_offset = {o[0].get<double>(), o[1].get<double>(), o[2].get<double>()};
  }
  get("distance", p.distance);
  get("a", p.a);
  get("s_amb", p.s_amb);
  get("alpha", p.alpha);
  get("rho_d", p.rho_d);
  get("rho_s", p.rho_s);
  get("seed", p.seed);
  get("noise_sigma", p.noise_sigma);
  get("quant_step", p.quant_step);
  get("slope", p.slope);
  get("sphere_radius", p.sphere_radius);
  get("cap_height", p.cap_height);
  get("relief_amplitude", p.relief_amplitude);
  get("relief_period", p.relief_period);
  get("rho_d_left", p.rho_d_left);
  get("rho_d_right", p.rho_d_right);
  if (j.contains("patches")) {
    std::vector<SpecularPatch> patches;
    for (const auto& e : j.at("patches")) {
      if (!e.is_array() || e.size() != 3) throw Error("scene params: each patch is [row, col, radius]");
      patches.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
    }
    p.patches = std::move(patches);
  }
}

inline const std::vector<std::string>& scene_presets() {
  static const std::vector<std::string> names = {"plane", "slanted-plane", "sphere-on-plane", "sinusoid-relief",
                                                 "two-albedo-split"};
  return names;
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; mt19937_64 output is fixed
/// by the standard, so scenes are identical across platforms.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
  // Box-Muller; std::normal_distribution is implementation-defined.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

/// Builds a deterministic scene. Presets: plane, slanted-plane,
/// sphere-on-plane, sinusoid-relief, two-albedo-split.
inline SyntheticScene make_scene(const std::string& preset, const SceneParams& p = {}) {
  if (std::find(scene_presets().begin(), scene_presets().end(), preset) == scene_presets().end())
    throw Error("unknown scene preset: " + preset);
  if (p.width < 4 || p.height < 4) throw Error("scene params: image must be at least 4x4");
  if (!(p.distance > 0.0)) throw Error("scene params: distance must be positive");
  SyntheticScene s;
  s.preset = preset;
  s.rig.fx = p.fx;
  s.rig.fy = p.fy;
  s.rig.cx = p.cx.value_or((p.width - 1) / 2.0);
  s.rig.cy = p.cy.value_or((p.height - 1) / 2.0);
  s.rig.projector_offset = p.projector_offset;
  s.light = {p.a, p.s_amb};
  s.alpha = p.alpha;
  const int w = p.width, h = p.height;
  s.depth_true = Grid2D(w, h, p.distance);
  s.rho_d_true = Grid2D(w, h, p.rho_d);
  s.rho_s_true = Grid2D(w, h, 0.0);

  std::mt19937_64 rng(p.seed);
  auto jitter = [&](double amplitude) { return amplitude * (2.0 * detail::uniform01(rng) - 1.0); };
  const double scale = std::min(w, h) / 480.0;  // patch layouts are tuned at 640x480
  std::vector<SpecularPatch> patches;

  if (preset == "slanted-plane") {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) s.depth_true(r, c) = p.distance / (1.0 - p.slope * s.rig.ray(r, c).x);
    patches = {{0.35 * h + jitter(5 * scale), 0.3 * w + jitter(5 * scale), 28 * scale},
               {0.65 * h + jitter(5 * scale), 0.7 * w + jitter(5 * scale), 22 * scale}};
  } else if (preset == "sphere-on-plane") {
    const double R = p.sphere_radius;
    if (!(p.cap_height > 0.0) || !(p.cap_height <= R) || !(p.cap_height < p.distance))
      throw Error("scene params: cap_height must be in (0, sphere_radius]");
    const Vec3 centre{0.0, 0.0, p.distance - p.cap_height + R};
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const Vec3 ray = s.rig.ray(r, c);
        const double b = dot(ray, centre);
        const double disc = b * b - dot(ray, ray) * (dot(centre, centre) - R * R);
        if (disc < 0.0) continue;
        const double t = (b - std::sqrt(disc)) / dot(ray, ray);
        s.depth_true(r, c) = std::min(p.distance, t);
      }
    // The rim of the cap in pixels, for patch placement.
    const double rim = std::sqrt(R * R - (R - p.cap_height) * (R - p.cap_height)) / p.distance * p.fx;
    const double ang = 0.6 + jitter(0.3);
    patches = {{s.rig.cy - 0.45 * rim * std::sin(ang), s.rig.cx - 0.45 * rim * std::cos(ang), 0.22 * rim},
               {s.rig.cy + 0.5 * rim * std::sin(ang + 0.8), s.rig.cx + 0.5 * rim * std::cos(ang + 0.8), 0.18 * rim}};
  } else if (preset == "sinusoid-relief") {
    const double k = 2.0 * std::numbers::pi / p.relief_period;
    const double phase_x = jitter(std::numbers::pi), phase_y = jitter(std::numbers::pi);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const Vec3 ray = s.rig.ray(r, c);
        s.depth_true(r, c) = p.distance + p.relief_amplitude * std::sin(k * ray.x * p.distance + phase_x) *
                                              std::sin(k * ray.y * p.distance + phase_y);
      }
    patches = {{0.3 * h + jitter(10 * scale), 0.3 * w + jitter(10 * scale), 40 * scale},
               {0.7 * h + jitter(10 * scale), 0.68 * w + jitter(10 * scale), 34 * scale}};
  } else if (preset == "two-albedo-split") {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) s.rho_d_true(r, c) = c < w / 2 ? p.rho_d_left : p.rho_d_right;
  }

  if (p.patches) patches = *p.patches;
  for (const auto& patch : patches)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const double dr = r - patch.row, dc = c - patch.col;
        if (dr * dr + dc * dc <= patch.radius * patch.radius) s.rho_s_true(r, c) = p.rho_s;
      }
  return s;
}

/// Forward model on the true depth:
///   I = (a rho_d / d_p^2) S_diff + rho_d S_amb + (a rho_s / d_p^2) S_spec
/// with normals from forward differences, exactly as the inverse stages see
/// them. The last row and column have no normal and are masked out.
inline Grid2D render_ir(const SyntheticScene& scene) {
  const LightingGeometry geom = geometry_from_depth(scene.depth_true, scene.rig);
  const ShadingMaps maps = shading_maps(geom, scene.light, scene.alpha);
  Grid2D I(scene.depth_true.width(), scene.depth_true.height(), 0.0, false);
  for (std::size_t i = 0; i < I.size(); ++i) {
    if (!maps.s_diff.valid(i) || !maps.s_spec.valid(i)) continue;
    const double rd = scene.rho_d_true[i], rs = scene.rho_s_true[i];
    I[i] = rd * maps.s_diff_tilde[i] + rd * scene.light.s_amb + rs * maps.s_spec_tilde[i];
    I.set_valid(i, true);
  }
  return I;
}

/// render_ir(scene) - render_ir(scene without specular albedo).
inline Grid2D render_specular_ground_truth(const SyntheticScene& scene) {
  SyntheticScene diffuse_only = scene;
  diffuse_only.rho_s_true = Grid2D(scene.rho_s_true.width(), scene.rho_s_true.height(), 0.0);
  Grid2D full = render_ir(scene);
  const Grid2D base = render_ir(diffuse_only);
  for (std::size_t i = 0; i < full.size(); ++i) full[i] = full.valid(i) ? full[i] - base[i] : 0.0;
  return full;
}

/// Adds N(0, sigma^2) noise to valid pixels, reproducibly from `seed`.
inline Grid2D add_noise(Grid2D I, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return I;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (std::size_t i = 0; i < I.size(); ++i)
    if (I.valid(i)) I[i] += sigma * detail::standard_normal(rng);
  return I;
}

/// round(z / step) * step on valid pixels.
inline Grid2D quantize_depth(Grid2D z, double step = 0.0015) {
  if (!(step > 0.0)) throw Error("quantize_depth: step must be positive");
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z.valid(i)) z[i] = std::round(z[i] / step) * step;
  return z;
}

/// Percentile with linear interpolation between order statistics
/// (position q * (n - 1)); `values` is reordered.
inline double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw Error("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct ErrorMetrics {
  double median = 0.0;
  double p90 = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// |z - z_true| statistics over pixels valid in both grids and in `region`,
/// in the units of the inputs times `unit_scale` (1000 turns meters into mm).
inline ErrorMetrics error_metrics(const Grid2D& z, const Grid2D& z_true, const Grid2D& region,
                                  double unit_scale = 1000.0) {
  require_same_shape("error_metrics", z, z_true, region);
  std::vector<double> err;
  double sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!z.valid(i) || !z_true.valid(i) || !region.valid(i)) continue;
    const double e = std::abs(z[i] - z_true[i]) * unit_scale;
    err.push_back(e);
    sq += e * e;
  }
  if (err.empty()) throw Error("error_metrics: empty region");
  ErrorMetrics m;
  m.count = err.size();
  m.rmse = std::sqrt(sq / static_cast<double>(err.size()));
  m.median = percentile(err, 0.5);
  m.p90 = percentile(err, 0.9);
  return m;
}

/// RMSE of two intensity maps in gray levels of [0,255].
inline double intensity_rmse_gray(const Grid2D& estimate, const Grid2D& truth, const Grid2D& region) {
  return error_metrics(estimate, truth, region, 255.0).rmse;
}

/// Region where the ground-truth specular map exceeds `threshold`.
inline Grid2D specular_region(const Grid2D& specular_gt, double threshold) {
  Grid2D region(specular_gt.width(), specular_gt.height(), 0.0, false);
  for (std::size_t i = 0; i < region.size(); ++i)
    region.set_valid(i, specular_gt.valid(i) && specular_gt[i] > threshold);
  return region;
}

}  // namespace irsfs

#endif  // IRSFS_SYNTH_HPP
