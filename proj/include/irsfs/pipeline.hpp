#ifndef IRSFS_PIPELINE_HPP
#define IRSFS_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsfs/albedo_diffuse.hpp"
#include "irsfs/albedo_specular.hpp"
#include "irsfs/camera.hpp"
#include "irsfs/config.hpp"
#include "irsfs/depth_refine.hpp"
#include "irsfs/geometry.hpp"
#include "irsfs/io.hpp"
#include "irsfs/lighting.hpp"
#include "irsfs/presmooth.hpp"
#include "irsfs/synth.hpp"

namespace irsfs {

/// Error raised by a pipeline stage; `stage` names the failing step.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineReport {
  GlobalLight light;
  std::map<std::string, double> timings_ms;
  std::map<std::string, double> costs;
  std::map<std::string, int> iterations;
  std::vector<std::string> warnings;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
  std::optional<std::string> error;

  /// Keys come out sorted (nlohmann::json objects are ordered maps), so the
  /// text is deterministic; wall-clock timings are opt-in for that reason.
  nlohmann::json to_json(bool include_timings = true) const {
    nlohmann::json j;
    j["light"] = {{"a", light.a}, {"s_amb", light.s_amb}};
    j["costs"] = costs;
    j["iterations"] = iterations;
    j["warnings"] = warnings;
    j["metrics"] = metrics;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    if (include_timings) j["timings_ms"] = timings_ms;
    if (error) j["error"] = *error;
    return j;
  }
};

/// Every intermediate of one pipeline run.
struct PipelineResult {
  Grid2D z_smoothed;
  Grid2D z_refined;
  GlobalLight light;
  ShadingMaps maps;
  Grid2D i_res_s;
  Grid2D rho_s;
  SolveReport specular_report;
  Grid2D i_res_d;
  Grid2D rho_d;
  SolveReport diffuse_report;
  DepthRefinement refinement;
  PipelineReport report;
};

namespace detail {

class StageTimer {
 public:
  StageTimer(PipelineReport& report, std::string name)
      : report_(report), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    report_.timings_ms[name_] = std::chrono::duration<double, std::milli>(dt).count();
  }

 private:
  PipelineReport& report_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
auto run_stage(PipelineReport& report, const std::string& name, Fn&& fn) {
  StageTimer timer(report, name);
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

/// Greedy single pass: smooth -> geometry -> light fit -> specular albedo ->
/// diffuse albedo -> depth refinement. A disabled albedo stage substitutes
/// rho_s = 0 or rho_d = 1 so later stages still run.
inline PipelineResult refine_pipeline(const Grid2D& z_raw, const Grid2D& I, const CameraRig& rig,
                                      const SolverConfig& cfg,
                                      const std::optional<std::filesystem::path>& debug_dir = std::nullopt) {
  PipelineResult out;
  PipelineReport& rep = out.report;
  detail::run_stage(rep, "validate", [&] {
    cfg.validate();
    rig.validate();
    require_same_shape("pipeline inputs", z_raw, I);
    return 0;
  });
  const int w = z_raw.width(), h = z_raw.height();

  out.z_smoothed = detail::run_stage(rep, "presmooth", [&] { return presmooth_depth(z_raw, cfg); });

  LightingGeometry geom = detail::run_stage(rep, "geometry", [&] { return geometry_from_depth(out.z_smoothed, rig); });

  out.light = detail::run_stage(rep, "lighting", [&] {
    const Grid2D s_diff = diffuse_shading(geom);
    return fit_global_light(I, s_diff, geom.d_p);
  });
  rep.light = out.light;
  out.maps = shading_maps(geom, out.light, cfg.alpha);

  out.i_res_s = specular_residual(I, out.maps, out.light);
  out.rho_s = detail::run_stage(rep, "specular_albedo", [&] {
    if (!cfg.enable_specular) {
      Grid2D zero(w, h, 0.0);
      return zero;
    }
    SpecularAlbedo s = estimate_specular_albedo(out.i_res_s, out.maps.s_spec_tilde, cfg);
    out.specular_report = s.report;
    rep.iterations["specular_albedo"] = s.report.iterations;
    if (!s.report.objective.empty()) rep.costs["specular_albedo"] = s.report.objective.back();
    if (s.report.warning) rep.warnings.push_back(s.report.message);
    return s.rho_s;
  });

  out.i_res_d = diffuse_residual(I, out.rho_s, out.maps);
  out.rho_d = detail::run_stage(rep, "diffuse_albedo", [&] {
    if (!cfg.enable_diffuse) {
      Grid2D one(w, h, 1.0);
      one.mask() = out.i_res_d.mask();
      return one;
    }
    DiffuseAlbedo d = estimate_diffuse_albedo(out.i_res_d, out.maps, out.light, out.z_smoothed, cfg);
    out.diffuse_report = d.report;
    rep.iterations["diffuse_albedo"] = d.report.iterations;
    if (!d.report.objective.empty()) rep.costs["diffuse_albedo"] = d.report.objective.back();
    if (d.report.warning) rep.warnings.push_back(d.report.message);
    return d.rho_d;
  });

  out.refinement = detail::run_stage(rep, "depth_refine", [&] {
    if (!cfg.enable_refine) {
      DepthRefinement none;
      none.z = out.z_smoothed;
      return none;
    }
    const Albedos alb{out.rho_d, out.rho_s, out.maps.s_spec_tilde};
    return refine_depth(out.z_smoothed, I, rig, out.light, alb, cfg);
  });
  out.z_refined = out.refinement.z;
  rep.iterations["depth_refine"] = out.refinement.report.iterations;
  if (!out.refinement.costs.empty()) {
    rep.costs["depth_initial"] = out.refinement.costs.front().total;
    rep.costs["depth_final"] = out.refinement.costs.back().total;
  }
  if (out.refinement.report.warning) rep.warnings.push_back(out.refinement.report.message);

  if (debug_dir) {
    std::filesystem::create_directories(*debug_dir);
    write_pfm(out.z_smoothed, *debug_dir / "depth_smoothed.pfm");
    write_pfm(out.maps.s_diff_tilde, *debug_dir / "s_diff_tilde.pfm");
    write_pfm(out.maps.s_spec_tilde, *debug_dir / "s_spec_tilde.pfm");
    write_pfm(out.i_res_s, *debug_dir / "residual_specular.pfm");
    write_pfm(out.rho_s, *debug_dir / "rho_s.pfm");
    write_pfm(out.i_res_d, *debug_dir / "residual_diffuse.pfm");
    write_pfm(out.rho_d, *debug_dir / "rho_d.pfm");
    const BeltramiMetric G = compute_metric(out.i_res_d, out.z_smoothed, out.rho_d, cfg);
    Grid2D det = G.g11;
    for (std::size_t i = 0; i < det.size(); ++i) det[i] = det.valid(i) ? G.det(i) : 0.0;
    write_pfm(det, *debug_dir / "metric_det.pfm");
  }
  return out;
}

namespace detail {

inline void write_report(const PipelineReport& rep, const std::filesystem::path& path, bool include_timings) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report: " + path.string());
  out << rep.to_json(include_timings).dump(2) << "\n";
}

}  // namespace detail

struct PipelinePaths {
  std::filesystem::path depth;
  std::filesystem::path ir;
  std::filesystem::path calib;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> debug_dir;
};

/// File-level entry point behind `irsfs refine`. The report is written even
/// when a stage fails, carrying the error message.
inline PipelineReport run_pipeline(const PipelinePaths& paths, const SolverConfig* override_cfg = nullptr) {
  PipelineReport failed;
  try {
    const Grid2D z = detail::run_stage(failed, "load_depth", [&] { return load_depth(paths.depth); });
    const Grid2D I = detail::run_stage(failed, "load_ir", [&] { return load_ir(paths.ir); });
    const CameraRig rig = detail::run_stage(failed, "load_calibration", [&] { return load_calibration(paths.calib); });
    SolverConfig cfg = override_cfg ? *override_cfg : SolverConfig{};
    if (!override_cfg && paths.config)
      cfg = detail::run_stage(failed, "load_config", [&] { return load_config(*paths.config); });
    if (!z.same_shape(I))
      throw StageError("load_ir", "IR image is " + std::to_string(I.width()) + "x" + std::to_string(I.height()) +
                                      " but depth is " + std::to_string(z.width()) + "x" + std::to_string(z.height()));
    PipelineResult res = refine_pipeline(z, I, rig, cfg, paths.debug_dir);
    for (const auto& [k, v] : failed.timings_ms) res.report.timings_ms[k] = v;
    save_depth(res.z_refined, paths.out);
    if (paths.report) detail::write_report(res.report, *paths.report, true);
    return res.report;
  } catch (const std::exception& e) {
    failed.error = e.what();
    if (paths.report) {
      try {
        detail::write_report(failed, *paths.report, true);
      } catch (const std::exception&) {
      }
    }
    throw;
  }
}

/// Everything produced by one synthetic experiment.
struct SyntheticExperiment {
  SyntheticScene scene;
  Grid2D ir;
  Grid2D specular_gt;
  Grid2D region;
  Grid2D z_quantized;
  PipelineResult result;
  PipelineReport report;
};

/// Intensity threshold (in [0,1]) above which a pixel of the ground-truth
/// specular map belongs to the specular region: one gray level.
inline constexpr double kSpecularRegionThreshold = 1.0 / 255.0;

inline nlohmann::json metrics_json(const ErrorMetrics& m) {
  return {{"median_mm", m.median}, {"p90_mm", m.p90}, {"rmse_mm", m.rmse}, {"count", m.count}};
}

/// Render -> quantize -> pipeline -> depth and specular-irradiance metrics,
/// overall and inside the ground-truth specular region.
inline SyntheticExperiment run_synthetic_experiment(const std::string& preset, const SceneParams& params,
                                                    const SolverConfig& cfg) {
  SyntheticExperiment ex;
  ex.scene = make_scene(preset, params);
  ex.ir = add_noise(render_ir(ex.scene), params.noise_sigma, params.seed);
  ex.specular_gt = render_specular_ground_truth(ex.scene);
  ex.region = specular_region(ex.specular_gt, kSpecularRegionThreshold);
  ex.z_quantized = quantize_depth(ex.scene.depth_true, params.quant_step);
  ex.result = refine_pipeline(ex.z_quantized, ex.ir, ex.scene.rig, cfg);
  PipelineReport rep = ex.result.report;

  const Grid2D all(ex.region.width(), ex.region.height(), 0.0, true);
  nlohmann::json m;
  m["overall"]["input"] = metrics_json(error_metrics(ex.z_quantized, ex.scene.depth_true, all));
  m["overall"]["smoothed"] = metrics_json(error_metrics(ex.result.z_smoothed, ex.scene.depth_true, all));
  m["overall"]["refined"] = metrics_json(error_metrics(ex.result.z_refined, ex.scene.depth_true, all));
  if (ex.region.count_valid() > 0) {
    m["specular"]["input"] = metrics_json(error_metrics(ex.z_quantized, ex.scene.depth_true, ex.region));
    m["specular"]["smoothed"] = metrics_json(error_metrics(ex.result.z_smoothed, ex.scene.depth_true, ex.region));
    m["specular"]["refined"] = metrics_json(error_metrics(ex.result.z_refined, ex.scene.depth_true, ex.region));
  }
  Grid2D spec_est = ex.result.maps.s_spec_tilde;
  for (std::size_t i = 0; i < spec_est.size(); ++i)
    spec_est[i] = spec_est.valid(i) ? ex.result.rho_s[i] * spec_est[i] : 0.0;
  m["specular_irradiance_rmse_gray"] = intensity_rmse_gray(spec_est, ex.specular_gt, ex.specular_gt);
  m["specular_region_pixels"] = ex.region.count_valid();
  rep.metrics = m;
  rep.extra["scene"] = {{"preset", preset},
                        {"seed", params.seed},
                        {"width", ex.scene.depth_true.width()},
                        {"height", ex.scene.depth_true.height()},
                        {"quant_step_m", params.quant_step},
                        {"noise_sigma", params.noise_sigma},
                        {"true_light", {{"a", ex.scene.light.a}, {"s_amb", ex.scene.light.s_amb}}}};
  ex.report = rep;
  return ex;
}

}  // namespace irsfs

#endif  // IRSFS_PIPELINE_HPP
