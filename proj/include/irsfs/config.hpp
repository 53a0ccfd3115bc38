#ifndef IRSFS_CONFIG_HPP
#define IRSFS_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "irsfs/grid.hpp"

namespace irsfs {

/// Every weight and iteration knob of the pipeline.
///
/// Depth terms are expressed in meters and intensities in [0,1], so the
/// depth weights look unbalanced at first sight: the shading Jacobian is of
/// order a / (d_p^2 * pixel footprint), several hundred per meter.
struct SolverConfig {
  // Specular albedo: fidelity, sparsity, total variation.
  double lambda_s1 = 1.0;
  double lambda_s2 = 0.002;
  double lambda_s3 = 0.002;
  // Diffuse albedo: fidelity, metric-weighted total variation.
  double lambda_d1 = 1.0;
  double lambda_d2 = 0.02;
  // Depth: shading, fidelity, second-order total variation.
  double lambda_z1 = 1.0;
  double lambda_z2 = 100.0;
  double lambda_z3 = 0.02;
  // Beltrami embedding scales (beta_z is per meter).
  double beta_I = 50.0;
  double beta_z = 500.0;
  double beta_rho = 10.0;
  // Phong shininess.
  double alpha = 2.0;

  // Augmented Lagrangian penalties. Zero selects the automatic value.
  double al_penalty = 0.0;
  double al_penalty_diffuse = 0.0;
  double al_penalty_depth = 0.0;
  int al_outer_iters = 60;
  int depth_al_iters = 10;
  int gs_sweeps = 4;
  int taylor_iters = 4;
  double tolerance = 1e-5;

  // Bilateral pre-smoothing of the raw depth.
  bool presmooth = true;
  double presmooth_sigma_spatial = 3.0;
  double presmooth_sigma_range = 0.01;

  // Stage switches; a disabled albedo stage yields rho_s = 0 or rho_d = 1.
  bool enable_specular = true;
  bool enable_diffuse = true;
  bool enable_refine = true;

  double specular_penalty() const { return al_penalty > 0.0 ? al_penalty : 10.0 * lambda_s1; }
  double diffuse_penalty() const { return al_penalty_diffuse > 0.0 ? al_penalty_diffuse : 10.0 * lambda_d2; }
  double depth_penalty() const { return al_penalty_depth > 0.0 ? al_penalty_depth : 10.0 * lambda_z3; }

  void validate() const {
    const double weights[] = {lambda_s1, lambda_s2, lambda_s3, lambda_d1, lambda_d2, lambda_z1, lambda_z2,
                              lambda_z3, beta_I,    beta_z,    beta_rho,  al_penalty, al_penalty_diffuse,
                              al_penalty_depth};
    for (double w : weights)
      if (!(w >= 0.0)) throw Error("solver config: weights must be non-negative");
    if (!(alpha >= 1.0)) throw Error("solver config: alpha must be >= 1");
    if (al_outer_iters < 1 || depth_al_iters < 1 || gs_sweeps < 1 || taylor_iters < 1)
      throw Error("solver config: iteration counts must be >= 1");
    if (!(presmooth_sigma_spatial > 0.0) || !(presmooth_sigma_range > 0.0))
      throw Error("solver config: smoothing sigmas must be positive");
    if (!(tolerance >= 0.0)) throw Error("solver config: tolerance must be non-negative");
  }

  /// Applies `fn(name, member)` to every field; drives JSON and overrides.
  template <typename Self, typename Fn>
  static void visit(Self& c, Fn&& fn) {
    fn("lambda_s1", c.lambda_s1);
    fn("lambda_s2", c.lambda_s2);
    fn("lambda_s3", c.lambda_s3);
    fn("lambda_d1", c.lambda_d1);
    fn("lambda_d2", c.lambda_d2);
    fn("lambda_z1", c.lambda_z1);
    fn("lambda_z2", c.lambda_z2);
    fn("lambda_z3", c.lambda_z3);
    fn("beta_I", c.beta_I);
    fn("beta_z", c.beta_z);
    fn("beta_rho", c.beta_rho);
    fn("alpha", c.alpha);
    fn("al_penalty", c.al_penalty);
    fn("al_penalty_diffuse", c.al_penalty_diffuse);
    fn("al_penalty_depth", c.al_penalty_depth);
    fn("al_outer_iters", c.al_outer_iters);
    fn("depth_al_iters", c.depth_al_iters);
    fn("gs_sweeps", c.gs_sweeps);
    fn("taylor_iters", c.taylor_iters);
    fn("tolerance", c.tolerance);
    fn("presmooth", c.presmooth);
    fn("presmooth_sigma_spatial", c.presmooth_sigma_spatial);
    fn("presmooth_sigma_range", c.presmooth_sigma_range);
    fn("enable_specular", c.enable_specular);
    fn("enable_diffuse", c.enable_diffuse);
    fn("enable_refine", c.enable_refine);
  }

  /// Sets one field from its textual value, as given on the command line.
  void set(const std::string& name, const std::string& value) {
    bool found = false;
    visit(*this, [&](const char* key, auto& member) {
      if (name != key) return;
      found = true;
      using M = std::decay_t<decltype(member)>;
      try {
        if constexpr (std::is_same_v<M, bool>) {
          if (value == "true" || value == "1") member = true;
          else if (value == "false" || value == "0") member = false;
          else throw Error("expected true/false");
        } else if constexpr (std::is_same_v<M, int>) {
          std::size_t pos = 0;
          member = std::stoi(value, &pos);
          if (pos != value.size()) throw Error("trailing characters");
        } else {
          std::size_t pos = 0;
          member = std::stod(value, &pos);
          if (pos != value.size()) throw Error("trailing characters");
        }
      } catch (const std::exception&) {
        throw Error("solver config: bad value '" + value + "' for " + name);
      }
    });
    if (!found) throw Error("solver config: unknown field " + name);
  }
};

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json::object();
  SolverConfig::visit(c, [&](const char* key, const auto& member) { j[key] = member; });
}

inline void from_json(const nlohmann::json& j, SolverConfig& c) {
  if (!j.is_object()) throw Error("solver config: expected a JSON object");
  std::size_t known = 0;
  SolverConfig::visit(c, [&](const char* key, auto& member) {
    if (auto it = j.find(key); it != j.end()) {
      member = it->get<std::decay_t<decltype(member)>>();
      ++known;
    }
  });
  if (known != j.size()) {
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      SolverConfig::visit(c, [&](const char* k, const auto&) { ok = ok || key == k; });
      if (!ok) throw Error("solver config: unknown field " + key);
    }
  }
}

inline SolverConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  SolverConfig cfg;
  try {
    cfg = nlohmann::json::parse(in).get<SolverConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid config file " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace irsfs

#endif  // IRSFS_CONFIG_HPP
