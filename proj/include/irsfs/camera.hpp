#ifndef IRSFS_CAMERA_HPP
#define IRSFS_CAMERA_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "irsfs/grid.hpp"

namespace irsfs {

/// Pinhole intrinsics shared by the IR and depth images, plus the position of
/// the IR projector in the camera frame (camera at the origin, looking down +z,
/// image rows along +y and columns along +x).
struct CameraRig {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  Vec3 projector_offset{0.05, 0.0, 0.0};

  /// Ray direction through pixel (row, col), scaled so its z component is 1.
  Vec3 ray(int row, int col) const { return {(col - cx) / fx, (row - cy) / fy, 1.0}; }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("camera rig: focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw Error("camera rig: principal point must be finite");
    if (!is_finite(projector_offset)) throw Error("camera rig: projector offset must be finite");
    if (norm(projector_offset) == 0.0) throw Error("camera rig: projector offset must be nonzero");
  }
};

inline void to_json(nlohmann::json& j, const CameraRig& rig) {
  j = nlohmann::json{{"fx", rig.fx},
                     {"fy", rig.fy},
                     {"cx", rig.cx},
                     {"cy", rig.cy},
                     {"projector_offset", {rig.projector_offset.x, rig.projector_offset.y, rig.projector_offset.z}}};
}

inline void from_json(const nlohmann::json& j, CameraRig& rig) {
  rig.fx = j.at("fx").get<double>();
  rig.fy = j.at("fy").get<double>();
  rig.cx = j.at("cx").get<double>();
  rig.cy = j.at("cy").get<double>();
  const auto& p = j.at("projector_offset");
  if (!p.is_array() || p.size() != 3) throw Error("calibration: projector_offset must be a 3-element array");
  rig.projector_offset = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
}

inline CameraRig load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open calibration file: " + path.string());
  CameraRig rig;
  try {
    rig = nlohmann::json::parse(in).get<CameraRig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid calibration file " + path.string() + ": " + e.what());
  }
  rig.validate();
  return rig;
}

inline void save_calibration(const CameraRig& rig, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write calibration file: " + path.string());
  out << nlohmann::json(rig).dump(2) << "\n";
}

}  // namespace irsfs

#endif  // IRSFS_CAMERA_HPP
