#ifndef IRSFS_PRESMOOTH_HPP
#define IRSFS_PRESMOOTH_HPP

#include <cmath>
#include <vector>

#include "irsfs/config.hpp"
#include "irsfs/grid.hpp"

namespace irsfs {

/// Edge-preserving bilateral filter over masked-in depth pixels.
///
/// Kernel radius is ceil(3 * sigma_spatial). The output is written as the
/// centre value plus a weighted mean of neighbour offsets, so a constant
/// neighbourhood reproduces its input bit for bit. The mask is never touched.
inline Grid2D bilateral_filter(const Grid2D& z, double sigma_spatial, double sigma_range) {
  if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0)) throw Error("bilateral_filter: sigmas must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_spatial));
  const int side = 2 * radius + 1;
  std::vector<double> spatial(static_cast<std::size_t>(side) * side);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      spatial[(dy + radius) * side + (dx + radius)] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_spatial * sigma_spatial));
  const double inv_two_range2 = 1.0 / (2.0 * sigma_range * sigma_range);

  Grid2D out = z;
  for (int r = 0; r < z.height(); ++r) {
    for (int c = 0; c < z.width(); ++c) {
      if (!z.valid(r, c)) continue;
      const double centre = z(r, c);
      double wsum = 0.0;
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int rr = r + dy;
        if (rr < 0 || rr >= z.height()) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int cc = c + dx;
          if (cc < 0 || cc >= z.width() || !z.valid(rr, cc)) continue;
          const double diff = z(rr, cc) - centre;
          const double w = spatial[(dy + radius) * side + (dx + radius)] * std::exp(-diff * diff * inv_two_range2);
          wsum += w;
          acc += w * diff;
        }
      }
      out(r, c) = centre + acc / wsum;
    }
  }
  return out;
}

/// Smooths the raw sensor depth before normals are estimated.
inline Grid2D presmooth_depth(const Grid2D& z_raw, const SolverConfig& cfg) {
  if (!cfg.presmooth) return z_raw;
  return bilateral_filter(z_raw, cfg.presmooth_sigma_spatial, cfg.presmooth_sigma_range);
}

}  // namespace irsfs

#endif  // IRSFS_PRESMOOTH_HPP
