#ifndef IRSFS_IRSFS_HPP
#define IRSFS_IRSFS_HPP

#include "irsfs/albedo_diffuse.hpp"
#include "irsfs/albedo_specular.hpp"
#include "irsfs/camera.hpp"
#include "irsfs/config.hpp"
#include "irsfs/depth_refine.hpp"
#include "irsfs/geometry.hpp"
#include "irsfs/grid.hpp"
#include "irsfs/io.hpp"
#include "irsfs/lighting.hpp"
#include "irsfs/pipeline.hpp"
#include "irsfs/presmooth.hpp"
#include "irsfs/solvers.hpp"
#include "irsfs/synth.hpp"

#endif  // IRSFS_IRSFS_HPP
