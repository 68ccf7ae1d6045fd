#ifndef DYNMPI_PHANTOMS_HPP
#define DYNMPI_PHANTOMS_HPP

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "dynmpi/core.hpp"

namespace dynmpi {

/// Analytic dynamic phantoms. Rotation is about the z axis through `center`;
/// single-slice (nz = 1) grids ignore the axial rod extent.
struct PhantomSpec {
  enum class Kind { spiral_ball, rotating_rod, static_delta } kind = Kind::rotating_rod;
  double ball_radius = 2e-3;       // m
  double circle_diameter = 11.5e-3;  // m, path of the tracer center
  double z_pitch = 0.0;            // m per frame (spiral)
  double rod_length = 4e-3;        // m along the rotation axis
  double rod_width = 4e-3;         // m, capillary diameter
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // m
  double intensity = 1.0;
  double angular_speed = 0.0;      // radians per frame
  double phase0 = 0.0;
};

struct RenderedPhantom {
  ImageSequence images;
  FlowField truth_flow;  // voxels per frame step, zero off the dilated support
};

/// Rasterize the analytic shape at each frame pose with partial-volume
/// weights (2^3 subsample points per voxel) and produce the exact rigid-motion
/// displacement field as ground-truth flow.
RenderedPhantom render_phantom(const PhantomSpec& spec, const Grid3& grid, int n_frames);

/// Unit total mass concentrated in a single voxel (or a small cuboid).
std::vector<double> render_delta_sample(const Grid3& grid, const Eigen::Vector3d& position,
                                        std::array<int, 3> sample_voxels = {1, 1, 1});

}  // namespace dynmpi

#endif
