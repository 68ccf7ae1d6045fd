#ifndef DYNMPI_MOTION_HPP
#define DYNMPI_MOTION_HPP

#include <vector>

#include "dynmpi/core.hpp"
#include "dynmpi/optim.hpp"

namespace dynmpi {

struct MotionProblem {
  enum class Model { optical_flow, mass_conservation } model = Model::optical_flow;
  enum class FlowRegularizer { tv_l1, grad_l2, l2_tikhonov } flow_regularizer =
      FlowRegularizer::tv_l1;
  double beta = 0.1;
  double gamma = 100.0;
  int pyramid_levels = 0;     // 0 = floor(log2(min_dim/8)) + 1
  double scale_factor = 0.5;  // only 1/integer factors are supported
  int warp_increments = 2;    // optical flow increments per scale
  PdhgParams solver;
  int parallelism = 0;
};

/// Reverse warping out(x) = image(x + flow(x)) with clamped trilinear
/// sampling; flow is (3, nvox) in voxel units.
std::vector<double> warp_reverse(const std::vector<double>& image, const Grid3& grid,
                                 const double* flow3);

/// Exact transpose of the warp sampling matrix (weight scatter).
std::vector<double> warp_adjoint(const std::vector<double>& image, const Grid3& grid,
                                 const double* flow3);

/// Precomputed sampling pattern of warp_reverse for a fixed flow.
struct WarpStencil {
  std::size_t n = 0;
  std::vector<std::size_t> corner;  // 8 source indices per destination voxel
  std::vector<double> weight;

  static WarpStencil build(const Grid3& grid, const double* flow3);
  void apply(const double* image, double* out) const;
  void apply_adjoint(const double* y, double* out) const;
};

/// Image pyramid by mean-preserving down-averaging; level 0 is finest.
std::vector<ImageSequence> build_pyramid(const ImageSequence& c, int levels,
                                         double scale_factor);

/// Flow transfer between pyramid levels; vector magnitudes are rescaled to
/// the voxel units of the target level.
FlowField prolong_flow(const FlowField& coarse, const Grid3& fine_grid);
FlowField restrict_flow(const FlowField& fine, const Grid3& coarse_grid);

/// Coarse-to-fine TV-L1 (or grad-L2 / Tikhonov) optical flow with warped
/// increments per scale; one independent solve per frame pair.
FlowField estimate_motion_of(const ImageSequence& c, const MotionProblem& problem,
                             const FlowField* init = nullptr);

/// Mass-conservation motion estimation, coarse-to-fine without warping; each
/// level re-solves the full field starting from the prolongated coarser one.
FlowField estimate_motion_mc(const ImageSequence& c, const MotionProblem& problem,
                             const FlowField* init = nullptr);

FlowField estimate_motion(const ImageSequence& c, const MotionProblem& problem,
                          const FlowField* init = nullptr);

/// Stacked per-component spatial gradients of a flow field (the B blocks of
/// the motion subproblems), (3,n) -> (9,n).
LinOp make_flow_gradient_op(const Grid3& grid);

/// Mass-conservation transport acting on the flow: u -> sum_d D_d(c u_d)
/// with central differences, (3,n) -> (n).
LinOp make_mc_transport_op(const std::vector<double>& concentration, const Grid3& grid);

/// beta * S(v) for the configured flow regularizer (per-step sum).
double flow_regularizer_value(const FlowField& v, const MotionProblem& problem);

/// gamma-weighted L1 motion-model residual of the pair (c, v):
/// optical flow uses the warped nonlinear residual, mass conservation the
/// discrete continuity residual.
double motion_residual_value(const ImageSequence& c, const FlowField& v,
                             const MotionProblem& problem);

}  // namespace dynmpi

#endif
