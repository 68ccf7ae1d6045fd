#ifndef DYNMPI_RECON_HPP
#define DYNMPI_RECON_HPP

#include <cstdint>
#include <vector>

#include "dynmpi/core.hpp"
#include "dynmpi/motion.hpp"
#include "dynmpi/optim.hpp"
#include "dynmpi/scanner.hpp"

namespace dynmpi {

struct ReconProblem {
  enum class DataTerm { l1, l2 } data_term = DataTerm::l1;
  double alpha1 = 0.6;   // L1 weight on the concentration
  double alpha2 = 0.1;   // TV weight on the concentration
  double gamma = 100.0;  // motion-model coupling weight
  MotionProblem::Model motion_model = MotionProblem::Model::optical_flow;
  int batches = 3;       // M data sub-batches for SPDHG
  int stage_iters = 200; // SPDHG iterations per reconstruction stage
  int alternations = 3;
  std::uint64_t seed = 0;
  int trace_every = 10;
  bool positivity = true;  // adds the c >= 0 indicator to the primal term
};

/// Tikhonov-regularized Kaczmarz row action with optional positivity
/// projection after each sweep, natural row order.
std::vector<double> kaczmarz_reconstruct(const SystemMatrix& S, const double* u_frame,
                                         double lambda, int sweeps, bool positivity);

ImageSequence kaczmarz_series(const SystemMatrix& S, const MeasurementSeries& u, double lambda,
                              int sweeps, bool positivity, int parallelism = 0);

/// Average groups of `n_avg` consecutive frames (tail frames beyond the last
/// full group are dropped). The matching Tikhonov weight is
/// lambda_single / sqrt(n_avg).
MeasurementSeries average_frames(const MeasurementSeries& u, int n_avg);

/// Frame-by-frame fused-lasso reconstruction via SPDHG (no coupling).
ImageSequence reconstruct_framewise_spdhg(const SystemMatrix& S, const MeasurementSeries& u,
                                          const ReconProblem& problem,
                                          SolveDiagnostics* diag = nullptr);

/// Whole-sequence reconstruction with the motion coupling block for fixed
/// flow v, solved by SPDHG with dual blocks {data batches, gradient, motion}.
ImageSequence reconstruct_joint(const SystemMatrix& S, const MeasurementSeries& u,
                                const FlowField& v, const ReconProblem& problem,
                                const ImageSequence* init = nullptr,
                                SolveDiagnostics* diag = nullptr);

/// The motion coupling applied to a sequence (image-subproblem form):
/// optical flow maps frame t to -c_t + warp(c_{t+1}, v_t); mass conservation
/// to dc/dt + v . grad c + (div v) c. Exposed for operator-level tests.
LinOp make_coupling_op(const Grid3& grid, int n_frames, const FlowField& v,
                       MotionProblem::Model model);

/// Canonical unconstrained joint objective:
/// sum_t D(A c_t, u_t) + alpha1 ||c||_1 + alpha2 TV(c) + beta S(v) + gamma T(c,v)
/// with T evaluated through the image-subproblem coupling operator.
double joint_objective(const SystemMatrix& S, const MeasurementSeries& u,
                       const ImageSequence& c, const FlowField& v, const ReconProblem& problem,
                       const MotionProblem& motion_problem);

enum class JointInit { zeros, framewise_warmstart };

struct JointResult {
  ImageSequence images;
  FlowField flow;
  std::vector<double> objective_per_alternation;
  int rejected_image_stages = 0;
  int rejected_motion_stages = 0;
};

/// Alternating minimization: reconstruct the sequence for the current flow,
/// re-estimate motion from the new sequence, repeat. Stage outputs are only
/// accepted when they do not increase the joint objective, so the recorded
/// trace is non-increasing.
JointResult alternate_joint(const SystemMatrix& S, const MeasurementSeries& u,
                            const ReconProblem& problem, const MotionProblem& motion_problem,
                            JointInit init = JointInit::zeros);

}  // namespace dynmpi

#endif
