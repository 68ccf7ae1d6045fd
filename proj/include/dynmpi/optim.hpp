#ifndef DYNMPI_OPTIM_HPP
#define DYNMPI_OPTIM_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dynmpi/core.hpp"

namespace dynmpi {

/// Linear operator with explicit adjoint. Composite constructors run a
/// randomized adjoint self-test and throw if <Bx,y> != <x,B*y> to 1e-8.
struct LinOp {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::function<void(const double*, double*)> apply;          // y = B x
  std::function<void(const double*, double*)> apply_adjoint;  // x = B^T y
  mutable double norm_estimate = -1.0;                        // cached by estimate_operator_norm
};

void adjoint_self_test(const LinOp& op, int probes = 2, std::uint64_t seed = 1234,
                       double tol = 1e-8);

LinOp make_identity_op(std::size_t n);
LinOp make_zero_op(std::size_t in_dim, std::size_t out_dim);
LinOp make_scaled_op(LinOp op, double scale);
LinOp make_dense_op(std::vector<double> row_major, std::size_t rows, std::size_t cols);
/// Stack operators sharing in_dim into one output vector (self-tested).
LinOp make_vstack_op(std::vector<LinOp> blocks);

/// Power iteration on B^T B; returns the raw estimate of ||B|| (callers of
/// the step rule inflate it by the 1.05 safety factor).
double estimate_operator_norm(const LinOp& op, int iters = 50, std::uint64_t seed = 99);

// ---- proximal operators -----------------------------------------------------

/// Componentwise soft threshold, prox of thresh * ||.||_1.
void prox_l1(double* x, std::size_t n, double thresh);

/// Clamp each entry to [-radius, radius].
void project_linf_ball_scalar(double* y, std::size_t n, double radius);

/// Rescale each voxel's n_comp-vector to Euclidean norm <= radius. Layout is
/// component-major: y[c * n_voxels + v].
void project_linf_ball_voxel_vectors(double* y, std::size_t n_voxels, int n_comp,
                                     double radius);

/// Prox of (1/(2 beta)) ||.||^2 with step sigma: y / (1 + sigma/beta).
void prox_l2_squared_dual(double* y, std::size_t n, double sigma, double beta);

/// Prox of iota{||.||_inf <= gamma} - <b, .> with step sigma:
/// clamp(y + sigma b, [-gamma, gamma]).
void prox_translated_linf_indicator(double* y, std::size_t n, double sigma, double gamma,
                                    const double* b);

/// Prox evaluated in place; `step` is tau for primal terms, sigma for duals.
struct ProxFn {
  std::string descriptor;
  std::function<void(std::vector<double>&, double)> evaluate;
};

ProxFn make_prox_identity();
ProxFn make_prox_l1(double weight);
ProxFn make_prox_zero_indicator();  // projection onto {0}

// ---- solvers ----------------------------------------------------------------

struct PdhgParams {
  double sigma = 0.0;  // 0 = choose 0.95/||B|| after norm estimation
  double tau = 0.0;
  double theta = 1.0;
  int max_iters = 100;
  std::uint64_t seed = 0;  // SPDHG block selection
  int batch_count = 1;     // M data sub-batches
  int trace_every = 10;
  int norm_iters = 60;
};

struct SolveDiagnostics {
  std::vector<int> trace_iterations;
  std::vector<double> objective_trace;
  double final_objective = 0.0;
  double step_sigma = 0.0;
  double step_tau = 0.0;
  double operator_norm = 0.0;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Chambolle-Pock primal-dual iteration:
///   ybar = y + sigma B xt; y = prox_{sigma g*}(ybar);
///   xbar = x - tau B^T y;  x = prox_{tau f}(xbar);
///   xt = x + theta (x - x_prev).
/// Aborts with the iteration index if an iterate goes non-finite.
std::vector<double> pdhg(const LinOp& B, const ProxFn& prox_f, const ProxFn& prox_gstar,
                         const PdhgParams& params, std::vector<double> x0,
                         std::vector<double> y0, const Objective& objective = {},
                         SolveDiagnostics* diag = nullptr);

/// Dual blocks for the stochastic variant: ops[0..data_batch_count-1] form
/// the data group (one of them is drawn uniformly when the data group is
/// selected); every further op is its own group.
struct SpdhgBlocks {
  std::vector<LinOp> ops;
  std::vector<ProxFn> prox_gstar;
  int data_batch_count = 1;
};

std::vector<double> spdhg(const SpdhgBlocks& blocks, const ProxFn& prox_f,
                          const PdhgParams& params, std::vector<double> x0,
                          std::vector<std::vector<double>> y0,
                          const Objective& objective = {}, SolveDiagnostics* diag = nullptr);

// ---- difference operators ---------------------------------------------------
// Spatial regularizers use forward differences with Neumann boundary and the
// exact negative-transpose divergence; motion constraints use zero-padded
// central differences (exactly skew-adjoint) and forward time differences.

void grad_forward(const double* u, const Grid3& grid, double* out3);
void div_backward(const double* p3, const Grid3& grid, double* out);  // -grad_forward^T
void grad_central(const double* u, const Grid3& grid, double* out3);
void grad_central_adjoint(const double* p3, const Grid3& grid, double* out);
void central_diff_axis(const double* u, const Grid3& grid, int axis, double* out);
void central_diff_axis_adjoint(const double* r, const Grid3& grid, int axis, double* out);

/// Temporal forward difference: frame k of the result is c_{k+1} - c_k.
std::vector<double> dt_forward(const ImageSequence& c);

LinOp make_grad_forward_op(const Grid3& grid);

}  // namespace dynmpi

#endif
