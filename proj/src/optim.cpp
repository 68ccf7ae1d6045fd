#include "dynmpi/optim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "dynmpi/rng.hpp"

namespace dynmpi {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double nrm2(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void adjoint_self_test(const LinOp& op, int probes, std::uint64_t seed, double tol) {
  rng::Stream rs(seed);
  std::vector<double> x(op.in_dim), y(op.out_dim), bx(op.out_dim), bty(op.in_dim);
  for (int p = 0; p < probes; ++p) {
    for (auto& v : x) v = rs.next_gaussian();
    for (auto& v : y) v = rs.next_gaussian();
    op.apply(x.data(), bx.data());
    op.apply_adjoint(y.data(), bty.data());
    const double lhs = dot(bx.data(), y.data(), op.out_dim);
    const double rhs = dot(x.data(), bty.data(), op.in_dim);
    const double scale =
        std::max({1e-300, nrm2(bx.data(), op.out_dim) * nrm2(y.data(), op.out_dim),
                  nrm2(x.data(), op.in_dim) * nrm2(bty.data(), op.in_dim)});
    if (std::abs(lhs - rhs) > tol * scale)
      throw std::runtime_error("LinOp adjoint self-test failed: |<Bx,y> - <x,B*y>| = " +
                               std::to_string(std::abs(lhs - rhs) / scale) + " relative");
  }
}

LinOp make_identity_op(std::size_t n) {
  LinOp op;
  op.in_dim = op.out_dim = n;
  op.apply = [n](const double* x, double* y) { std::copy(x, x + n, y); };
  op.apply_adjoint = op.apply;
  return op;
}

LinOp make_zero_op(std::size_t in_dim, std::size_t out_dim) {
  LinOp op;
  op.in_dim = in_dim;
  op.out_dim = out_dim;
  op.apply = [out_dim](const double*, double* y) { std::fill(y, y + out_dim, 0.0); };
  op.apply_adjoint = [in_dim](const double*, double* x) { std::fill(x, x + in_dim, 0.0); };
  return op;
}

LinOp make_scaled_op(LinOp inner, double scale) {
  LinOp op;
  op.in_dim = inner.in_dim;
  op.out_dim = inner.out_dim;
  auto shared = std::make_shared<LinOp>(std::move(inner));
  op.apply = [shared, scale](const double* x, double* y) {
    shared->apply(x, y);
    for (std::size_t i = 0; i < shared->out_dim; ++i) y[i] *= scale;
  };
  op.apply_adjoint = [shared, scale](const double* y, double* x) {
    shared->apply_adjoint(y, x);
    for (std::size_t i = 0; i < shared->in_dim; ++i) x[i] *= scale;
  };
  return op;
}

LinOp make_dense_op(std::vector<double> row_major, std::size_t rows, std::size_t cols) {
  if (row_major.size() != rows * cols)
    throw std::invalid_argument("make_dense_op: data size mismatch");
  auto data = std::make_shared<std::vector<double>>(std::move(row_major));
  LinOp op;
  op.in_dim = cols;
  op.out_dim = rows;
  op.apply = [data, rows, cols](const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = data->data() + r * cols;
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += row[j] * x[j];
      y[r] = s;
    }
  };
  op.apply_adjoint = [data, rows, cols](const double* y, double* x) {
    std::fill(x, x + cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double yr = y[r];
      if (yr == 0.0) continue;
      const double* row = data->data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) x[j] += yr * row[j];
    }
  };
  return op;
}

LinOp make_vstack_op(std::vector<LinOp> blocks) {
  if (blocks.empty()) throw std::invalid_argument("make_vstack_op: no blocks");
  const std::size_t in_dim = blocks.front().in_dim;
  std::size_t out_dim = 0;
  for (const auto& b : blocks) {
    if (b.in_dim != in_dim)
      throw std::invalid_argument("make_vstack_op: blocks disagree on in_dim");
    out_dim += b.out_dim;
  }
  auto shared = std::make_shared<std::vector<LinOp>>(std::move(blocks));
  LinOp op;
  op.in_dim = in_dim;
  op.out_dim = out_dim;
  op.apply = [shared](const double* x, double* y) {
    std::size_t off = 0;
    for (const auto& b : *shared) {
      b.apply(x, y + off);
      off += b.out_dim;
    }
  };
  op.apply_adjoint = [shared, in_dim](const double* y, double* x) {
    std::fill(x, x + in_dim, 0.0);
    std::vector<double> tmp(in_dim);
    std::size_t off = 0;
    for (const auto& b : *shared) {
      b.apply_adjoint(y + off, tmp.data());
      for (std::size_t i = 0; i < in_dim; ++i) x[i] += tmp[i];
      off += b.out_dim;
    }
  };
  adjoint_self_test(op);
  return op;
}

double estimate_operator_norm(const LinOp& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("estimate_operator_norm: iters must be >= 1");
  if (op.in_dim == 0 || op.out_dim == 0) return 0.0;
  rng::Stream rs(seed);
  std::vector<double> x(op.in_dim), y(op.out_dim), z(op.in_dim);
  for (auto& v : x) v = rs.next_gaussian();
  double xn = nrm2(x.data(), x.size());
  if (xn == 0.0) return 0.0;
  for (auto& v : x) v /= xn;
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    op.apply(x.data(), y.data());
    op.apply_adjoint(y.data(), z.data());
    lambda = nrm2(z.data(), z.size());  // ||B^T B x|| with unit x
    if (lambda == 0.0) return 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = z[i] / lambda;
  }
  op.norm_estimate = std::sqrt(lambda);
  return op.norm_estimate;
}

// ---- prox catalog -----------------------------------------------------------

void prox_l1(double* x, std::size_t n, double thresh) {
  if (thresh < 0.0) throw std::invalid_argument("prox_l1: threshold must be >= 0");
  if (thresh == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::abs(x[i]) - thresh;
    x[i] = a > 0.0 ? (x[i] > 0.0 ? a : -a) : 0.0;
  }
}

void project_linf_ball_scalar(double* y, std::size_t n, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_linf_ball: radius must be > 0");
  for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(y[i], -radius, radius);
}

void project_linf_ball_voxel_vectors(double* y, std::size_t n_voxels, int n_comp,
                                     double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_linf_ball: radius must be > 0");
  for (std::size_t v = 0; v < n_voxels; ++v) {
    double s = 0.0;
    for (int c = 0; c < n_comp; ++c) {
      const double x = y[c * n_voxels + v];
      s += x * x;
    }
    if (s > radius * radius) {
      const double scale = radius / std::sqrt(s);
      for (int c = 0; c < n_comp; ++c) y[c * n_voxels + v] *= scale;
    }
  }
}

void prox_l2_squared_dual(double* y, std::size_t n, double sigma, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("prox_l2_squared_dual: beta must be > 0");
  const double scale = 1.0 / (1.0 + sigma / beta);
  for (std::size_t i = 0; i < n; ++i) y[i] *= scale;
}

void prox_translated_linf_indicator(double* y, std::size_t n, double sigma, double gamma,
                                    const double* b) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("prox_translated_linf_indicator: gamma must be > 0");
  for (std::size_t i = 0; i < n; ++i)
    y[i] = std::clamp(y[i] + sigma * b[i], -gamma, gamma);
}

ProxFn make_prox_identity() {
  return {"identity", [](std::vector<double>&, double) {}};
}

ProxFn make_prox_l1(double weight) {
  return {"l1", [weight](std::vector<double>& x, double step) {
            prox_l1(x.data(), x.size(), weight * step);
          }};
}

ProxFn make_prox_zero_indicator() {
  return {"zero", [](std::vector<double>& x, double) { std::fill(x.begin(), x.end(), 0.0); }};
}

// ---- PDHG -------------------------------------------------------------------

namespace {

void resolve_steps(const LinOp& B, PdhgParams& params, SolveDiagnostics* diag) {
  double norm = B.norm_estimate;
  if (norm < 0.0) norm = estimate_operator_norm(B, params.norm_iters, params.seed + 17);
  const double safe_norm = 1.05 * norm;  // overestimation-safe before the step rule
  if (params.sigma <= 0.0 || params.tau <= 0.0) {
    const double s = safe_norm > 0.0 ? 0.95 / safe_norm : 1.0;
    params.sigma = s;
    params.tau = s;
  }
  if (params.sigma * params.tau * safe_norm * safe_norm > 1.0 + 1e-9)
    throw std::invalid_argument("pdhg: step sizes violate sigma*tau*||B||^2 <= 1");
  if (diag) {
    diag->step_sigma = params.sigma;
    diag->step_tau = params.tau;
    diag->operator_norm = norm;
  }
}

void record_trace(const Objective& objective, const std::vector<double>& x, int iter,
                  const PdhgParams& params, SolveDiagnostics* diag) {
  if (!diag || !objective) return;
  if (iter % std::max(1, params.trace_every) != 0 && iter != params.max_iters) return;
  diag->trace_iterations.push_back(iter);
  diag->objective_trace.push_back(objective(x));
}

}  // namespace

std::vector<double> pdhg(const LinOp& B, const ProxFn& prox_f, const ProxFn& prox_gstar,
                         const PdhgParams& params_in, std::vector<double> x0,
                         std::vector<double> y0, const Objective& objective,
                         SolveDiagnostics* diag) {
  if (x0.size() != B.in_dim || y0.size() != B.out_dim)
    throw std::invalid_argument("pdhg: initial values do not match operator dims");
  PdhgParams params = params_in;
  resolve_steps(B, params, diag);

  std::vector<double> x = std::move(x0);
  std::vector<double> y = std::move(y0);
  std::vector<double> xt = x;
  std::vector<double> bx(B.out_dim), bty(B.in_dim), xprev(B.in_dim);

  record_trace(objective, x, 0, params, diag);
  for (int k = 0; k < params.max_iters; ++k) {
    B.apply(xt.data(), bx.data());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += params.sigma * bx[i];
    prox_gstar.evaluate(y, params.sigma);

    xprev = x;
    B.apply_adjoint(y.data(), bty.data());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= params.tau * bty[i];
    prox_f.evaluate(x, params.tau);

    for (std::size_t i = 0; i < x.size(); ++i)
      xt[i] = x[i] + params.theta * (x[i] - xprev[i]);

    if (!all_finite(x) || !all_finite(y))
      throw std::runtime_error("pdhg: non-finite iterate at iteration " + std::to_string(k + 1));
    record_trace(objective, x, k + 1, params, diag);
  }
  if (diag && objective) diag->final_objective = objective(x);
  return x;
}

std::vector<double> spdhg(const SpdhgBlocks& blocks, const ProxFn& prox_f,
                          const PdhgParams& params_in, std::vector<double> x0,
                          std::vector<std::vector<double>> y0, const Objective& objective,
                          SolveDiagnostics* diag) {
  const std::size_t n_blocks = blocks.ops.size();
  if (n_blocks == 0) throw std::invalid_argument("spdhg: no dual blocks");
  if (blocks.prox_gstar.size() != n_blocks)
    throw std::invalid_argument("spdhg: prox count does not match block count");
  const int M = blocks.data_batch_count;
  if (M < 0 || static_cast<std::size_t>(M) > n_blocks)
    throw std::invalid_argument("spdhg: invalid data batch count");
  const std::size_t in_dim = blocks.ops.front().in_dim;
  for (const auto& op : blocks.ops)
    if (op.in_dim != in_dim) throw std::invalid_argument("spdhg: blocks disagree on in_dim");
  if (x0.size() != in_dim) throw std::invalid_argument("spdhg: x0 has wrong dimension");
  if (y0.size() != n_blocks) throw std::invalid_argument("spdhg: y0 block count mismatch");
  for (std::size_t b = 0; b < n_blocks; ++b)
    if (y0[b].size() != blocks.ops[b].out_dim)
      throw std::invalid_argument("spdhg: y0 block dimension mismatch");

  const int n_groups = (M > 0 ? 1 : 0) + static_cast<int>(n_blocks) - M;

  // Balanced steps satisfying the stochastic condition sigma tau ||B_j||^2
  // <= p_j for every block; with a single block this is the PDHG rule.
  PdhgParams params = params_in;
  {
    double worst = 0.0;  // max_j ||B_j||^2 / p_j with safety inflation
    double full_sq = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const double pj = static_cast<int>(b) < M ? 1.0 / (n_groups * M) : 1.0 / n_groups;
      double norm = blocks.ops[b].norm_estimate;
      if (norm < 0.0)
        norm = estimate_operator_norm(blocks.ops[b], params.norm_iters,
                                      params.seed + 17 + b);
      const double safe = 1.05 * norm;
      worst = std::max(worst, safe * safe / pj);
      full_sq += safe * safe;
    }
    if (params.sigma <= 0.0 || params.tau <= 0.0) {
      const double s = worst > 0.0 ? 0.95 / std::sqrt(worst) : 1.0;
      params.sigma = s;
      params.tau = s;
    }
    if (params.sigma * params.tau * full_sq > 1.0 + 1e-9)
      throw std::invalid_argument("spdhg: step sizes violate sigma*tau*||B||^2 <= 1");
    if (diag) {
      diag->step_sigma = params.sigma;
      diag->step_tau = params.tau;
      diag->operator_norm = std::sqrt(full_sq);
    }
  }

  std::vector<double> x = std::move(x0);
  std::vector<std::vector<double>> y = std::move(y0);
  std::vector<double> xt = x, xprev(in_dim);

  // Per-block adjoint contributions B_j^T y_j; only the updated block's
  // contribution is recomputed each iteration.
  std::vector<std::vector<double>> at(n_blocks, std::vector<double>(in_dim, 0.0));
  for (std::size_t b = 0; b < n_blocks; ++b) {
    bool zero = true;
    for (double v : y[b])
      if (v != 0.0) zero = false;
    if (!zero) blocks.ops[b].apply_adjoint(y[b].data(), at[b].data());
  }

  rng::Stream pick(params.seed);
  std::vector<double> bx, sum(in_dim);

  record_trace(objective, x, 0, params, diag);
  for (int k = 0; k < params.max_iters; ++k) {
    int block;
    const int group = static_cast<int>(pick.next_below(n_groups));
    if (M > 0 && group == 0) {
      block = static_cast<int>(pick.next_below(M));
    } else {
      block = M + group - (M > 0 ? 1 : 0);
    }

    const LinOp& op = blocks.ops[block];
    bx.resize(op.out_dim);
    op.apply(xt.data(), bx.data());
    auto& yb = y[block];
    for (std::size_t i = 0; i < yb.size(); ++i) yb[i] += params.sigma * bx[i];
    blocks.prox_gstar[block].evaluate(yb, params.sigma);
    op.apply_adjoint(yb.data(), at[block].data());

    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b)
      for (std::size_t i = 0; i < in_dim; ++i) sum[i] += at[b][i];

    xprev = x;
    for (std::size_t i = 0; i < in_dim; ++i) x[i] -= params.tau * sum[i];
    prox_f.evaluate(x, params.tau);
    for (std::size_t i = 0; i < in_dim; ++i)
      xt[i] = x[i] + params.theta * (x[i] - xprev[i]);

    if (!all_finite(x))
      throw std::runtime_error("spdhg: non-finite iterate at iteration " + std::to_string(k + 1));
    record_trace(objective, x, k + 1, params, diag);
  }
  if (diag && objective) diag->final_objective = objective(x);
  return x;
}

// ---- difference operators -----------------------------------------------------

void grad_forward(const double* u, const Grid3& grid, double* out3) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t n = grid.n_voxels();
  double* gx = out3;
  double* gy = out3 + n;
  double* gz = out3 + 2 * n;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) {
        const std::size_t j = grid.index(x, y, z);
        gx[j] = x + 1 < nx ? u[grid.index(x + 1, y, z)] - u[j] : 0.0;
        gy[j] = y + 1 < ny ? u[grid.index(x, y + 1, z)] - u[j] : 0.0;
        gz[j] = z + 1 < nz ? u[grid.index(x, y, z + 1)] - u[j] : 0.0;
      }
}

void div_backward(const double* p3, const Grid3& grid, double* out) {
  // exact negative transpose of grad_forward
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t n = grid.n_voxels();
  const double* px = p3;
  const double* py = p3 + n;
  const double* pz = p3 + 2 * n;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) {
        const std::size_t j = grid.index(x, y, z);
        double s = 0.0;
        if (nx > 1) {
          if (x == 0)
            s += px[j];
          else if (x == nx - 1)
            s += -px[grid.index(x - 1, y, z)];
          else
            s += px[j] - px[grid.index(x - 1, y, z)];
        }
        if (ny > 1) {
          if (y == 0)
            s += py[j];
          else if (y == ny - 1)
            s += -py[grid.index(x, y - 1, z)];
          else
            s += py[j] - py[grid.index(x, y - 1, z)];
        }
        if (nz > 1) {
          if (z == 0)
            s += pz[j];
          else if (z == nz - 1)
            s += -pz[grid.index(x, y, z - 1)];
          else
            s += pz[j] - pz[grid.index(x, y, z - 1)];
        }
        out[j] = s;
      }
}

void central_diff_axis(const double* u, const Grid3& grid, int axis, double* out) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  auto val = [&](int x, int y, int z) -> double {
    if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return 0.0;  // zero padding
    return u[grid.index(x, y, z)];
  };
  const int dx = axis == 0, dy = axis == 1, dz = axis == 2;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z)
        out[grid.index(x, y, z)] =
            0.5 * (val(x + dx, y + dy, z + dz) - val(x - dx, y - dy, z - dz));
}

void central_diff_axis_adjoint(const double* r, const Grid3& grid, int axis, double* out) {
  // zero-padded central differences are exactly skew-adjoint
  central_diff_axis(r, grid, axis, out);
  const std::size_t n = grid.n_voxels();
  for (std::size_t j = 0; j < n; ++j) out[j] = -out[j];
}

void grad_central(const double* u, const Grid3& grid, double* out3) {
  const std::size_t n = grid.n_voxels();
  for (int a = 0; a < 3; ++a) central_diff_axis(u, grid, a, out3 + a * n);
}

void grad_central_adjoint(const double* p3, const Grid3& grid, double* out) {
  const std::size_t n = grid.n_voxels();
  std::vector<double> tmp(n);
  std::fill(out, out + n, 0.0);
  for (int a = 0; a < 3; ++a) {
    central_diff_axis_adjoint(p3 + a * n, grid, a, tmp.data());
    for (std::size_t j = 0; j < n; ++j) out[j] += tmp[j];
  }
}

std::vector<double> dt_forward(const ImageSequence& c) {
  if (c.n_frames < 2) throw std::invalid_argument("dt_forward: needs at least 2 frames");
  const std::size_t n = c.grid.n_voxels();
  std::vector<double> out(static_cast<std::size_t>(c.n_frames - 1) * n);
  for (int k = 0; k + 1 < c.n_frames; ++k) {
    const double* a = c.frame(k);
    const double* b = c.frame(k + 1);
    for (std::size_t j = 0; j < n; ++j) out[static_cast<std::size_t>(k) * n + j] = b[j] - a[j];
  }
  return out;
}

LinOp make_grad_forward_op(const Grid3& grid) {
  const std::size_t n = grid.n_voxels();
  LinOp op;
  op.in_dim = n;
  op.out_dim = 3 * n;
  op.apply = [grid](const double* x, double* y) { grad_forward(x, grid, y); };
  op.apply_adjoint = [grid, n](const double* y, double* x) {
    div_backward(y, grid, x);
    for (std::size_t j = 0; j < n; ++j) x[j] = -x[j];
  };
  return op;
}

}  // namespace dynmpi
