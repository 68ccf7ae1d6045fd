#include "dynmpi/recon.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "dynmpi/parallel.hpp"

namespace dynmpi {

std::vector<double> kaczmarz_reconstruct(const SystemMatrix& S, const double* u_frame,
                                         double lambda, int sweeps, bool positivity) {
  if (!(lambda > 0.0)) throw std::invalid_argument("kaczmarz: lambda must be > 0");
  if (sweeps < 1) throw std::invalid_argument("kaczmarz: sweeps must be >= 1");

  const int n = S.n_cols;
  std::vector<double> row_sq(S.n_rows);
  for (int r = 0; r < S.n_rows; ++r) {
    const double* row = S.row(r);
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * row[j];
    if (s == 0.0)
      throw std::runtime_error("kaczmarz: zero-norm row " + std::to_string(r) +
                               " (drop it in preprocessing)");
    row_sq[r] = s;
  }

  const double sqrt_lambda = std::sqrt(lambda);
  std::vector<double> c(n, 0.0), z(S.n_rows, 0.0);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int r = 0; r < S.n_rows; ++r) {
      const double* row = S.row(r);
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += row[j] * c[j];
      const double h = (u_frame[r] - dot - sqrt_lambda * z[r]) / (row_sq[r] + lambda);
      for (int j = 0; j < n; ++j) c[j] += h * row[j];
      z[r] += h * sqrt_lambda;
    }
    if (positivity)
      for (double& v : c) v = std::max(v, 0.0);
  }
  return c;
}

ImageSequence kaczmarz_series(const SystemMatrix& S, const MeasurementSeries& u, double lambda,
                              int sweeps, bool positivity, int parallelism) {
  if (u.n_rows != S.n_rows)
    throw std::invalid_argument("kaczmarz_series: matrix/data row mismatch");
  ImageSequence out(S.grid, u.n_frames);
  parallel_for(
      u.n_frames,
      [&](std::size_t f) {
        auto c = kaczmarz_reconstruct(S, u.frame(static_cast<int>(f)), lambda, sweeps,
                                      positivity);
        std::copy(c.begin(), c.end(), out.frame(static_cast<int>(f)));
      },
      parallelism);
  return out;
}

MeasurementSeries average_frames(const MeasurementSeries& u, int n_avg) {
  if (n_avg < 1) throw std::invalid_argument("average_frames: group size must be >= 1");
  const int groups = u.n_frames / n_avg;
  if (groups < 1) throw std::invalid_argument("average_frames: not enough frames");
  MeasurementSeries out(groups, u.n_rows, u.domain_tag);
  for (int g = 0; g < groups; ++g) {
    double* dst = out.frame(g);
    for (int k = 0; k < n_avg; ++k) {
      const double* src = u.frame(g * n_avg + k);
      for (int r = 0; r < u.n_rows; ++r) dst[r] += src[r];
    }
    for (int r = 0; r < u.n_rows; ++r) dst[r] /= n_avg;
  }
  return out;
}

namespace {

// Forward matrix batch applied frame-by-frame over the stacked sequence.
LinOp make_framewise_batch_op(const SystemMatrix& S, int n_frames, int row_begin,
                              int row_end) {
  const std::size_t n = S.grid.n_voxels();
  const int rows = row_end - row_begin;
  LinOp op;
  op.in_dim = static_cast<std::size_t>(n_frames) * n;
  op.out_dim = static_cast<std::size_t>(n_frames) * rows;
  op.apply = [&S, n_frames, row_begin, rows, n](const double* x, double* y) {
    for (int t = 0; t < n_frames; ++t) {
      const double* c = x + static_cast<std::size_t>(t) * n;
      double* out = y + static_cast<std::size_t>(t) * rows;
      for (int r = 0; r < rows; ++r) {
        const double* row = S.row(row_begin + r);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j] * c[j];
        out[r] = s;
      }
    }
  };
  op.apply_adjoint = [&S, n_frames, row_begin, rows, n](const double* y, double* x) {
    std::fill(x, x + static_cast<std::size_t>(n_frames) * n, 0.0);
    for (int t = 0; t < n_frames; ++t) {
      const double* in = y + static_cast<std::size_t>(t) * rows;
      double* c = x + static_cast<std::size_t>(t) * n;
      for (int r = 0; r < rows; ++r) {
        const double yr = in[r];
        if (yr == 0.0) continue;
        const double* row = S.row(row_begin + r);
        for (std::size_t j = 0; j < n; ++j) c[j] += yr * row[j];
      }
    }
  };
  return op;
}

// Spatial gradient per frame over the stacked sequence.
LinOp make_framewise_grad_op(const Grid3& grid, int n_frames) {
  const std::size_t n = grid.n_voxels();
  LinOp op;
  op.in_dim = static_cast<std::size_t>(n_frames) * n;
  op.out_dim = static_cast<std::size_t>(n_frames) * 3 * n;
  op.apply = [grid, n_frames, n](const double* x, double* y) {
    for (int t = 0; t < n_frames; ++t)
      grad_forward(x + static_cast<std::size_t>(t) * n, grid,
                   y + static_cast<std::size_t>(t) * 3 * n);
  };
  op.apply_adjoint = [grid, n_frames, n](const double* y, double* x) {
    std::vector<double> tmp(n);
    for (int t = 0; t < n_frames; ++t) {
      div_backward(y + static_cast<std::size_t>(t) * 3 * n, grid, tmp.data());
      double* c = x + static_cast<std::size_t>(t) * n;
      for (std::size_t j = 0; j < n; ++j) c[j] = -tmp[j];
    }
  };
  return op;
}

struct CouplingData {
  Grid3 grid;
  int n_frames = 0;
  MotionProblem::Model model = MotionProblem::Model::optical_flow;
  std::vector<WarpStencil> stencils;            // OF: one per step
  std::vector<std::vector<double>> v_steps;     // MC: (3,n) per step
  std::vector<std::vector<double>> div_v;       // MC: central divergence per step
};

std::shared_ptr<CouplingData> build_coupling_data(const Grid3& grid, int n_frames,
                                                  const FlowField& v,
                                                  MotionProblem::Model model) {
  if (v.n_steps != n_frames - 1)
    throw std::invalid_argument("coupling: flow must have n_frames - 1 steps");
  if (!(v.grid == grid)) throw std::invalid_argument("coupling: flow grid mismatch");
  auto data = std::make_shared<CouplingData>();
  data->grid = grid;
  data->n_frames = n_frames;
  data->model = model;
  const std::size_t n = grid.n_voxels();
  if (model == MotionProblem::Model::optical_flow) {
    data->stencils.reserve(v.n_steps);
    for (int k = 0; k < v.n_steps; ++k)
      data->stencils.push_back(WarpStencil::build(grid, v.step(k)));
  } else {
    std::vector<double> d(n);
    for (int k = 0; k < v.n_steps; ++k) {
      data->v_steps.emplace_back(v.step(k), v.step(k) + 3 * n);
      std::vector<double> div(n, 0.0);
      for (int axis = 0; axis < 3; ++axis) {
        central_diff_axis(v.step_component(k, axis), grid, axis, d.data());
        for (std::size_t j = 0; j < n; ++j) div[j] += d[j];
      }
      data->div_v.push_back(std::move(div));
    }
  }
  return data;
}

}  // namespace

LinOp make_coupling_op(const Grid3& grid, int n_frames, const FlowField& v,
                       MotionProblem::Model model) {
  auto data = build_coupling_data(grid, n_frames, v, model);
  const std::size_t n = grid.n_voxels();
  const int steps = n_frames - 1;
  LinOp op;
  op.in_dim = static_cast<std::size_t>(n_frames) * n;
  op.out_dim = static_cast<std::size_t>(steps) * n;

  if (model == MotionProblem::Model::optical_flow) {
    op.apply = [data, n, steps](const double* x, double* y) {
      for (int t = 0; t < steps; ++t) {
        double* out = y + static_cast<std::size_t>(t) * n;
        data->stencils[t].apply(x + static_cast<std::size_t>(t + 1) * n, out);
        const double* ct = x + static_cast<std::size_t>(t) * n;
        for (std::size_t j = 0; j < n; ++j) out[j] -= ct[j];
      }
    };
    op.apply_adjoint = [data, n, steps](const double* y, double* x) {
      const std::size_t total = static_cast<std::size_t>(steps + 1) * n;
      std::fill(x, x + total, 0.0);
      std::vector<double> tmp(n);
      for (int t = 0; t < steps; ++t) {
        const double* yt = y + static_cast<std::size_t>(t) * n;
        double* xt = x + static_cast<std::size_t>(t) * n;
        for (std::size_t j = 0; j < n; ++j) xt[j] -= yt[j];
        data->stencils[t].apply_adjoint(yt, tmp.data());
        double* xt1 = x + static_cast<std::size_t>(t + 1) * n;
        for (std::size_t j = 0; j < n; ++j) xt1[j] += tmp[j];
      }
    };
  } else {
    const Grid3 g = grid;
    op.apply = [data, g, n, steps](const double* x, double* y) {
      std::vector<double> d(n);
      for (int t = 0; t < steps; ++t) {
        const double* ct = x + static_cast<std::size_t>(t) * n;
        const double* ct1 = x + static_cast<std::size_t>(t + 1) * n;
        double* out = y + static_cast<std::size_t>(t) * n;
        const auto& vt = data->v_steps[t];
        const auto& divv = data->div_v[t];
        for (std::size_t j = 0; j < n; ++j) out[j] = ct1[j] - ct[j] + divv[j] * ct[j];
        for (int axis = 0; axis < 3; ++axis) {
          central_diff_axis(ct, g, axis, d.data());
          const double* va = vt.data() + axis * n;
          for (std::size_t j = 0; j < n; ++j) out[j] += va[j] * d[j];
        }
      }
    };
    op.apply_adjoint = [data, g, n, steps](const double* y, double* x) {
      const std::size_t total = static_cast<std::size_t>(steps + 1) * n;
      std::fill(x, x + total, 0.0);
      std::vector<double> tmp(n), d(n);
      for (int t = 0; t < steps; ++t) {
        const double* yt = y + static_cast<std::size_t>(t) * n;
        double* xt = x + static_cast<std::size_t>(t) * n;
        double* xt1 = x + static_cast<std::size_t>(t + 1) * n;
        const auto& vt = data->v_steps[t];
        const auto& divv = data->div_v[t];
        for (std::size_t j = 0; j < n; ++j) {
          xt1[j] += yt[j];
          xt[j] += (divv[j] - 1.0) * yt[j];
        }
        for (int axis = 0; axis < 3; ++axis) {
          const double* va = vt.data() + axis * n;
          for (std::size_t j = 0; j < n; ++j) tmp[j] = va[j] * yt[j];
          central_diff_axis_adjoint(tmp.data(), g, axis, d.data());
          for (std::size_t j = 0; j < n; ++j) xt[j] += d[j];
        }
      }
    };
  }
  adjoint_self_test(op);
  return op;
}

namespace {

ProxFn make_data_prox(const ReconProblem& problem, std::shared_ptr<std::vector<double>> u) {
  if (problem.data_term == ReconProblem::DataTerm::l1) {
    return {"l1-data-dual", [u](std::vector<double>& y, double sigma) {
              for (std::size_t i = 0; i < y.size(); ++i)
                y[i] = std::clamp(y[i] - sigma * (*u)[i], -1.0, 1.0);
            }};
  }
  return {"l2-data-dual", [u](std::vector<double>& y, double sigma) {
            const double inv = 1.0 / (1.0 + sigma);
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = (y[i] - sigma * (*u)[i]) * inv;
          }};
}

ProxFn make_tv_dual_prox(std::size_t n_voxels, int n_frames, double alpha2) {
  return {"tv-dual", [n_voxels, n_frames, alpha2](std::vector<double>& y, double) {
            for (int t = 0; t < n_frames; ++t)
              project_linf_ball_voxel_vectors(y.data() + static_cast<std::size_t>(t) * 3 * n_voxels,
                                              n_voxels, 3, alpha2);
          }};
}

struct JointSetup {
  SpdhgBlocks blocks;
  std::vector<std::vector<double>> y0;
};

JointSetup build_joint_blocks(const SystemMatrix& S, const MeasurementSeries& u,
                              const FlowField* v, const ReconProblem& problem) {
  if (u.n_rows != S.n_rows)
    throw std::invalid_argument("reconstruct: matrix/data row mismatch");
  const int T = u.n_frames;
  const std::size_t n = S.grid.n_voxels();

  JointSetup setup;
  const int M = std::max(1, std::min(problem.batches, S.n_rows));
  setup.blocks.data_batch_count = M;

  for (int m = 0; m < M; ++m) {
    const int row_begin = static_cast<int>(static_cast<long long>(S.n_rows) * m / M);
    const int row_end = static_cast<int>(static_cast<long long>(S.n_rows) * (m + 1) / M);
    const int rows = row_end - row_begin;
    setup.blocks.ops.push_back(make_framewise_batch_op(S, T, row_begin, row_end));
    auto ub = std::make_shared<std::vector<double>>(static_cast<std::size_t>(T) * rows);
    for (int t = 0; t < T; ++t)
      std::copy(u.frame(t) + row_begin, u.frame(t) + row_end,
                ub->begin() + static_cast<std::size_t>(t) * rows);
    setup.blocks.prox_gstar.push_back(make_data_prox(problem, ub));
  }

  if (problem.alpha2 > 0.0) {
    setup.blocks.ops.push_back(make_framewise_grad_op(S.grid, T));
    setup.blocks.prox_gstar.push_back(make_tv_dual_prox(n, T, problem.alpha2));
  }

  if (v != nullptr && problem.gamma > 0.0 && T > 1) {
    setup.blocks.ops.push_back(make_coupling_op(S.grid, T, *v, problem.motion_model));
    const double gamma = problem.gamma;
    setup.blocks.prox_gstar.push_back(
        {"coupling-dual", [gamma](std::vector<double>& y, double) {
           project_linf_ball_scalar(y.data(), y.size(), gamma);
         }});
  }

  for (const auto& op : setup.blocks.ops)
    setup.y0.emplace_back(op.out_dim, 0.0);
  return setup;
}


ProxFn make_primal_prox(const ReconProblem& problem) {
  const double w = problem.alpha1;
  if (!problem.positivity) return make_prox_l1(w);
  return {"l1-nonneg", [w](std::vector<double>& x, double step) {
            const double t = w * step;
            for (double& v : x) v = std::max(v - t, 0.0);
          }};
}

double data_term_value(const SystemMatrix& S, const MeasurementSeries& u,
                       const ImageSequence& c, ReconProblem::DataTerm term) {
  std::vector<double> y(S.n_rows);
  double total = 0.0;
  for (int t = 0; t < u.n_frames; ++t) {
    S.apply(c.frame(t), y.data());
    const double* ut = u.frame(t);
    if (term == ReconProblem::DataTerm::l1) {
      for (int r = 0; r < S.n_rows; ++r) total += std::abs(y[r] - ut[r]);
    } else {
      for (int r = 0; r < S.n_rows; ++r) total += 0.5 * (y[r] - ut[r]) * (y[r] - ut[r]);
    }
  }
  return total;
}

double fused_lasso_value(const ImageSequence& c, double alpha1, double alpha2) {
  const std::size_t n = c.grid.n_voxels();
  double l1 = 0.0;
  for (double x : c.data) l1 += std::abs(x);
  double tv = 0.0;
  if (alpha2 > 0.0) {
    std::vector<double> g(3 * n);
    for (int t = 0; t < c.n_frames; ++t) {
      grad_forward(c.frame(t), c.grid, g.data());
      for (std::size_t j = 0; j < n; ++j)
        tv += std::sqrt(g[j] * g[j] + g[n + j] * g[n + j] + g[2 * n + j] * g[2 * n + j]);
    }
  }
  return alpha1 * l1 + alpha2 * tv;
}

double coupling_value(const SystemMatrix& S, const ImageSequence& c, const FlowField& v,
                      const ReconProblem& problem) {
  if (problem.gamma <= 0.0 || c.n_frames < 2) return 0.0;
  LinOp W = make_coupling_op(S.grid, c.n_frames, v, problem.motion_model);
  std::vector<double> r(W.out_dim);
  W.apply(c.data.data(), r.data());
  double total = 0.0;
  for (double x : r) total += std::abs(x);
  return problem.gamma * total;
}

}  // namespace

ImageSequence reconstruct_framewise_spdhg(const SystemMatrix& S, const MeasurementSeries& u,
                                          const ReconProblem& problem,
                                          SolveDiagnostics* diag) {
  ReconProblem p = problem;
  p.gamma = 0.0;
  auto setup = build_joint_blocks(S, u, nullptr, p);

  PdhgParams params;
  params.max_iters = p.stage_iters;
  params.seed = p.seed;
  params.trace_every = p.trace_every;

  const std::size_t dim = static_cast<std::size_t>(u.n_frames) * S.grid.n_voxels();
  Objective obj = [&](const std::vector<double>& x) {
    ImageSequence c(S.grid, u.n_frames, x);
    return data_term_value(S, u, c, p.data_term) + fused_lasso_value(c, p.alpha1, p.alpha2);
  };
  auto x = spdhg(setup.blocks, make_primal_prox(p), params, std::vector<double>(dim, 0.0),
                 std::move(setup.y0), diag ? obj : Objective{}, diag);
  return ImageSequence(S.grid, u.n_frames, std::move(x));
}

ImageSequence reconstruct_joint(const SystemMatrix& S, const MeasurementSeries& u,
                                const FlowField& v, const ReconProblem& problem,
                                const ImageSequence* init, SolveDiagnostics* diag) {
  auto setup = build_joint_blocks(S, u, &v, problem);

  PdhgParams params;
  params.max_iters = problem.stage_iters;
  params.seed = problem.seed;
  params.trace_every = problem.trace_every;

  const std::size_t dim = static_cast<std::size_t>(u.n_frames) * S.grid.n_voxels();
  std::vector<double> x0(dim, 0.0);
  if (init) {
    if (init->data.size() != dim)
      throw std::invalid_argument("reconstruct_joint: init sequence has wrong shape");
    x0 = init->data;
  }
  Objective obj = [&](const std::vector<double>& x) {
    ImageSequence c(S.grid, u.n_frames, x);
    return data_term_value(S, u, c, problem.data_term) +
           fused_lasso_value(c, problem.alpha1, problem.alpha2) +
           coupling_value(S, c, v, problem);
  };
  auto x = spdhg(setup.blocks, make_primal_prox(problem), params, std::move(x0),
                 std::move(setup.y0), diag ? obj : Objective{}, diag);
  return ImageSequence(S.grid, u.n_frames, std::move(x));
}

double joint_objective(const SystemMatrix& S, const MeasurementSeries& u,
                       const ImageSequence& c, const FlowField& v, const ReconProblem& problem,
                       const MotionProblem& motion_problem) {
  return data_term_value(S, u, c, problem.data_term) +
         fused_lasso_value(c, problem.alpha1, problem.alpha2) +
         coupling_value(S, c, v, problem) + flow_regularizer_value(v, motion_problem);
}

JointResult alternate_joint(const SystemMatrix& S, const MeasurementSeries& u,
                            const ReconProblem& problem, const MotionProblem& motion_problem,
                            JointInit init) {
  if (problem.alternations < 1)
    throw std::invalid_argument("alternate_joint: alternations must be >= 1");
  MotionProblem mp = motion_problem;
  mp.model = problem.motion_model;
  mp.gamma = problem.gamma;

  JointResult result;
  result.flow = FlowField(S.grid, std::max(1, u.n_frames - 1));
  result.images = init == JointInit::framewise_warmstart
                      ? reconstruct_framewise_spdhg(S, u, problem)
                      : ImageSequence(S.grid, u.n_frames);

  double best = joint_objective(S, u, result.images, result.flow, problem, mp);
  for (int a = 0; a < problem.alternations; ++a) {
    ImageSequence c_next = reconstruct_joint(S, u, result.flow, problem, &result.images);
    const double with_c = joint_objective(S, u, c_next, result.flow, problem, mp);
    if (with_c <= best) {
      result.images = std::move(c_next);
      best = with_c;
    } else {
      ++result.rejected_image_stages;
    }

    if (u.n_frames > 1) {
      FlowField v_next = estimate_motion(result.images, mp, &result.flow);
      const double with_v = joint_objective(S, u, result.images, v_next, problem, mp);
      if (with_v <= best) {
        result.flow = std::move(v_next);
        best = with_v;
      } else {
        ++result.rejected_motion_stages;
      }
    }
    result.objective_per_alternation.push_back(best);
  }
  return result;
}

}  // namespace dynmpi
