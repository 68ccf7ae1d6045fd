#include "dynmpi/motion.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "dynmpi/parallel.hpp"

namespace dynmpi {

namespace {

int integer_scale(double scale_factor) {
  if (!(scale_factor > 0.0 && scale_factor < 1.0))
    throw std::invalid_argument("motion: scale factor must lie in (0,1)");
  const double inv = 1.0 / scale_factor;
  const int f = static_cast<int>(std::lround(inv));
  if (std::abs(inv - f) > 1e-9)
    throw std::invalid_argument("motion: only 1/integer scale factors are supported");
  return f;
}

std::array<int, 3> level_factor(const std::array<int, 3>& dims, int f) {
  std::array<int, 3> out{1, 1, 1};
  for (int a = 0; a < 3; ++a)
    if (dims[a] % f == 0 && dims[a] / f >= 4) out[a] = f;
  return out;
}

Grid3 coarsen_grid(const Grid3& g, const std::array<int, 3>& factor) {
  Grid3 out = g;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = g.dims[a] / factor[a];
    out.voxel_size[a] = g.voxel_size[a] * factor[a];
    // coarse voxel center = mean of its fine block's centers
    out.origin[a] = g.origin[a] + 0.5 * (factor[a] - 1) * g.voxel_size[a];
  }
  return out;
}

}  // namespace

std::vector<double> warp_reverse(const std::vector<double>& image, const Grid3& grid,
                                 const double* flow3) {
  const std::size_t n = grid.n_voxels();
  if (image.size() != n) throw std::invalid_argument("warp_reverse: image/grid mismatch");
  std::vector<double> out(n);
  const double* vx = flow3;
  const double* vy = flow3 + n;
  const double* vz = flow3 + 2 * n;
  for (int x = 0; x < grid.dims[0]; ++x)
    for (int y = 0; y < grid.dims[1]; ++y)
      for (int z = 0; z < grid.dims[2]; ++z) {
        const std::size_t j = grid.index(x, y, z);
        out[j] = trilinear_sample(image.data(), grid.dims, x + vx[j], y + vy[j], z + vz[j]);
      }
  return out;
}

WarpStencil WarpStencil::build(const Grid3& grid, const double* flow3) {
  const std::size_t n = grid.n_voxels();
  WarpStencil st;
  st.n = n;
  st.corner.resize(8 * n);
  st.weight.resize(8 * n);
  const double* vx = flow3;
  const double* vy = flow3 + n;
  const double* vz = flow3 + 2 * n;
  auto prep = [](double c, int dim, int& i0, int& i1, double& w) {
    if (dim == 1) {
      i0 = i1 = 0;
      w = 0.0;
      return;
    }
    c = std::clamp(c, 0.0, static_cast<double>(dim - 1));
    i0 = std::min(static_cast<int>(std::floor(c)), dim - 2);
    i1 = i0 + 1;
    w = c - i0;
  };
  for (int x = 0; x < grid.dims[0]; ++x)
    for (int y = 0; y < grid.dims[1]; ++y)
      for (int z = 0; z < grid.dims[2]; ++z) {
        const std::size_t j = grid.index(x, y, z);
        int x0, x1, y0, y1, z0, z1;
        double wx, wy, wz;
        prep(x + vx[j], grid.dims[0], x0, x1, wx);
        prep(y + vy[j], grid.dims[1], y0, y1, wy);
        prep(z + vz[j], grid.dims[2], z0, z1, wz);
        const int xs[2] = {x0, x1};
        const int ys[2] = {y0, y1};
        const int zs[2] = {z0, z1};
        const double wxs[2] = {1 - wx, wx};
        const double wys[2] = {1 - wy, wy};
        const double wzs[2] = {1 - wz, wz};
        int c = 0;
        for (int ax = 0; ax < 2; ++ax)
          for (int ay = 0; ay < 2; ++ay)
            for (int az = 0; az < 2; ++az, ++c) {
              st.corner[8 * j + c] = grid.index(xs[ax], ys[ay], zs[az]);
              st.weight[8 * j + c] = wxs[ax] * wys[ay] * wzs[az];
            }
      }
  return st;
}

void WarpStencil::apply(const double* image, double* out) const {
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < 8; ++c) s += weight[8 * j + c] * image[corner[8 * j + c]];
    out[j] = s;
  }
}

void WarpStencil::apply_adjoint(const double* y, double* out) const {
  std::fill(out, out + n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double yj = y[j];
    if (yj == 0.0) continue;
    for (int c = 0; c < 8; ++c) out[corner[8 * j + c]] += weight[8 * j + c] * yj;
  }
}

std::vector<double> warp_adjoint(const std::vector<double>& image, const Grid3& grid,
                                 const double* flow3) {
  const std::size_t n = grid.n_voxels();
  if (image.size() != n) throw std::invalid_argument("warp_adjoint: image/grid mismatch");
  std::vector<double> out(n);
  WarpStencil::build(grid, flow3).apply_adjoint(image.data(), out.data());
  return out;
}

std::vector<ImageSequence> build_pyramid(const ImageSequence& c, int levels,
                                         double scale_factor) {
  if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");
  const int f = integer_scale(scale_factor);
  std::vector<ImageSequence> pyr;
  pyr.push_back(c);
  for (int l = 1; l < levels; ++l) {
    const ImageSequence& prev = pyr.back();
    const std::array<int, 3> factor = level_factor(prev.grid.dims, f);
    if (factor == std::array<int, 3>{1, 1, 1})
      throw std::invalid_argument("build_pyramid: too many levels for grid size");
    const Grid3 cg = coarsen_grid(prev.grid, factor);
    ImageSequence down(cg, prev.n_frames);
    for (int k = 0; k < prev.n_frames; ++k) {
      std::vector<double> frame(prev.frame(k), prev.frame(k) + prev.grid.n_voxels());
      auto small = resample_trilinear(frame, prev.grid.dims, factor,
                                      ResampleMode::down_average);
      std::copy(small.begin(), small.end(), down.frame(k));
    }
    pyr.push_back(std::move(down));
  }
  return pyr;
}

FlowField prolong_flow(const FlowField& coarse, const Grid3& fine_grid) {
  std::array<int, 3> factor{};
  for (int a = 0; a < 3; ++a) {
    if (fine_grid.dims[a] % coarse.grid.dims[a] != 0)
      throw std::invalid_argument("prolong_flow: incompatible grids");
    factor[a] = fine_grid.dims[a] / coarse.grid.dims[a];
  }
  FlowField out(fine_grid, coarse.n_steps);
  const std::size_t nc = coarse.grid.n_voxels();
  for (int k = 0; k < coarse.n_steps; ++k)
    for (int comp = 0; comp < 3; ++comp) {
      std::vector<double> cc(coarse.step_component(k, comp),
                             coarse.step_component(k, comp) + nc);
      auto fine = resample_trilinear(cc, coarse.grid.dims, factor,
                                     ResampleMode::up_trilinear);
      // displacements are expressed in target-level voxel units
      const double scale = factor[comp];
      double* dst = out.step_component(k, comp);
      for (std::size_t j = 0; j < fine.size(); ++j) dst[j] = fine[j] * scale;
    }
  return out;
}

FlowField restrict_flow(const FlowField& fine, const Grid3& coarse_grid) {
  std::array<int, 3> factor{};
  for (int a = 0; a < 3; ++a) {
    if (fine.grid.dims[a] % coarse_grid.dims[a] != 0)
      throw std::invalid_argument("restrict_flow: incompatible grids");
    factor[a] = fine.grid.dims[a] / coarse_grid.dims[a];
  }
  FlowField out(coarse_grid, fine.n_steps);
  const std::size_t nf = fine.grid.n_voxels();
  for (int k = 0; k < fine.n_steps; ++k)
    for (int comp = 0; comp < 3; ++comp) {
      std::vector<double> fc(fine.step_component(k, comp),
                             fine.step_component(k, comp) + nf);
      auto coarse = resample_trilinear(fc, fine.grid.dims, factor,
                                       ResampleMode::down_average);
      const double scale = 1.0 / factor[comp];
      double* dst = out.step_component(k, comp);
      for (std::size_t j = 0; j < coarse.size(); ++j) dst[j] = coarse[j] * scale;
    }
  return out;
}

namespace {

int resolve_levels(const Grid3& grid, const MotionProblem& problem) {
  if (problem.pyramid_levels > 0) return problem.pyramid_levels;
  int min_dim = 0;
  for (int a = 0; a < 3; ++a)
    if (grid.dims[a] > 1) min_dim = min_dim == 0 ? grid.dims[a] : std::min(min_dim, grid.dims[a]);
  if (min_dim < 8) return 1;
  return static_cast<int>(std::floor(std::log2(min_dim / 8.0))) + 1;
}

}  // namespace

LinOp make_flow_gradient_op(const Grid3& grid) {
  const std::size_t n = grid.n_voxels();
  LinOp grad = make_grad_forward_op(grid);
  LinOp op;
  op.in_dim = 3 * n;
  op.out_dim = 9 * n;
  op.apply = [grad, n](const double* x, double* y) {
    for (int c = 0; c < 3; ++c) grad.apply(x + c * n, y + 3 * c * n);
  };
  op.apply_adjoint = [grad, n](const double* y, double* x) {
    for (int c = 0; c < 3; ++c) grad.apply_adjoint(y + 3 * c * n, x + c * n);
  };
  return op;
}

namespace {

ProxFn make_flow_reg_prox(const MotionProblem& problem, std::size_t n_voxels) {
  if (problem.flow_regularizer == MotionProblem::FlowRegularizer::tv_l1) {
    const double radius = problem.beta;
    return {"tv-dual", [n_voxels, radius](std::vector<double>& y, double) {
              // per component block, project each voxel's gradient 3-vector
              for (int c = 0; c < 3; ++c)
                project_linf_ball_voxel_vectors(y.data() + 3 * c * n_voxels, n_voxels, 3,
                                                radius);
            }};
  }
  const double beta = problem.beta;
  return {"l2-dual", [beta](std::vector<double>& y, double sigma) {
            prox_l2_squared_dual(y.data(), y.size(), sigma, beta);
          }};
}

// Closed-form prox of u -> t |a + <b,u>| (+ tik * ||u||^2) per voxel.
struct OfDataProx {
  std::vector<double> a;   // residual constant per voxel
  std::vector<double> b;   // (3, n) spatial gradient
  std::vector<double> bb;  // ||b||^2 per voxel
  double gamma = 1.0;
  double tikhonov = 0.0;  // beta for the l2_tikhonov variant, else 0

  void operator()(std::vector<double>& u, double tau) const {
    const std::size_t n = a.size();
    const double c2 = 1.0 + 2.0 * tau * tikhonov;
    const double t = gamma * tau / c2;
    for (std::size_t j = 0; j < n; ++j) {
      double u0 = u[j] / c2, u1 = u[n + j] / c2, u2 = u[2 * n + j] / c2;
      const double b0 = b[j], b1 = b[n + j], b2 = b[2 * n + j];
      const double rho = a[j] + b0 * u0 + b1 * u1 + b2 * u2;
      const double nb = bb[j];
      if (rho > t * nb) {
        u0 -= t * b0;
        u1 -= t * b1;
        u2 -= t * b2;
      } else if (rho < -t * nb) {
        u0 += t * b0;
        u1 += t * b1;
        u2 += t * b2;
      } else if (nb > 0.0) {
        const double s = rho / nb;
        u0 -= s * b0;
        u1 -= s * b1;
        u2 -= s * b2;
      }
      u[j] = u0;
      u[n + j] = u1;
      u[2 * n + j] = u2;
    }
  }
};

// One linearized optical-flow solve around the current total field.
std::vector<double> solve_of_increment(const std::vector<double>& c0,
                                       const std::vector<double>& c1w, const Grid3& grid,
                                       const MotionProblem& problem,
                                       const std::vector<double>& v_current) {
  const std::size_t n = grid.n_voxels();

  OfDataProx data;
  data.gamma = problem.gamma;
  data.tikhonov = problem.flow_regularizer == MotionProblem::FlowRegularizer::l2_tikhonov
                      ? problem.beta
                      : 0.0;
  // Gradient of the warped second frame: it vanishes wherever warping lost
  // the image overlap, so those voxels stop driving the increment. At
  // convergence it coincides with the first-frame gradient.
  data.b.resize(3 * n);
  grad_central(c1w.data(), grid, data.b.data());
  data.a.resize(n);
  data.bb.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double b0 = data.b[j], b1 = data.b[n + j], b2 = data.b[2 * n + j];
    data.a[j] = c1w[j] - c0[j] -
                (b0 * v_current[j] + b1 * v_current[n + j] + b2 * v_current[2 * n + j]);
    data.bb[j] = b0 * b0 + b1 * b1 + b2 * b2;
  }

  ProxFn prox_f{"of-data", [data](std::vector<double>& u, double tau) { data(u, tau); }};

  if (problem.flow_regularizer == MotionProblem::FlowRegularizer::l2_tikhonov) {
    // S lives in the primal; iterate the prox directly (B = 0).
    std::vector<double> u = v_current;
    for (int k = 0; k < problem.solver.max_iters; ++k) prox_f.evaluate(u, 1.0);
    return u;
  }

  LinOp B = make_flow_gradient_op(grid);
  ProxFn prox_gstar = make_flow_reg_prox(problem, n);
  return pdhg(B, prox_f, prox_gstar, problem.solver, v_current,
              std::vector<double>(B.out_dim, 0.0));
}

}  // namespace

LinOp make_mc_transport_op(const std::vector<double>& c0, const Grid3& grid) {
  const std::size_t n = grid.n_voxels();
  auto conc = std::make_shared<std::vector<double>>(c0);
  LinOp op;
  op.in_dim = 3 * n;
  op.out_dim = n;
  op.apply = [conc, grid, n](const double* u, double* y) {
    std::vector<double> tmp(n), d(n);
    std::fill(y, y + n, 0.0);
    for (int axis = 0; axis < 3; ++axis) {
      for (std::size_t j = 0; j < n; ++j) tmp[j] = (*conc)[j] * u[axis * n + j];
      central_diff_axis(tmp.data(), grid, axis, d.data());
      for (std::size_t j = 0; j < n; ++j) y[j] += d[j];
    }
  };
  op.apply_adjoint = [conc, grid, n](const double* y, double* u) {
    std::vector<double> d(n);
    for (int axis = 0; axis < 3; ++axis) {
      central_diff_axis_adjoint(y, grid, axis, d.data());
      for (std::size_t j = 0; j < n; ++j) u[axis * n + j] = (*conc)[j] * d[j];
    }
  };
  return op;
}

namespace {

std::vector<double> solve_mc_level(const std::vector<double>& c0, const std::vector<double>& c1,
                                   const Grid3& grid, const MotionProblem& problem,
                                   const std::vector<double>& v_init) {
  const std::size_t n = grid.n_voxels();
  std::vector<double> dt(n);
  for (std::size_t j = 0; j < n; ++j) dt[j] = c1[j] - c0[j];

  LinOp transport = make_mc_transport_op(c0, grid);
  const double gamma = problem.gamma;
  auto dt_shared = std::make_shared<std::vector<double>>(std::move(dt));

  if (problem.flow_regularizer == MotionProblem::FlowRegularizer::l2_tikhonov) {
    const double beta = problem.beta;
    ProxFn prox_f{"tikhonov", [beta](std::vector<double>& u, double tau) {
                    const double s = 1.0 / (1.0 + 2.0 * tau * beta);
                    for (auto& x : u) x *= s;
                  }};
    ProxFn prox_gstar{"mc-dual", [dt_shared, gamma](std::vector<double>& y, double sigma) {
                        prox_translated_linf_indicator(y.data(), y.size(), sigma, gamma,
                                                       dt_shared->data());
                      }};
    return pdhg(transport, prox_f, prox_gstar, problem.solver, v_init,
                std::vector<double>(transport.out_dim, 0.0));
  }

  LinOp reg = make_flow_gradient_op(grid);
  const std::size_t reg_dim = reg.out_dim;
  LinOp B = make_vstack_op({std::move(reg), std::move(transport)});
  ProxFn reg_prox = make_flow_reg_prox(problem, n);
  ProxFn prox_gstar{"mc-dual",
                    [reg_prox, dt_shared, gamma, reg_dim](std::vector<double>& y, double sigma) {
                      std::vector<double> head(y.begin(), y.begin() + reg_dim);
                      reg_prox.evaluate(head, sigma);
                      std::copy(head.begin(), head.end(), y.begin());
                      prox_translated_linf_indicator(y.data() + reg_dim, y.size() - reg_dim,
                                                     sigma, gamma, dt_shared->data());
                    }};
  return pdhg(B, make_prox_identity(), prox_gstar, problem.solver, v_init,
              std::vector<double>(B.out_dim, 0.0));
}

}  // namespace

FlowField estimate_motion_of(const ImageSequence& c, const MotionProblem& problem,
                             const FlowField* init) {
  if (c.n_frames < 2) throw std::invalid_argument("estimate_motion_of: needs >= 2 frames");
  for (double x : c.data)
    if (!std::isfinite(x))
      throw std::invalid_argument("estimate_motion_of: non-finite image input");

  const int levels = resolve_levels(c.grid, problem);
  const auto pyr = build_pyramid(c, levels, problem.scale_factor);
  const int n_steps = c.n_frames - 1;
  FlowField result(c.grid, n_steps);

  // Warm-start flows restricted level by level down to the coarsest.
  std::vector<FlowField> init_per_level;
  if (init) {
    if (init->n_steps != n_steps || !(init->grid == c.grid))
      throw std::invalid_argument("estimate_motion_of: init flow has wrong shape");
    init_per_level.push_back(*init);
    for (int l = 1; l < levels; ++l)
      init_per_level.push_back(restrict_flow(init_per_level.back(), pyr[l].grid));
  }

  parallel_for(
      n_steps,
      [&](std::size_t kf) {
        const int k = static_cast<int>(kf);
        std::vector<double> v;  // current level flow, (3, n_level)
        for (int level = levels - 1; level >= 0; --level) {
          const Grid3& g = pyr[level].grid;
          const std::size_t n = g.n_voxels();
          if (level == levels - 1) {
            if (init) {
              const double* src = init_per_level[level].step(k);
              v.assign(src, src + 3 * n);
            } else {
              v.assign(3 * n, 0.0);
            }
          }
          const std::vector<double> c0(pyr[level].frame(k), pyr[level].frame(k) + n);
          const std::vector<double> c1(pyr[level].frame(k + 1), pyr[level].frame(k + 1) + n);
          for (int inc = 0; inc < std::max(1, problem.warp_increments); ++inc) {
            const auto c1w = warp_reverse(c1, g, v.data());
            const auto solved = solve_of_increment(c0, c1w, g, problem, v);
            // the linearization only supports sub-voxel increments; larger
            // updates run away once the warp loses image overlap
            for (std::size_t j = 0; j < solved.size(); ++j)
              v[j] += std::clamp(solved[j] - v[j], -1.0, 1.0);
          }
          if (level > 0) {
            FlowField tmp(g, 1, v);
            FlowField up = prolong_flow(tmp, pyr[level - 1].grid);
            v.assign(up.step(0), up.step(0) + 3 * pyr[level - 1].grid.n_voxels());
          }
        }
        std::copy(v.begin(), v.end(), result.step(k));
      },
      problem.parallelism);

  return result;
}

FlowField estimate_motion_mc(const ImageSequence& c, const MotionProblem& problem,
                             const FlowField* init) {
  if (c.n_frames < 2) throw std::invalid_argument("estimate_motion_mc: needs >= 2 frames");
  for (double x : c.data)
    if (!std::isfinite(x))
      throw std::invalid_argument("estimate_motion_mc: non-finite image input");

  const int levels = resolve_levels(c.grid, problem);
  const auto pyr = build_pyramid(c, levels, problem.scale_factor);
  const int n_steps = c.n_frames - 1;
  FlowField result(c.grid, n_steps);

  std::vector<FlowField> init_per_level;
  if (init) {
    if (init->n_steps != n_steps || !(init->grid == c.grid))
      throw std::invalid_argument("estimate_motion_mc: init flow has wrong shape");
    init_per_level.push_back(*init);
    for (int l = 1; l < levels; ++l)
      init_per_level.push_back(restrict_flow(init_per_level.back(), pyr[l].grid));
  }

  parallel_for(
      n_steps,
      [&](std::size_t kf) {
        const int k = static_cast<int>(kf);
        std::vector<double> v;
        for (int level = levels - 1; level >= 0; --level) {
          const Grid3& g = pyr[level].grid;
          const std::size_t n = g.n_voxels();
          if (level == levels - 1) {
            if (init) {
              const double* src = init_per_level[level].step(k);
              v.assign(src, src + 3 * n);
            } else {
              v.assign(3 * n, 0.0);
            }
          }
          const std::vector<double> c0(pyr[level].frame(k), pyr[level].frame(k) + n);
          const std::vector<double> c1(pyr[level].frame(k + 1), pyr[level].frame(k + 1) + n);
          v = solve_mc_level(c0, c1, g, problem, v);
          if (level > 0) {
            FlowField tmp(g, 1, v);
            FlowField up = prolong_flow(tmp, pyr[level - 1].grid);
            v.assign(up.step(0), up.step(0) + 3 * pyr[level - 1].grid.n_voxels());
          }
        }
        std::copy(v.begin(), v.end(), result.step(k));
      },
      problem.parallelism);

  return result;
}

FlowField estimate_motion(const ImageSequence& c, const MotionProblem& problem,
                          const FlowField* init) {
  return problem.model == MotionProblem::Model::optical_flow
             ? estimate_motion_of(c, problem, init)
             : estimate_motion_mc(c, problem, init);
}

double flow_regularizer_value(const FlowField& v, const MotionProblem& problem) {
  const std::size_t n = v.grid.n_voxels();
  double total = 0.0;
  if (problem.flow_regularizer == MotionProblem::FlowRegularizer::l2_tikhonov) {
    for (double x : v.data) total += x * x;
    return problem.beta * total;
  }
  std::vector<double> g(3 * n);
  for (int k = 0; k < v.n_steps; ++k)
    for (int comp = 0; comp < 3; ++comp) {
      grad_forward(v.step_component(k, comp), v.grid, g.data());
      if (problem.flow_regularizer == MotionProblem::FlowRegularizer::tv_l1) {
        for (std::size_t j = 0; j < n; ++j)
          total += std::sqrt(g[j] * g[j] + g[n + j] * g[n + j] + g[2 * n + j] * g[2 * n + j]);
      } else {
        for (std::size_t j = 0; j < 3 * n; ++j) total += g[j] * g[j];
      }
    }
  if (problem.flow_regularizer == MotionProblem::FlowRegularizer::grad_l2) total *= 0.5;
  return problem.beta * total;
}

double motion_residual_value(const ImageSequence& c, const FlowField& v,
                             const MotionProblem& problem) {
  const std::size_t n = c.grid.n_voxels();
  if (v.n_steps != c.n_frames - 1)
    throw std::invalid_argument("motion_residual_value: flow/sequence shape mismatch");
  double total = 0.0;
  if (problem.model == MotionProblem::Model::optical_flow) {
    for (int k = 0; k + 1 < c.n_frames; ++k) {
      const std::vector<double> c1(c.frame(k + 1), c.frame(k + 1) + n);
      const auto warped = warp_reverse(c1, c.grid, v.step(k));
      const double* c0 = c.frame(k);
      for (std::size_t j = 0; j < n; ++j) total += std::abs(warped[j] - c0[j]);
    }
  } else {
    std::vector<double> tmp(n), d(n);
    for (int k = 0; k + 1 < c.n_frames; ++k) {
      const double* c0 = c.frame(k);
      const double* c1 = c.frame(k + 1);
      std::vector<double> residual(n);
      for (std::size_t j = 0; j < n; ++j) residual[j] = c1[j] - c0[j];
      for (int axis = 0; axis < 3; ++axis) {
        const double* comp = v.step_component(k, axis);
        for (std::size_t j = 0; j < n; ++j) tmp[j] = c0[j] * comp[j];
        central_diff_axis(tmp.data(), c.grid, axis, d.data());
        for (std::size_t j = 0; j < n; ++j) residual[j] += d[j];
      }
      for (std::size_t j = 0; j < n; ++j) total += std::abs(residual[j]);
    }
  }
  return problem.gamma * total;
}

}  // namespace dynmpi
