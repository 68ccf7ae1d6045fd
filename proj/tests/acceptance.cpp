// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <vector>

#include "dynmpi/acquisition.hpp"
#include "dynmpi/analysis.hpp"
#include "dynmpi/config.hpp"
#include "dynmpi/motion.hpp"
#include "dynmpi/phantoms.hpp"
#include "dynmpi/pipeline.hpp"
#include "dynmpi/preprocessing.hpp"
#include "dynmpi/recon.hpp"
#include "dynmpi/rng.hpp"

using namespace dynmpi;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

ScannerModel desk_scanner() {
  Eigen::Matrix3d G = Eigen::Vector3d(0.75, 0.75, 1.5).asDiagonal();
  return ScannerModel(G, Eigen::Vector3d(0.014, 0.014, 0.0), {17, 16, 1}, 2.5e6, 2.5e6,
                      Eigen::MatrixXd::Identity(3, 2),
                      ParticleModel::from_core_parameters(0.6, 2e-8, 293.0));
}

double adjoint_error(const LinOp& op, int probes, std::uint64_t seed) {
  rng::Stream rs(seed);
  std::vector<double> x(op.in_dim), y(op.out_dim), bx(op.out_dim), bty(op.in_dim);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    for (auto& v : x) v = rs.next_gaussian();
    for (auto& v : y) v = rs.next_gaussian();
    op.apply(x.data(), bx.data());
    op.apply_adjoint(y.data(), bty.data());
    double lhs = 0, rhs = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < op.out_dim; ++i) {
      lhs += bx[i] * y[i];
      na += bx[i] * bx[i];
      nb += y[i] * y[i];
    }
    for (std::size_t i = 0; i < op.in_dim; ++i) rhs += x[i] * bty[i];
    const double scale = std::max(1e-300, std::sqrt(na) * std::sqrt(nb));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
void criterion_1_adjoints() {
  const auto t0 = std::chrono::steady_clock::now();
  ScannerModel sc = desk_scanner();
  Grid3 grid = Grid3::centered({16, 16, 1}, {2e-3, 2e-3, 2e-3});
  const std::size_t n = grid.n_voxels();
  SystemMatrix S = build_system_matrix(grid, sc.clock(), sc, 0);

  std::map<std::string, LinOp> ops;
  {
    LinOp op;
    op.in_dim = n;
    op.out_dim = S.n_rows;
    op.apply = [&S](const double* x, double* y) { S.apply(x, y); };
    op.apply_adjoint = [&S](const double* y, double* x) { S.apply_adjoint(y, x); };
    ops["system matrix"] = op;
  }
  ops["grad/-div"] = make_grad_forward_op(grid);
  {
    LinOp op;
    op.in_dim = op.out_dim = n;
    op.apply = [grid](const double* x, double* y) { central_diff_axis(x, grid, 0, y); };
    op.apply_adjoint = [grid](const double* y, double* x) {
      central_diff_axis_adjoint(y, grid, 0, x);
    };
    ops["central difference"] = op;
  }
  {
    const int frames = 5;
    LinOp op;
    op.in_dim = frames * n;
    op.out_dim = (frames - 1) * n;
    op.apply = [frames, n](const double* x, double* y) {
      for (int k = 0; k + 1 < frames; ++k)
        for (std::size_t j = 0; j < n; ++j) y[k * n + j] = x[(k + 1) * n + j] - x[k * n + j];
    };
    op.apply_adjoint = [frames, n](const double* y, double* x) {
      std::fill(x, x + frames * n, 0.0);
      for (int k = 0; k + 1 < frames; ++k)
        for (std::size_t j = 0; j < n; ++j) {
          x[(k + 1) * n + j] += y[k * n + j];
          x[k * n + j] -= y[k * n + j];
        }
    };
    ops["temporal difference"] = op;
  }
  rng::Stream rs(77);
  FlowField flow(grid, 4);
  for (auto& v : flow.data) v = rs.next_uniform(-1.5, 1.5);
  {
    auto stencil = std::make_shared<WarpStencil>(WarpStencil::build(grid, flow.step(0)));
    LinOp op;
    op.in_dim = op.out_dim = n;
    op.apply = [stencil](const double* x, double* y) { stencil->apply(x, y); };
    op.apply_adjoint = [stencil](const double* y, double* x) { stencil->apply_adjoint(y, x); };
    ops["warp/warp adjoint"] = op;
  }
  ops["OF motion B"] = make_flow_gradient_op(grid);
  {
    std::vector<double> conc(n);
    for (auto& v : conc) v = rs.next_uniform(0, 1);
    ops["MC motion B"] =
        make_vstack_op({make_flow_gradient_op(grid), make_mc_transport_op(conc, grid)});
  }
  ops["OF image B"] = make_coupling_op(grid, 5, flow, MotionProblem::Model::optical_flow);
  ops["MC image B"] = make_coupling_op(grid, 5, flow, MotionProblem::Model::mass_conservation);

  bool pass = true;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, op] : ops) {
    const double err = adjoint_error(op, 20, 1234);
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
    if (err >= 1e-8) pass = false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%zu operators x 20 probes, worst rel err %.2e (%s), %.1f s", ops.size(),
                worst, worst_name.c_str(), secs);
  report(1, "adjoint identities", pass && secs < 30.0, detail);
}

// ---------------------------------------------------------------------------
double refine_1d(const std::function<double(double)>& f, double lo, double hi) {
  double best_x = lo, best = f(lo);
  for (int pass = 0; pass < 3; ++pass) {
    const double step = (hi - lo) / 500.0;
    for (int i = 0; i <= 500; ++i) {
      const double x = lo + i * step;
      const double v = f(x);
      if (v < best) {
        best = v;
        best_x = x;
      }
    }
    lo = best_x - 2 * step;
    hi = best_x + 2 * step;
  }
  return best_x;
}

void criterion_2_prox_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  rng::Stream rs(4242);
  double worst = 0.0;
  bool pass = true;

  for (int i = 0; i < 50; ++i) {
    const double x = rs.next_uniform(-3, 3);
    const double t = rs.next_uniform(0.01, 2.0);
    double got = x;
    prox_l1(&got, 1, t);
    const double want =
        refine_1d([&](double u) { return t * std::abs(u) + 0.5 * (u - x) * (u - x); }, -4, 4);
    worst = std::max(worst, std::abs(got - want));
  }
  for (int i = 0; i < 50; ++i) {
    const double y = rs.next_uniform(-4, 4);
    const double r = rs.next_uniform(0.1, 2.5);
    double got = y;
    project_linf_ball_scalar(&got, 1, r);
    const double want = refine_1d(
        [&](double u) {
          return std::abs(u) <= r ? 0.5 * (u - y) * (u - y) : 1e12;
        },
        -r, r);
    worst = std::max(worst, std::abs(got - want));
  }
  for (int i = 0; i < 50; ++i) {
    // 2-d vector projection against a polar grid search
    Eigen::Vector2d y(rs.next_uniform(-3, 3), rs.next_uniform(-3, 3));
    const double r = rs.next_uniform(0.2, 2.0);
    std::vector<double> got = {y[0], 0.0, y[1], 0.0};  // (comp, voxel) layout, 2 voxels
    project_linf_ball_voxel_vectors(got.data(), 2, 2, r);
    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_val = 1e300;
    for (int a = 0; a < 720; ++a)
      for (int rr = 0; rr <= 200; ++rr) {
        const double rho = r * rr / 200.0;
        const Eigen::Vector2d u(rho * std::cos(M_PI * a / 360.0),
                                rho * std::sin(M_PI * a / 360.0));
        const double v = 0.5 * (u - y).squaredNorm();
        if (v < best_val) {
          best_val = v;
          best = u;
        }
      }
    worst = std::max(worst, (Eigen::Vector2d(got[0], got[2]) - best).norm());
  }
  for (int i = 0; i < 50; ++i) {
    const double y = rs.next_uniform(-3, 3);
    const double sigma = rs.next_uniform(0.1, 2.0);
    const double beta = rs.next_uniform(0.1, 2.0);
    double got = y;
    prox_l2_squared_dual(&got, 1, sigma, beta);
    const double want = refine_1d(
        [&](double u) { return sigma / (2 * beta) * u * u + 0.5 * (u - y) * (u - y); }, -4, 4);
    worst = std::max(worst, std::abs(got - want));
  }
  for (int i = 0; i < 50; ++i) {
    const double y = rs.next_uniform(-3, 3);
    const double sigma = rs.next_uniform(0.1, 2.0);
    const double gamma = rs.next_uniform(0.2, 2.0);
    const double b = rs.next_uniform(-2, 2);
    double got = y;
    prox_translated_linf_indicator(&got, 1, sigma, gamma, &b);
    const double want = refine_1d(
        [&](double u) {
          return std::abs(u) <= gamma ? -sigma * b * u + 0.5 * (u - y) * (u - y) : 1e12;
        },
        -gamma, gamma);
    worst = std::max(worst, std::abs(got - want));
  }
  if (worst >= 1e-4) pass = false;

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[128];
  std::snprintf(detail, sizeof(detail), "5 prox families x 50 instances, worst err %.2e, %.1f s",
                worst, secs);
  report(2, "prox operators vs grid-search minimizers", pass && secs < 30.0, detail);
}

// ---------------------------------------------------------------------------
void criterion_3_solvers() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string note;

  // lasso: min 0.5||Ax-b||^2 + lambda ||x||_1
  const std::vector<double> A = {1.0, 0.3, -0.2, 0.8, 0.5, -0.7, 0.1, 0.9, -0.4, 0.2, 0.6, -0.1};
  const std::vector<double> b = {1.0, -0.5, 0.7, 0.2};
  const double lambda = 0.1;
  auto objective = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (int r = 0; r < 4; ++r) {
      double res = -b[r];
      for (int j = 0; j < 3; ++j) res += A[r * 3 + j] * x[j];
      v += 0.5 * res * res;
    }
    for (double xi : x) v += lambda * std::abs(xi);
    return v;
  };
  LinOp Aop = make_dense_op(A, 4, 3);
  ProxFn data_prox{"l2-dual", [&](std::vector<double>& y, double sigma) {
                     for (int i = 0; i < 4; ++i) y[i] = (y[i] - sigma * b[i]) / (1.0 + sigma);
                   }};
  PdhgParams long_run;
  long_run.max_iters = 300000;
  const double ref = objective(pdhg(Aop, make_prox_l1(lambda), data_prox, long_run,
                                    std::vector<double>(3, 0.0), std::vector<double>(4, 0.0)));
  PdhgParams short_run;
  short_run.max_iters = 20000;
  const double lasso_obj =
      objective(pdhg(Aop, make_prox_l1(lambda), data_prox, short_run,
                     std::vector<double>(3, 0.0), std::vector<double>(4, 0.0)));
  if (!(std::abs(lasso_obj - ref) <= 1e-4 * std::abs(ref))) {
    pass = false;
    note += "lasso off; ";
  }

  // TV denoising of a noisy step signal
  Grid3 line({48, 1, 1}, {1, 1, 1}, {0, 0, 0});
  rng::Stream rs(5);
  std::vector<double> data(48);
  for (int i = 0; i < 48; ++i) data[i] = (i < 24 ? 0.0 : 1.0) + 0.12 * rs.next_gaussian();
  const double tv_lambda = 0.35;
  auto tv_objective = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (int i = 0; i < 48; ++i) v += 0.5 * (x[i] - data[i]) * (x[i] - data[i]);
    for (int i = 0; i + 1 < 48; ++i) v += tv_lambda * std::abs(x[i + 1] - x[i]);
    return v;
  };
  auto solve_tv = [&](int iters) {
    LinOp B = make_grad_forward_op(line);
    ProxFn prox_f{"quad", [&](std::vector<double>& x, double tau) {
                    for (int i = 0; i < 48; ++i) x[i] = (x[i] + tau * data[i]) / (1.0 + tau);
                  }};
    ProxFn prox_gstar{"linf", [&](std::vector<double>& y, double) {
                        project_linf_ball_scalar(y.data(), y.size(), tv_lambda);
                      }};
    PdhgParams params;
    params.max_iters = iters;
    return pdhg(B, prox_f, prox_gstar, params, std::vector<double>(48, 0.0),
                std::vector<double>(B.out_dim, 0.0));
  };
  const double tv_ref = tv_objective(solve_tv(200000));
  const double tv_obj = tv_objective(solve_tv(5000));
  if (!(std::abs(tv_obj - tv_ref) <= 1e-3 * std::abs(tv_ref))) {
    pass = false;
    note += "tv off; ";
  }

  // degenerate SPDHG equals PDHG bit for bit, and seeds reproduce
  PdhgParams params;
  params.max_iters = 500;
  params.seed = 11;
  auto x_pdhg = pdhg(Aop, make_prox_l1(lambda), data_prox, params, std::vector<double>(3, 0.0),
                     std::vector<double>(4, 0.0));
  SpdhgBlocks single;
  single.data_batch_count = 1;
  single.ops.push_back(make_dense_op(A, 4, 3));
  single.prox_gstar.push_back(data_prox);
  auto x_single = spdhg(single, make_prox_l1(lambda), params, std::vector<double>(3, 0.0),
                        {std::vector<double>(4, 0.0)});
  if (x_pdhg != x_single) {
    pass = false;
    note += "degenerate spdhg != pdhg; ";
  }

  SpdhgBlocks two;
  two.data_batch_count = 2;
  for (int m = 0; m < 2; ++m) {
    std::vector<double> sub(A.begin() + m * 6, A.begin() + (m + 1) * 6);
    two.ops.push_back(make_dense_op(std::move(sub), 2, 3));
    std::vector<double> bm(b.begin() + m * 2, b.begin() + (m + 1) * 2);
    two.prox_gstar.push_back({"l2", [bm](std::vector<double>& y, double sigma) {
                                for (int i = 0; i < 2; ++i)
                                  y[i] = (y[i] - sigma * bm[i]) / (1.0 + sigma);
                              }});
  }
  auto run_two = [&] {
    PdhgParams p2;
    p2.max_iters = 2000;
    p2.seed = 31;
    return spdhg(two, make_prox_l1(lambda), p2, std::vector<double>(3, 0.0),
                 {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
  };
  if (run_two() != run_two()) {
    pass = false;
    note += "seed not reproducible; ";
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[192];
  std::snprintf(detail, sizeof(detail),
                "lasso rel %.1e (tol 1e-4), tv rel %.1e (tol 1e-3)%s%s, %.0f s",
                std::abs(lasso_obj - ref) / std::abs(ref), std::abs(tv_obj - tv_ref) / tv_ref,
                note.empty() ? "" : ", ", note.c_str(), secs);
  report(3, "PDHG/SPDHG convergence and reproducibility", pass && secs < 120.0, detail);
}

// ---------------------------------------------------------------------------
void criterion_4_physics() {
  const auto t0 = std::chrono::steady_clock::now();
  ScannerModel sc = desk_scanner();
  bool pass = true;
  std::string note;

  rng::Stream rs(9);
  double worst_ffp = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double t = rs.next_uniform(0, 5 * sc.clock().repetition_time);
    worst_ffp = std::max(worst_ffp, effective_field(ffp_position(t, sc), t, sc).norm());
  }
  if (worst_ffp >= 1e-14) {
    pass = false;
    note += "FFP field; ";
  }

  ParticleModel particle(1.0, 1.0);
  double min_eig = 1e300;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d dir(rs.next_gaussian(), rs.next_gaussian(), rs.next_gaussian());
    while (dir.norm() < 1e-9)
      dir = Eigen::Vector3d(rs.next_gaussian(), rs.next_gaussian(), rs.next_gaussian());
    dir.normalize();
    const double r = std::pow(10.0, rs.next_uniform(-3, 3));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(ftilde(r * dir, particle));
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  if (!(min_eig > 0.0)) {
    pass = false;
    note += "Ftilde not PD; ";
  }

  double worst_fd = 0.0;
  for (double z : {0.1, 1.0, 5.0}) {
    const double h = 1e-6;
    const double fd = (langevin(z + h, 1.0) - langevin(z - h, 1.0)) / (2 * h);
    worst_fd = std::max(worst_fd, std::abs(langevin_derivative(z, 1.0) - fd));
  }
  if (worst_fd >= 1e-6) {
    pass = false;
    note += "Langevin derivative; ";
  }

  // static phantom: signals over two consecutive cycles agree to 1e-12
  Grid3 grid = Grid3::centered({8, 8, 1}, {4e-3, 4e-3, 4e-3});
  std::vector<double> conc(grid.n_voxels(), 0.0);
  conc[grid.index(3, 4, 0)] = 1.0;
  conc[grid.index(4, 3, 0)] = 0.7;
  const CycleClock clock = sc.clock();
  double max_amp = 0.0, worst_period = 0.0;
  std::vector<double> u1(clock.samples_per_cycle * 2);
  for (int k = 0; k < clock.samples_per_cycle; ++k) {
    const double t = k / clock.sample_rate;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(2);
    for (int x = 0; x < 8; ++x)
      for (int y = 0; y < 8; ++y) {
        const double cv = conc[grid.index(x, y, 0)];
        if (cv == 0.0) continue;
        const auto xc = grid.voxel_center(x, y, 0);
        const Eigen::Vector3d pos(xc[0], xc[1], xc[2]);
        s1 += cv * system_function(pos, t, sc);
        s2 += cv * system_function(pos, t + clock.repetition_time, sc);
      }
    max_amp = std::max({max_amp, std::abs(s1[0]), std::abs(s1[1])});
    worst_period = std::max(worst_period, (s1 - s2).cwiseAbs().maxCoeff());
  }
  if (!(worst_period < 1e-12 * max_amp)) {
    pass = false;
    note += "periodicity; ";
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[224];
  std::snprintf(detail, sizeof(detail),
                "max|H(ffp)| %.1e, min eig %.2e, dL fd err %.1e, periodicity %.1e rel%s%s, %.0f s",
                worst_ffp, min_eig, worst_fd, worst_period / max_amp,
                note.empty() ? "" : ", ", note.c_str(), secs);
  report(4, "field and magnetization physics", pass && secs < 60.0, detail);
}

// ---------------------------------------------------------------------------
void criterion_5_illposedness() {
  const auto t0 = std::chrono::steady_clock::now();
  ScannerModel sc = desk_scanner();
  Grid3 grid = Grid3::centered({16, 16, 1}, {2e-3, 2e-3, 2e-3});
  SystemMatrix S = build_system_matrix(grid, sc.clock(), sc, 0);
  Eigen::MatrixXd A(S.n_rows, S.n_cols);
  for (int r = 0; r < S.n_rows; ++r)
    for (int j = 0; j < S.n_cols; ++j) A(r, j) = S.row(r)[j];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double ratio = sv[19] / sv[0];
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[128];
  std::snprintf(detail, sizeof(detail), "sigma20/sigma1 = %.2e (bound 1e-3), %.0f s", ratio,
                secs);
  report(5, "severe ill-posedness of the desk 2D system matrix",
         ratio < 1e-3 && secs < 60.0, detail);
}

// ---------------------------------------------------------------------------
struct SweepOutcome {
  double best_ssim = -2.0;
  double best_cov = 0.0;
  bool joint_monotone = true;
};

Config desk_config(const std::string& out_dir, double noise_level) {
  Config cfg = Config::load(std::string(DYNMPI_CONFIG_DIR) + "/desk2d.cfg");
  cfg.set("paths.out", out_dir);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", noise_level);
  cfg.set("noise.level", buf);
  return cfg;
}

SweepOutcome sweep_kaczmarz(const ProcessedData& in, const ImageSequence& truth) {
  SweepOutcome out;
  for (double lambda : {0.03, 0.3, 3.0, 30.0}) {
    ImageSequence recon = kaczmarz_series(in.matrix, in.data, lambda, 10, true);
    const double s = ssim(recon, truth).mean;
    if (s > out.best_ssim) {
      out.best_ssim = s;
      out.best_cov = mass_cov(recon, 0, recon.n_frames);
    }
  }
  return out;
}

SweepOutcome sweep_joint(const ProcessedData& in, const ImageSequence& truth,
                         MotionProblem::Model model, const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  SweepOutcome out;
  for (double alpha1 : {0.02, 0.08})
    for (double gamma : {0.01, 0.09}) {
      ReconProblem p = ex.recon;
      p.data_term = ReconProblem::DataTerm::l1;
      p.motion_model = model;
      p.alpha1 = alpha1;
      p.alpha2 = 0.005;
      p.gamma = gamma;
      MotionProblem mp = ex.motion;
      if (model == MotionProblem::Model::mass_conservation)
        mp.flow_regularizer = MotionProblem::FlowRegularizer::grad_l2;
      JointResult joint = alternate_joint(in.matrix, in.data, p, mp);
      for (std::size_t a = 1; a < joint.objective_per_alternation.size(); ++a)
        if (joint.objective_per_alternation[a] >
            joint.objective_per_alternation[a - 1] + 1e-12)
          out.joint_monotone = false;
      const double s = ssim(joint.images, truth).mean;
      if (s > out.best_ssim) {
        out.best_ssim = s;
        out.best_cov = mass_cov(joint.images, 0, joint.images.n_frames);
      }
    }
  return out;
}

void criteria_6_7_9_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string base = (fs::temp_directory_path() / "dynmpi_acceptance").string();

  std::map<double, SweepOutcome> kacz, of, mc;
  bool monotone_joint = true;
  for (double level : {0.0, 0.5, 1.0}) {
    const std::string out_dir = base + "_" + std::to_string(level);
    fs::remove_all(out_dir);
    Config cfg = desk_config(out_dir, level);
    cmd_calibrate(cfg);
    cmd_simulate(cfg);
    cmd_preprocess(cfg);
    ProcessedData in = load_processed(cfg);
    ImageSequence truth = load_truth(cfg);
    kacz[level] = sweep_kaczmarz(in, truth);
    of[level] = sweep_joint(in, truth, MotionProblem::Model::optical_flow, cfg);
    mc[level] = sweep_joint(in, truth, MotionProblem::Model::mass_conservation, cfg);
    monotone_joint = monotone_joint && of[level].joint_monotone && mc[level].joint_monotone;
  }

  const double margin_of = of[0.5].best_ssim - kacz[0.5].best_ssim;
  const double margin_mc = mc[0.5].best_ssim - kacz[0.5].best_ssim;
  auto non_increasing = [](std::map<double, SweepOutcome>& m) {
    return m[0.0].best_ssim + 1e-9 >= m[0.5].best_ssim &&
           m[0.5].best_ssim + 1e-9 >= m[1.0].best_ssim;
  };
  const bool trend = non_increasing(kacz) && non_increasing(of) && non_increasing(mc);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "ssim at 0.5: K %.3f OF %.3f MC %.3f (margins +%.3f/+%.3f >= 0.05); "
                "levels K %.3f/%.3f/%.3f OF %.3f/%.3f/%.3f MC %.3f/%.3f/%.3f, %.0f s",
                kacz[0.5].best_ssim, of[0.5].best_ssim, mc[0.5].best_ssim, margin_of,
                margin_mc, kacz[0.0].best_ssim, kacz[0.5].best_ssim, kacz[1.0].best_ssim,
                of[0.0].best_ssim, of[0.5].best_ssim, of[1.0].best_ssim, mc[0.0].best_ssim,
                mc[0.5].best_ssim, mc[1.0].best_ssim, secs);
  report(6, "desk-scale SSIM ordering and noise trend",
         margin_of >= 0.05 && margin_mc >= 0.05 && trend && secs < 600.0, detail);

  char detail7[128];
  std::snprintf(detail7, sizeof(detail7), "mass CoV: MC-L1 %.3f <= Kaczmarz %.3f",
                mc[0.5].best_cov, kacz[0.5].best_cov);
  report(7, "mass-conservation CoV ordering", mc[0.5].best_cov <= kacz[0.5].best_cov, detail7);

  report(9, "alternating objective non-increasing over 3 alternations", monotone_joint,
         monotone_joint ? "all joint runs monotone" : "an objective trace increased");
}

// ---------------------------------------------------------------------------
void criterion_8_motion_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string note;

  // rigid translation of a smooth blob at 1 voxel/frame
  Grid3 grid = Grid3::centered({32, 32, 1}, {1e-3, 1e-3, 1e-3});
  ImageSequence c(grid, 4);
  for (int k = 0; k < 4; ++k)
    for (int x = 0; x < 32; ++x)
      for (int y = 0; y < 32; ++y) {
        const double rx = x - (14.0 + k), ry = y - 16.0;
        c.frame(k)[grid.index(x, y, 0)] = std::exp(-(rx * rx + ry * ry) / (2 * 2.5 * 2.5));
      }
  MotionProblem p;
  p.model = MotionProblem::Model::optical_flow;
  p.flow_regularizer = MotionProblem::FlowRegularizer::tv_l1;
  p.beta = 0.3;
  p.gamma = 10.0;
  p.solver.max_iters = 250;
  FlowField v = estimate_motion_of(c, p);
  double worst_dev = 0.0;
  const std::size_t n = grid.n_voxels();
  for (int k = 0; k < 3; ++k) {
    double wx = 0, wy = 0, mass = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = c.frame(k)[j];
      if (w < 0.2) continue;
      wx += w * v.step_component(k, 0)[j];
      wy += w * v.step_component(k, 1)[j];
      mass += w;
    }
    worst_dev = std::max({worst_dev, std::abs(wx / mass - 1.0), std::abs(wy / mass)});
  }
  if (worst_dev >= 0.25) {
    pass = false;
    note += "translation; ";
  }

  // rotating rod: estimated flow must trace a circle of the right radius
  Grid3 desk = Grid3::centered({16, 16, 1}, {2e-3, 2e-3, 2e-3});
  PhantomSpec spec;
  spec.kind = PhantomSpec::Kind::rotating_rod;
  spec.circle_diameter = 11.5e-3;
  spec.rod_width = 8e-3;
  spec.angular_speed = 0.25;
  RenderedPhantom ph = render_phantom(spec, desk, 13);
  FlowField flow = estimate_motion_of(ph.images, p);
  Trajectory traj = extract_trajectory(ph.images, flow, 0, 13);
  CircleFit fit = fit_circle(traj.points);
  const double want = 0.5 * spec.circle_diameter;
  const double radius_err = std::abs(fit.radius - want) / want;
  if (radius_err >= 0.15) {
    pass = false;
    note += "radius; ";
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "translation dev %.3f vox (tol 0.25), radius %.2f mm vs %.2f mm (err %.1f%%)%s%s, %.0f s",
                worst_dev, fit.radius * 1e3, want * 1e3, 100 * radius_err,
                note.empty() ? "" : ", ", note.c_str(), secs);
  report(8, "motion estimation accuracy", pass && secs < 180.0, detail);
}

}  // namespace

int main() {
  std::printf("dynmpi acceptance suite\n");
  criterion_1_adjoints();
  criterion_2_prox_oracles();
  criterion_3_solvers();
  criterion_4_physics();
  criterion_5_illposedness();
  criteria_6_7_9_pipeline();
  criterion_8_motion_accuracy();
  std::printf("%s (%d failure%s)\n", failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT",
              failures, failures == 1 ? "" : "s");
  return failures == 0 ? 0 : 1;
}
