#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynmpi/optim.hpp"
#include "dynmpi/rng.hpp"

using namespace dynmpi;

namespace {

// brute-force prox oracle: coarse grid plus two refinement passes
double grid_search_1d(const std::function<double(double)>& objective, double lo, double hi) {
  double best_x = lo, best = objective(lo);
  for (int pass = 0; pass < 3; ++pass) {
    const double step = (hi - lo) / 400.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = lo + i * step;
      const double v = objective(x);
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

}  // namespace

TEST_CASE("prox_l1 matches the stated example and the grid-search oracle") {
  std::vector<double> x = {2.0, -0.3};
  prox_l1(x.data(), 2, 0.5);
  CHECK(x[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(x[1] == 0.0);

  rng::Stream rs(5);
  for (int i = 0; i < 50; ++i) {
    const double v = rs.next_uniform(-3, 3);
    const double t = rs.next_uniform(0, 2);
    double got = v;
    prox_l1(&got, 1, t);
    const double oracle =
        grid_search_1d([&](double u) { return t * std::abs(u) + 0.5 * (u - v) * (u - v); },
                       -4.0, 4.0);
    CHECK(std::abs(got - oracle) < 1e-4);
  }
}

TEST_CASE("prox_l1 is odd and reduces to the identity at zero weight") {
  std::vector<double> x = {1.5, -2.0, 0.2};
  std::vector<double> y = x;
  prox_l1(y.data(), y.size(), 0.0);
  CHECK(y == x);
  std::vector<double> neg = {-1.5, 2.0, -0.2};
  prox_l1(x.data(), x.size(), 0.7);
  prox_l1(neg.data(), neg.size(), 0.7);
  for (int i = 0; i < 3; ++i) CHECK(x[i] == -neg[i]);
}

TEST_CASE("scalar linf projection clamps") {
  std::vector<double> y = {5.0, -0.5, 1.0};
  project_linf_ball_scalar(y.data(), y.size(), 2.0);
  CHECK(y == std::vector<double>{2.0, -0.5, 1.0});

  rng::Stream rs(7);
  for (int i = 0; i < 50; ++i) {
    const double v = rs.next_uniform(-5, 5);
    const double r = rs.next_uniform(0.1, 3.0);
    double got = v;
    project_linf_ball_scalar(&got, 1, r);
    const double oracle = grid_search_1d(
        [&](double u) {
          return std::abs(u) <= r ? 0.5 * (u - v) * (u - v) : 1e9 + u * u;
        },
        -r, r);
    CHECK(std::abs(got - oracle) < 1e-4);
  }
}

TEST_CASE("per-voxel vector projection rescales to the ball") {
  // layout (comp, voxel): vectors (3,4) and (0.3,0.4)
  std::vector<double> y = {3.0, 0.3, 4.0, 0.4, 0.0, 0.0};
  project_linf_ball_voxel_vectors(y.data(), 2, 3, 1.0);
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(y[2] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(0.3).epsilon(1e-12));  // inside, untouched
  CHECK(y[3] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("l2-squared dual prox against the closed form and its limits") {
  std::vector<double> y = {2.0};
  prox_l2_squared_dual(y.data(), 1, 1.0, 1.0);  // sigma/beta = 1
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
  y = {0.0};
  prox_l2_squared_dual(y.data(), 1, 0.3, 2.0);
  CHECK(y[0] == 0.0);
  y = {1.7};
  prox_l2_squared_dual(y.data(), 1, 1.0, 1e12);
  CHECK(y[0] == doctest::Approx(1.7).epsilon(1e-11));

  rng::Stream rs(11);
  for (int i = 0; i < 50; ++i) {
    const double v = rs.next_uniform(-3, 3);
    const double sigma = rs.next_uniform(0.1, 2.0);
    const double beta = rs.next_uniform(0.1, 2.0);
    double got = v;
    prox_l2_squared_dual(&got, 1, sigma, beta);
    const double oracle = grid_search_1d(
        [&](double u) { return sigma / (2 * beta) * u * u + 0.5 * (u - v) * (u - v); }, -4, 4);
    CHECK(std::abs(got - oracle) < 1e-4);
  }
}

TEST_CASE("translated linf indicator prox") {
  std::vector<double> y = {0.0};
  double b = 5.0;
  prox_translated_linf_indicator(y.data(), 1, 1.0, 2.0, &b);
  CHECK(y[0] == 2.0);

  // b = 0 reduces to a plain clamp
  y = {-3.0};
  b = 0.0;
  prox_translated_linf_indicator(y.data(), 1, 0.7, 1.5, &b);
  CHECK(y[0] == -1.5);

  // idempotent on feasible shifted points
  y = {0.4};
  b = 0.1;
  prox_translated_linf_indicator(y.data(), 1, 1.0, 2.0, &b);
  const double once = y[0];
  b = 0.0;
  prox_translated_linf_indicator(y.data(), 1, 1.0, 2.0, &b);
  CHECK(y[0] == once);

  rng::Stream rs(13);
  for (int i = 0; i < 50; ++i) {
    const double v = rs.next_uniform(-3, 3);
    const double sigma = rs.next_uniform(0.1, 2.0);
    const double gamma = rs.next_uniform(0.2, 2.0);
    const double shift = rs.next_uniform(-2, 2);
    double got = v;
    prox_translated_linf_indicator(&got, 1, sigma, gamma, &shift);
    const double oracle = grid_search_1d(
        [&](double u) {
          if (std::abs(u) > gamma) return 1e9 + u * u;
          return -sigma * shift * u + 0.5 * (u - v) * (u - v);
        },
        -gamma, gamma);
    CHECK(std::abs(got - oracle) < 1e-4);
  }
}

TEST_CASE("moreau decomposition of the l1 prox") {
  rng::Stream rs(17);
  const double lambda = 0.8;
  for (int i = 0; i < 50; ++i) {
    const double x = rs.next_uniform(-4, 4);
    const double tau = rs.next_uniform(0.1, 3.0);
    double p = x;
    prox_l1(&p, 1, lambda * tau);
    double q = x / tau;
    project_linf_ball_scalar(&q, 1, lambda);  // prox of f*/tau at x/tau
    CHECK(p + tau * q == doctest::Approx(x).epsilon(1e-10));
  }
}

TEST_CASE("operator norm estimates") {
  CHECK(estimate_operator_norm(make_identity_op(5), 40, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(estimate_operator_norm(make_zero_op(4, 3), 10, 1) == 0.0);
  LinOp diag = make_dense_op({3, 0, 0, 1}, 2, 2);
  CHECK(estimate_operator_norm(diag, 80, 1) == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("composite operators run the adjoint self-test") {
  LinOp broken;
  broken.in_dim = 2;
  broken.out_dim = 2;
  broken.apply = [](const double* x, double* y) {
    y[0] = x[0] + x[1];
    y[1] = x[1];
  };
  broken.apply_adjoint = [](const double* y, double* x) {
    x[0] = y[0];
    x[1] = y[1];  // wrong: misses the off-diagonal term
  };
  CHECK_THROWS_WITH_AS(make_vstack_op({broken}), doctest::Contains("adjoint"),
                       std::runtime_error);
  CHECK_NOTHROW(make_vstack_op({make_identity_op(3), make_identity_op(3)}));
}

TEST_CASE("pdhg fixed point with zero operator and zero dual") {
  LinOp B = make_zero_op(3, 2);
  PdhgParams params;
  params.max_iters = 50;
  std::vector<double> x0 = {1.0, -2.0, 0.5};
  auto x = pdhg(B, make_prox_identity(), make_prox_zero_indicator(), params, x0,
                std::vector<double>(2, 0.0));
  CHECK(x == x0);
}

TEST_CASE("pdhg solves the 1-d lasso to the soft threshold") {
  // min lambda |x| + 0.5 (x - b)^2 : f quadratic, g = lambda |.| via B = I
  const double lambda = 0.7, b = 2.3;
  LinOp B = make_identity_op(1);
  ProxFn prox_f{"quad", [b](std::vector<double>& x, double tau) {
                  x[0] = (x[0] + tau * b) / (1.0 + tau);
                }};
  ProxFn prox_gstar{"linf", [lambda](std::vector<double>& y, double) {
                      project_linf_ball_scalar(y.data(), 1, lambda);
                    }};
  PdhgParams params;
  params.max_iters = 1000;
  auto x = pdhg(B, prox_f, prox_gstar, params, {0.0}, {0.0});
  CHECK(x[0] == doctest::Approx(b - lambda).epsilon(1e-6));
}

namespace {

struct TvProblem {
  std::vector<double> data;
  Grid3 grid{{32, 1, 1}, {1, 1, 1}, {0, 0, 0}};
  double lambda = 0.4;

  TvProblem() {
    data.assign(32, 0.0);
    rng::Stream rs(3);
    for (int i = 0; i < 32; ++i) data[i] = (i < 16 ? 0.0 : 1.0) + 0.15 * rs.next_gaussian();
  }

  double objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (int i = 0; i < 32; ++i) v += 0.5 * (x[i] - data[i]) * (x[i] - data[i]);
    for (int i = 0; i + 1 < 32; ++i) v += lambda * std::abs(x[i + 1] - x[i]);
    return v;
  }

  std::vector<double> solve(int iters, SolveDiagnostics* diag = nullptr) const {
    LinOp B = make_grad_forward_op(grid);
    ProxFn prox_f{"quad", [this](std::vector<double>& x, double tau) {
                    for (int i = 0; i < 32; ++i) x[i] = (x[i] + tau * data[i]) / (1.0 + tau);
                  }};
    ProxFn prox_gstar{"linf", [this](std::vector<double>& y, double) {
                        project_linf_ball_scalar(y.data(), y.size(), lambda);
                      }};
    PdhgParams params;
    params.max_iters = iters;
    params.trace_every = 10;
    return pdhg(B, prox_f, prox_gstar, params, std::vector<double>(32, 0.0),
                std::vector<double>(B.out_dim, 0.0),
                [this](const std::vector<double>& x) { return objective(x); }, diag);
  }
};

}  // namespace

TEST_CASE("pdhg tv denoising matches a long-run reference objective") {
  TvProblem problem;
  const double reference = problem.objective(problem.solve(100000));
  SolveDiagnostics diag;
  auto x = problem.solve(3000, &diag);
  CHECK(problem.objective(x) == doctest::Approx(reference).epsilon(1e-4));

  // best-so-far value of the recorded trace never increases
  double best = diag.objective_trace.front();
  for (double v : diag.objective_trace) {
    CHECK(std::min(best, v) <= best);
    best = std::min(best, v);
  }
  CHECK(diag.objective_trace.back() <= diag.objective_trace.front());
}

TEST_CASE("pdhg aborts on non-finite iterates with the iteration index") {
  LinOp B = make_identity_op(2);
  int count = 0;
  ProxFn prox_f{"poison", [&count](std::vector<double>& x, double) {
                  if (++count == 3) x[0] = std::numeric_limits<double>::quiet_NaN();
                }};
  PdhgParams params;
  params.max_iters = 10;
  CHECK_THROWS_WITH_AS(pdhg(B, prox_f, make_prox_identity(), params, {1.0, 1.0}, {0.0, 0.0}),
                       doctest::Contains("iteration 3"), std::runtime_error);
}

namespace {

// small lasso: min 0.5 ||A x - b||^2 + lambda ||x||_1 shared by SPDHG tests
struct LassoProblem {
  std::vector<double> A = {1.0, 0.3, -0.2, 0.8, 0.5, -0.7, 0.1, 0.9,
                           -0.4, 0.2, 0.6, -0.1};  // 4x3
  std::vector<double> b = {1.0, -0.5, 0.7, 0.2};
  double lambda = 0.1;

  double objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (int r = 0; r < 4; ++r) {
      double res = -b[r];
      for (int j = 0; j < 3; ++j) res += A[r * 3 + j] * x[j];
      v += 0.5 * res * res;
    }
    for (double xi : x) v += lambda * std::abs(xi);
    return v;
  }

  SpdhgBlocks blocks(int batches) const {
    SpdhgBlocks out;
    out.data_batch_count = batches;
    const int rows_per = 4 / batches;
    for (int m = 0; m < batches; ++m) {
      std::vector<double> sub(A.begin() + m * rows_per * 3,
                              A.begin() + (m + 1) * rows_per * 3);
      out.ops.push_back(make_dense_op(std::move(sub), rows_per, 3));
      std::vector<double> bm(b.begin() + m * rows_per, b.begin() + (m + 1) * rows_per);
      out.prox_gstar.push_back({"l2-dual", [bm](std::vector<double>& y, double sigma) {
                                  for (std::size_t i = 0; i < y.size(); ++i)
                                    y[i] = (y[i] - sigma * bm[i]) / (1.0 + sigma);
                                }});
    }
    return out;
  }
};

}  // namespace

TEST_CASE("spdhg with one block reproduces pdhg bit for bit") {
  LassoProblem lasso;
  PdhgParams params;
  params.max_iters = 400;
  params.seed = 42;

  LinOp A = make_dense_op(lasso.A, 4, 3);
  ProxFn data_prox{"l2-dual", [&lasso](std::vector<double>& y, double sigma) {
                     for (int i = 0; i < 4; ++i)
                       y[i] = (y[i] - sigma * lasso.b[i]) / (1.0 + sigma);
                   }};
  auto x_pdhg = pdhg(A, make_prox_l1(lasso.lambda), data_prox, params,
                     std::vector<double>(3, 0.0), std::vector<double>(4, 0.0));

  SpdhgBlocks blocks = lasso.blocks(1);
  auto x_spdhg = spdhg(blocks, make_prox_l1(lasso.lambda), params, std::vector<double>(3, 0.0),
                       {std::vector<double>(4, 0.0)});
  CHECK(x_pdhg == x_spdhg);
}

TEST_CASE("spdhg is bit-reproducible per seed") {
  LassoProblem lasso;
  PdhgParams params;
  params.max_iters = 500;
  params.seed = 7;
  auto a = spdhg(lasso.blocks(2), make_prox_l1(lasso.lambda), params,
                 std::vector<double>(3, 0.0),
                 {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
  auto b = spdhg(lasso.blocks(2), make_prox_l1(lasso.lambda), params,
                 std::vector<double>(3, 0.0),
                 {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
  CHECK(a == b);
  params.seed = 8;
  auto c = spdhg(lasso.blocks(2), make_prox_l1(lasso.lambda), params,
                 std::vector<double>(3, 0.0),
                 {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
  CHECK(a != c);
}

TEST_CASE("spdhg reaches the pdhg long-run objective on the small lasso") {
  LassoProblem lasso;
  PdhgParams long_run;
  long_run.max_iters = 200000;
  LinOp A = make_dense_op(lasso.A, 4, 3);
  ProxFn data_prox{"l2-dual", [&lasso](std::vector<double>& y, double sigma) {
                     for (int i = 0; i < 4; ++i)
                       y[i] = (y[i] - sigma * lasso.b[i]) / (1.0 + sigma);
                   }};
  const auto x_ref = pdhg(A, make_prox_l1(lasso.lambda), data_prox, long_run,
                          std::vector<double>(3, 0.0), std::vector<double>(4, 0.0));
  const double ref = lasso.objective(x_ref);

  PdhgParams params;
  params.max_iters = 20000;
  params.seed = 3;
  auto x = spdhg(lasso.blocks(2), make_prox_l1(lasso.lambda), params,
                 std::vector<double>(3, 0.0),
                 {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
  CHECK(lasso.objective(x) == doctest::Approx(ref).epsilon(1e-3));
}

TEST_CASE("averaging spdhg iterates over 32 seeds matches the pdhg solution") {
  LassoProblem lasso;
  PdhgParams long_run;
  long_run.max_iters = 200000;
  LinOp A = make_dense_op(lasso.A, 4, 3);
  ProxFn data_prox{"l2-dual", [&lasso](std::vector<double>& y, double sigma) {
                     for (int i = 0; i < 4; ++i)
                       y[i] = (y[i] - sigma * lasso.b[i]) / (1.0 + sigma);
                   }};
  const auto x_ref = pdhg(A, make_prox_l1(lasso.lambda), data_prox, long_run,
                          std::vector<double>(3, 0.0), std::vector<double>(4, 0.0));

  std::vector<double> mean(3, 0.0);
  for (int seed = 0; seed < 32; ++seed) {
    PdhgParams params;
    params.max_iters = 30000;
    params.seed = seed;
    auto x = spdhg(lasso.blocks(2), make_prox_l1(lasso.lambda), params,
                   std::vector<double>(3, 0.0),
                   {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)});
    for (int j = 0; j < 3; ++j) mean[j] += x[j] / 32.0;
  }
  for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - x_ref[j]) < 1e-3);
}

TEST_CASE("forward differences, divergence, and their adjoint identity") {
  Grid3 grid({4, 3, 2}, {1, 1, 1}, {0, 0, 0});
  const std::size_t n = grid.n_voxels();

  std::vector<double> constant(n, 5.0), g(3 * n);
  grad_forward(constant.data(), grid, g.data());
  for (double v : g) CHECK(v == 0.0);

  // linear ramp u = x index: gradient (1,0,0) in the interior
  std::vector<double> ramp(n);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 2; ++z) ramp[grid.index(x, y, z)] = x;
  grad_forward(ramp.data(), grid, g.data());
  for (int x = 0; x < 3; ++x) CHECK(g[grid.index(x, 1, 1)] == 1.0);
  CHECK(g[grid.index(3, 1, 1)] == 0.0);  // Neumann

  rng::Stream rs(19);
  std::vector<double> u(n), p(3 * n), gu(3 * n), divp(n);
  for (auto& v : u) v = rs.next_gaussian();
  for (auto& v : p) v = rs.next_gaussian();
  grad_forward(u.data(), grid, gu.data());
  div_backward(p.data(), grid, divp.data());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < 3 * n; ++i) lhs += gu[i] * p[i];
  for (std::size_t i = 0; i < n; ++i) rhs -= u[i] * divp[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("central differences: stencil, skew adjoint, quadratic profile") {
  Grid3 grid({8, 1, 1}, {1, 1, 1}, {0, 0, 0});
  std::vector<double> u(8), d(8);
  for (int i = 0; i < 8; ++i) u[i] = i * i;
  central_diff_axis(u.data(), grid, 0, d.data());
  for (int i = 1; i < 7; ++i) CHECK(d[i] == doctest::Approx(2.0 * i).epsilon(1e-14));

  rng::Stream rs(23);
  Grid3 g3({5, 4, 3}, {1, 1, 1}, {0, 0, 0});
  const std::size_t n = g3.n_voxels();
  std::vector<double> a(n), b(n), da(n), adj(n);
  for (auto& v : a) v = rs.next_gaussian();
  for (auto& v : b) v = rs.next_gaussian();
  for (int axis = 0; axis < 3; ++axis) {
    central_diff_axis(a.data(), g3, axis, da.data());
    central_diff_axis_adjoint(b.data(), g3, axis, adj.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lhs += da[i] * b[i];
      rhs += a[i] * adj[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("temporal forward difference") {
  Grid3 grid({2, 2, 1}, {1, 1, 1}, {0, 0, 0});
  ImageSequence c(grid, 3);
  for (int k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 4; ++j) c.frame(k)[j] = k * k;  // frames 0,1,4
  auto dt = dt_forward(c);
  REQUIRE(dt.size() == 8);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(dt[j] == 1.0);
    CHECK(dt[4 + j] == 3.0);
  }

  ImageSequence constant(grid, 4);
  for (auto& v : constant.data) v = 2.0;
  for (double v : dt_forward(constant)) CHECK(v == 0.0);
}
