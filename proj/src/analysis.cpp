#include "dynmpi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynmpi {

SsimResult ssim(const ImageSequence& recon, const ImageSequence& truth, int window, double k1,
                double k2) {
  if (recon.n_frames != truth.n_frames || !(recon.grid == truth.grid))
    throw std::invalid_argument("ssim: shape mismatch");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("ssim: window must be a positive odd integer");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("ssim: k1, k2 must be > 0");

  // joint dynamic range keeps ssim(a,b) == ssim(b,a); it equals the truth
  // range whenever the reconstruction stays inside it
  double tmin = truth.data[0], tmax = truth.data[0];
  for (double x : truth.data) {
    tmin = std::min(tmin, x);
    tmax = std::max(tmax, x);
  }
  for (double x : recon.data) {
    tmin = std::min(tmin, x);
    tmax = std::max(tmax, x);
  }
  const double range = std::max(tmax - tmin, 1e-300);
  const double c1 = (k1 * range) * (k1 * range);
  const double c2 = (k2 * range) * (k2 * range);

  const Grid3& g = recon.grid;
  std::array<int, 3> win{};
  for (int a = 0; a < 3; ++a) win[a] = std::min(window, g.dims[a]);
  const double count = static_cast<double>(win[0]) * win[1] * win[2];

  SsimResult result;
  result.per_frame.resize(recon.n_frames);
  for (int t = 0; t < recon.n_frames; ++t) {
    const double* a = recon.frame(t);
    const double* b = truth.frame(t);
    double acc = 0.0;
    long windows = 0;
    for (int x0 = 0; x0 + win[0] <= g.dims[0]; ++x0)
      for (int y0 = 0; y0 + win[1] <= g.dims[1]; ++y0)
        for (int z0 = 0; z0 + win[2] <= g.dims[2]; ++z0) {
          double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
          for (int x = x0; x < x0 + win[0]; ++x)
            for (int y = y0; y < y0 + win[1]; ++y)
              for (int z = z0; z < z0 + win[2]; ++z) {
                const double va = a[g.index(x, y, z)];
                const double vb = b[g.index(x, y, z)];
                sa += va;
                sb += vb;
                saa += va * va;
                sbb += vb * vb;
                sab += va * vb;
              }
          const double mua = sa / count, mub = sb / count;
          const double vara = saa / count - mua * mua;
          const double varb = sbb / count - mub * mub;
          const double cov = sab / count - mua * mub;
          acc += ((2 * mua * mub + c1) * (2 * cov + c2)) /
                 ((mua * mua + mub * mub + c1) * (vara + varb + c2));
          ++windows;
        }
    result.per_frame[t] = acc / windows;
    result.mean += result.per_frame[t];
  }
  result.mean /= recon.n_frames;
  return result;
}

double mass_cov(const ImageSequence& c, int first_frame, int last_frame) {
  if (first_frame < 0 || last_frame > c.n_frames || last_frame - first_frame < 1)
    throw std::invalid_argument("mass_cov: invalid frame range");
  const std::size_t n = c.grid.n_voxels();
  std::vector<double> mass;
  for (int t = first_frame; t < last_frame; ++t) {
    const double* f = c.frame(t);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += f[j];
    mass.push_back(s);
  }
  double mean = 0.0;
  for (double m : mass) mean += m;
  mean /= mass.size();
  if (!(mean > 0.0)) throw std::invalid_argument("mass_cov: mean mass must be > 0");
  double var = 0.0;
  for (double m : mass) var += (m - mean) * (m - mean);
  var /= mass.size();  // population variance
  return std::sqrt(var) / mean;
}

namespace {

Eigen::Vector3d sample_flow(const FlowField& v, int step, const Eigen::Vector3d& vox) {
  const Grid3& g = v.grid;
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c)
    out[c] = trilinear_sample(v.step_component(step, c), g.dims, vox[0], vox[1], vox[2]);
  return out;
}

// Degree-4 least squares per coordinate, on the index scaled to [-1, 1].
std::vector<Eigen::Vector3d> smooth_degree4(const std::vector<Eigen::Vector3d>& pts) {
  const int n = static_cast<int>(pts.size());
  const int degree = std::min(4, n - 1);
  Eigen::MatrixXd V(n, degree + 1);
  for (int i = 0; i < n; ++i) {
    const double t = n > 1 ? -1.0 + 2.0 * i / (n - 1) : 0.0;
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      V(i, d) = p;
      p *= t;
    }
  }
  std::vector<Eigen::Vector3d> out(n);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = pts[i][c];
    const Eigen::VectorXd coef = V.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd fit = V * coef;
    for (int i = 0; i < n; ++i) out[i][c] = fit[i];
  }
  return out;
}

}  // namespace

Trajectory extract_trajectory(const ImageSequence& c, const FlowField& v, int start_frame,
                              int end_frame) {
  if (start_frame < 0 || end_frame > c.n_frames || end_frame - start_frame < 1)
    throw std::invalid_argument("extract_trajectory: invalid frame range");
  if (v.n_steps != c.n_frames - 1)
    throw std::invalid_argument("extract_trajectory: flow/sequence mismatch");
  const Grid3& g = c.grid;

  const double* f = c.frame(start_frame);
  double mass = 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int x = 0; x < g.dims[0]; ++x)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int z = 0; z < g.dims[2]; ++z) {
        const double w = f[g.index(x, y, z)];
        if (w <= 0.0) continue;
        mass += w;
        centroid += w * Eigen::Vector3d(x, y, z);
      }
  if (!(mass > 0.0))
    throw std::invalid_argument("extract_trajectory: start frame has no concentration");
  centroid /= mass;

  auto in_bounds = [&](const Eigen::Vector3d& vox) {
    for (int a = 0; a < 3; ++a)
      if (vox[a] < -0.5 || vox[a] > g.dims[a] - 0.5) return false;
    return true;
  };
  auto to_meters = [&](const Eigen::Vector3d& vox) {
    return Eigen::Vector3d(g.origin[0] + vox[0] * g.voxel_size[0],
                           g.origin[1] + vox[1] * g.voxel_size[1],
                           g.origin[2] + vox[2] * g.voxel_size[2]);
  };

  Trajectory traj;
  Eigen::Vector3d pos = centroid;
  traj.points.push_back(to_meters(pos));
  for (int k = start_frame; k < end_frame - 1; ++k) {
    pos += sample_flow(v, k, pos);
    if (!in_bounds(pos))
      throw std::runtime_error("extract_trajectory: path leaves the grid at frame " +
                               std::to_string(k + 1));
    traj.points.push_back(to_meters(pos));
  }
  traj.smoothed = smooth_degree4(traj.points);
  return traj;
}

CircleFit fit_circle(const std::vector<Eigen::Vector3d>& path) {
  const int n = static_cast<int>(path.size());
  if (n < 3) throw std::invalid_argument("fit_circle: needs at least 3 points");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : path) centroid += p;
  centroid /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : path) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  // eigenvalues ascending: plane basis = two largest
  const Eigen::Vector3d e1 = es.eigenvectors().col(2);
  const Eigen::Vector3d e2 = es.eigenvectors().col(1);
  if (es.eigenvalues()[1] <= 1e-12 * std::max(es.eigenvalues()[2], 1e-300))
    throw std::invalid_argument("fit_circle: points are collinear");

  // Kasa fit in plane coordinates: ||q||^2 = 2 a.q + rho
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d d = path[i] - centroid;
    const double q1 = d.dot(e1), q2 = d.dot(e2);
    A(i, 0) = 2 * q1;
    A(i, 1) = 2 * q2;
    A(i, 2) = 1.0;
    rhs[i] = q1 * q1 + q2 * q2;
  }
  const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(rhs);
  const double radius = std::sqrt(std::max(0.0, sol[2] + sol[0] * sol[0] + sol[1] * sol[1]));

  CircleFit fit;
  fit.center = centroid + sol[0] * e1 + sol[1] * e2;
  fit.radius = radius;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d d = path[i] - centroid;
    const double q1 = d.dot(e1) - sol[0], q2 = d.dot(e2) - sol[1];
    const double r = std::hypot(q1, q2) - radius;
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

}  // namespace dynmpi
