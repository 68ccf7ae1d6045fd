#ifndef DYNMPI_ANALYSIS_HPP
#define DYNMPI_ANALYSIS_HPP

#include <Eigen/Dense>
#include <vector>

#include "dynmpi/core.hpp"

namespace dynmpi {

struct SsimResult {
  double mean = 0.0;
  std::vector<double> per_frame;
};

/// Mean 3D SSIM over frames with a uniform cubic window (clamped per axis to
/// the grid), dynamic range L = max(truth) - min(truth), constants (k1 L)^2
/// and (k2 L)^2.
SsimResult ssim(const ImageSequence& recon, const ImageSequence& truth, int window = 7,
                double k1 = 0.01, double k2 = 0.03);

/// Coefficient of variation (population std / mean) of the per-frame total
/// mass over frames [first, last).
double mass_cov(const ImageSequence& c, int first_frame, int last_frame);

struct Trajectory {
  std::vector<Eigen::Vector3d> points;    // piecewise linear, meters
  std::vector<Eigen::Vector3d> smoothed;  // degree-4 polynomial fit per axis
};

/// Seed at the intensity centroid of the start frame, then follow the flow:
/// p_{k+1} = p_k + v_k(p_k) (trilinearly sampled, converted to meters).
Trajectory extract_trajectory(const ImageSequence& c, const FlowField& v, int start_frame,
                              int end_frame);

struct CircleFit {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
  double rms_residual = 0.0;
};

/// Algebraic least-squares circle in the dominant PCA plane of the path.
CircleFit fit_circle(const std::vector<Eigen::Vector3d>& path);

}  // namespace dynmpi

#endif
