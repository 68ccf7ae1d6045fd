#ifndef DYNMPI_ACQUISITION_HPP
#define DYNMPI_ACQUISITION_HPP

#include <cstdint>
#include <vector>

#include "dynmpi/core.hpp"
#include "dynmpi/scanner.hpp"

namespace dynmpi {

struct NoiseModel {
  enum class Kind { gaussian_time_domain } kind = Kind::gaussian_time_domain;
  double level = 0.0;        // fraction of max |signal|
  std::uint64_t seed = 0;

  NoiseModel() = default;
  NoiseModel(double level_, std::uint64_t seed_);
};

/// Quasi-static forward simulation: frame k of the phantom is held fixed
/// while t sweeps one full drive-field cycle, u_k[(i,j)] = sum_x s_i(x,t_j)
/// c(x,t_k) w. Equals the fine-grid system matrix applied to each frame.
MeasurementSeries simulate_dynamic_signal(const ImageSequence& phantom,
                                          const ScannerModel& scanner, const CycleClock& clock,
                                          int parallelism_hint = 0);

/// u + eps, eps ~ N(0, (level * max|u|)^2) i.i.d. per sample from the
/// counter-based generator; bit-reproducible per seed.
MeasurementSeries add_noise(const MeasurementSeries& u, const NoiseModel& noise);

/// Sub-frame window: keep samples [start, start+length) of every channel's
/// cycle in every frame (time-domain series only).
MeasurementSeries select_window(const MeasurementSeries& u, const CycleClock& clock,
                                int n_channels, int start, int length);

/// Reporting-only diagnostic: magnitude of the signal contribution of the
/// neglected dc/dt term relative to the simulated signal, per frame step.
/// Uses the forward difference (c_{k+1}-c_k)/T_R against mu0 R^T m_bar.
std::vector<double> neglected_term_ratio(const ImageSequence& phantom,
                                         const ScannerModel& scanner, const CycleClock& clock,
                                         const MeasurementSeries& signal);

}  // namespace dynmpi

#endif
