#ifndef DYNMPI_PREPROCESSING_HPP
#define DYNMPI_PREPROCESSING_HPP

#include <complex>
#include <string>
#include <vector>

#include "dynmpi/core.hpp"
#include "dynmpi/scanner.hpp"

namespace dynmpi {

/// Which DFT bins of which receive channel survive preprocessing.
struct FrequencySelection {
  enum class Mode { snr_threshold, mixing_order, band_only } mode = Mode::mixing_order;
  double snr_threshold = 5.0;
  int max_mixing_order = 4;
  double min_frequency = 0.0;  // Hz; bins strictly below are always dropped
  std::vector<std::vector<int>> selected_indices;  // per channel, strictly increasing
};

/// One-sided spectra of a measurement series: (n_frames, n_channels, n_bins).
struct SpectralSeries {
  int n_frames = 0;
  int n_channels = 0;
  int n_bins = 0;  // floor(N/2)+1
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int frame, int channel, int bin) {
    return data[(static_cast<std::size_t>(frame) * n_channels + channel) * n_bins + bin];
  }
  const std::complex<double>& at(int frame, int channel, int bin) const {
    return data[(static_cast<std::size_t>(frame) * n_channels + channel) * n_bins + bin];
  }
};

/// One-sided spectra of the system-matrix columns: (n_channels, n_bins, n_cols).
struct SpectralMatrix {
  Grid3 grid;
  int n_channels = 0;
  int n_bins = 0;
  int n_cols = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int channel, int bin, int col) {
    return data[(static_cast<std::size_t>(channel) * n_bins + bin) * n_cols + col];
  }
  const std::complex<double>& at(int channel, int bin, int col) const {
    return data[(static_cast<std::size_t>(channel) * n_bins + bin) * n_cols + col];
  }
};

/// One-sided DFT with the convention u_hat[k] = sum_j u[j] exp(-2 pi i k j / N).
std::vector<std::complex<double>> to_frequency_domain(const std::vector<double>& u_time);

SpectralSeries series_to_frequency_domain(const MeasurementSeries& u, int n_channels,
                                          const CycleClock& clock);
SpectralMatrix matrix_to_frequency_domain(const SystemMatrix& S, int n_channels,
                                          const CycleClock& clock);

/// Per-(channel,bin) SNR for simulated data: |clean spectrum| averaged over
/// frames divided by noise_std * sqrt(N/2).
std::vector<std::vector<double>> estimate_snr(const SpectralSeries& clean, double noise_std,
                                              int samples_per_cycle);

/// Resolve the kept bins per channel. Mixing order keeps |n1 N/d1 + n2 N/d2 +
/// n3 N/d3| with 1 <= sum|n_i| <= max order; every mode drops bins below
/// min_frequency. Throws if nothing survives.
FrequencySelection select_frequencies(int n_bins, int n_channels, const CycleClock& clock,
                                      const FrequencySelection& request,
                                      const std::vector<std::vector<double>>* snr_estimates =
                                          nullptr);

/// Keep only selected bins and split complex rows into stacked (Re, Im) real
/// rows ordered by (channel, bin, part). Inner products are preserved:
/// Re<a,b>_C = <split a, split b>_R.
SystemMatrix split_real_imag(const SpectralMatrix& S, const FrequencySelection& sel,
                             const CycleClock& clock);
MeasurementSeries split_real_imag(const SpectralSeries& u, const FrequencySelection& sel);

struct RowNormalizeReport {
  int kept = 0;
  int dropped = 0;
  std::vector<int> dropped_rows;  // indices into the pre-drop row order
};

/// Divide each row and its data entries by max(||row||_2, eps) with
/// eps = eps_rel * max row norm; rows at or below eps are dropped.
RowNormalizeReport row_normalize(SystemMatrix& S, MeasurementSeries& u,
                                 double eps_rel = 1e-12);

MeasurementSeries subtract_background(const MeasurementSeries& u,
                                      const MeasurementSeries& background);

/// Text sidecar with one "channel bin frequency_hz part" line per kept row.
std::string selection_table(const SystemMatrix& S);

}  // namespace dynmpi

#endif
