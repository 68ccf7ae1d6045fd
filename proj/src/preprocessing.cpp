#include "dynmpi/preprocessing.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dynmpi {

namespace {

// FFTW planning is not thread-safe; executions on distinct buffers are.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

class R2cPlan {
public:
  explicit R2cPlan(int n) : n_(n), in_(n), out_(n / 2 + 1) {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_.data(),
                                 reinterpret_cast<fftw_complex*>(out_.data()), FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("to_frequency_domain: FFTW plan failed");
  }
  ~R2cPlan() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan_);
  }
  R2cPlan(const R2cPlan&) = delete;
  R2cPlan& operator=(const R2cPlan&) = delete;

  void run(const double* u, std::complex<double>* spectrum) {
    std::copy(u, u + n_, in_.begin());
    fftw_execute_dft_r2c(plan_, in_.data(), reinterpret_cast<fftw_complex*>(out_.data()));
    std::copy(out_.begin(), out_.end(), spectrum);
  }

private:
  int n_;
  std::vector<double> in_;
  std::vector<std::complex<double>> out_;
  fftw_plan plan_;
};

}  // namespace

std::vector<std::complex<double>> to_frequency_domain(const std::vector<double>& u_time) {
  if (u_time.empty()) throw std::invalid_argument("to_frequency_domain: empty input");
  const int n = static_cast<int>(u_time.size());
  std::vector<std::complex<double>> out(n / 2 + 1);
  R2cPlan plan(n);
  plan.run(u_time.data(), out.data());
  return out;
}

SpectralSeries series_to_frequency_domain(const MeasurementSeries& u, int n_channels,
                                          const CycleClock& clock) {
  const int n = clock.samples_per_cycle;
  if (u.n_rows != n_channels * n)
    throw std::invalid_argument("series_to_frequency_domain: row count mismatch");
  SpectralSeries s;
  s.n_frames = u.n_frames;
  s.n_channels = n_channels;
  s.n_bins = n / 2 + 1;
  s.data.resize(static_cast<std::size_t>(s.n_frames) * n_channels * s.n_bins);
  R2cPlan plan(n);
  std::vector<double> buf(n);
  for (int f = 0; f < u.n_frames; ++f)
    for (int i = 0; i < n_channels; ++i) {
      const double* src = u.frame(f) + static_cast<std::size_t>(i) * n;
      std::copy(src, src + n, buf.begin());
      plan.run(buf.data(), &s.at(f, i, 0));
    }
  return s;
}

SpectralMatrix matrix_to_frequency_domain(const SystemMatrix& S, int n_channels,
                                          const CycleClock& clock) {
  const int n = clock.samples_per_cycle;
  if (S.domain_tag != DomainTag::time_domain)
    throw std::invalid_argument("matrix_to_frequency_domain: time-domain matrix required");
  if (S.n_rows != n_channels * n)
    throw std::invalid_argument("matrix_to_frequency_domain: row count mismatch");
  SpectralMatrix out;
  out.grid = S.grid;
  out.n_channels = n_channels;
  out.n_bins = n / 2 + 1;
  out.n_cols = S.n_cols;
  out.data.resize(static_cast<std::size_t>(n_channels) * out.n_bins * S.n_cols);
  R2cPlan plan(n);
  std::vector<double> buf(n);
  std::vector<std::complex<double>> spec(out.n_bins);
  for (int i = 0; i < n_channels; ++i)
    for (int j = 0; j < S.n_cols; ++j) {
      for (int k = 0; k < n; ++k)
        buf[k] = S.data[(static_cast<std::size_t>(i) * n + k) * S.n_cols + j];
      plan.run(buf.data(), spec.data());
      for (int b = 0; b < out.n_bins; ++b) out.at(i, b, j) = spec[b];
    }
  return out;
}

std::vector<std::vector<double>> estimate_snr(const SpectralSeries& clean, double noise_std,
                                              int samples_per_cycle) {
  if (!(noise_std > 0.0)) throw std::invalid_argument("estimate_snr: noise std must be > 0");
  const double denom = noise_std * std::sqrt(samples_per_cycle / 2.0);
  std::vector<std::vector<double>> snr(clean.n_channels,
                                       std::vector<double>(clean.n_bins, 0.0));
  for (int i = 0; i < clean.n_channels; ++i)
    for (int b = 0; b < clean.n_bins; ++b) {
      double mean_abs = 0.0;
      for (int f = 0; f < clean.n_frames; ++f) mean_abs += std::abs(clean.at(f, i, b));
      snr[i][b] = mean_abs / clean.n_frames / denom;
    }
  return snr;
}

FrequencySelection select_frequencies(int n_bins, int n_channels, const CycleClock& clock,
                                      const FrequencySelection& request,
                                      const std::vector<std::vector<double>>* snr_estimates) {
  if (request.min_frequency < 0.0)
    throw std::invalid_argument("select_frequencies: min_frequency must be >= 0");
  FrequencySelection out = request;
  out.selected_indices.assign(n_channels, {});

  const double bin_hz = clock.sample_rate / clock.samples_per_cycle;
  const int cutoff_bin =
      static_cast<int>(std::ceil(request.min_frequency / bin_hz - 1e-12));

  if (request.mode == FrequencySelection::Mode::mixing_order) {
    // Bins reachable as |n1 b1 + n2 b2 + n3 b3| with base bins b_a = N/d_a
    // and 1 <= sum |n_a| <= max order.
    const int N = clock.samples_per_cycle;
    std::array<int, 3> base{};
    for (int a = 0; a < 3; ++a) base[a] = N / clock.divisors[a];
    std::set<int> bins;
    const int order = request.max_mixing_order;
    if (order < 1) throw std::invalid_argument("select_frequencies: mixing order must be >= 1");
    for (int n1 = -order; n1 <= order; ++n1)
      for (int n2 = -order; n2 <= order; ++n2)
        for (int n3 = -order; n3 <= order; ++n3) {
          const int total = std::abs(n1) + std::abs(n2) + std::abs(n3);
          if (total < 1 || total > order) continue;
          const long long kappa =
              std::llabs(static_cast<long long>(n1) * base[0] +
                         static_cast<long long>(n2) * base[1] +
                         static_cast<long long>(n3) * base[2]);
          if (kappa >= 1 && kappa < n_bins && kappa >= cutoff_bin)
            bins.insert(static_cast<int>(kappa));
        }
    for (int i = 0; i < n_channels; ++i)
      out.selected_indices[i].assign(bins.begin(), bins.end());
  } else if (request.mode == FrequencySelection::Mode::snr_threshold) {
    if (!snr_estimates)
      throw std::invalid_argument("select_frequencies: snr mode requires snr estimates");
    if (static_cast<int>(snr_estimates->size()) != n_channels)
      throw std::invalid_argument("select_frequencies: snr estimate channel count mismatch");
    for (int i = 0; i < n_channels; ++i) {
      const auto& snr = (*snr_estimates)[i];
      if (static_cast<int>(snr.size()) != n_bins)
        throw std::invalid_argument("select_frequencies: snr estimate bin count mismatch");
      for (int b = std::max(cutoff_bin, 0); b < n_bins; ++b)
        if (snr[b] >= request.snr_threshold) out.selected_indices[i].push_back(b);
    }
  } else {  // band_only
    for (int i = 0; i < n_channels; ++i)
      for (int b = std::max(cutoff_bin, 0); b < n_bins; ++b)
        out.selected_indices[i].push_back(b);
  }

  bool any = false;
  for (const auto& v : out.selected_indices) any = any || !v.empty();
  if (!any) throw std::runtime_error("select_frequencies: no frequencies survive selection");
  return out;
}

SystemMatrix split_real_imag(const SpectralMatrix& S, const FrequencySelection& sel,
                             const CycleClock& clock) {
  if (static_cast<int>(sel.selected_indices.size()) != S.n_channels)
    throw std::invalid_argument("split_real_imag: selection channel count mismatch");
  const double bin_hz = clock.sample_rate / clock.samples_per_cycle;

  int n_rows = 0;
  for (const auto& v : sel.selected_indices) n_rows += 2 * static_cast<int>(v.size());

  SystemMatrix out;
  out.grid = S.grid;
  out.n_rows = n_rows;
  out.n_cols = S.n_cols;
  out.domain_tag = DomainTag::frequency_selected_real_split;
  out.data.resize(static_cast<std::size_t>(n_rows) * S.n_cols);
  out.row_meta.resize(n_rows);

  int r = 0;
  for (int i = 0; i < S.n_channels; ++i)
    for (int b : sel.selected_indices[i]) {
      if (b < 0 || b >= S.n_bins)
        throw std::invalid_argument("split_real_imag: selected bin out of range");
      for (int part = 0; part < 2; ++part, ++r) {
        auto& meta = out.row_meta[r];
        meta.channel = i;
        meta.index = b;
        meta.part = part == 0 ? SystemMatrixRowMeta::Part::real
                              : SystemMatrixRowMeta::Part::imag;
        meta.frequency_hz = b * bin_hz;
        double* dst = out.row(r);
        for (int j = 0; j < S.n_cols; ++j) {
          const std::complex<double> v = S.at(i, b, j);
          dst[j] = part == 0 ? v.real() : v.imag();
        }
      }
    }
  return out;
}

MeasurementSeries split_real_imag(const SpectralSeries& u, const FrequencySelection& sel) {
  if (static_cast<int>(sel.selected_indices.size()) != u.n_channels)
    throw std::invalid_argument("split_real_imag: selection channel count mismatch");
  int n_rows = 0;
  for (const auto& v : sel.selected_indices) n_rows += 2 * static_cast<int>(v.size());

  MeasurementSeries out(u.n_frames, n_rows, DomainTag::frequency_selected_real_split);
  for (int f = 0; f < u.n_frames; ++f) {
    double* dst = out.frame(f);
    int r = 0;
    for (int i = 0; i < u.n_channels; ++i)
      for (int b : sel.selected_indices[i]) {
        if (b < 0 || b >= u.n_bins)
          throw std::invalid_argument("split_real_imag: selected bin out of range");
        const std::complex<double> v = u.at(f, i, b);
        dst[r++] = v.real();
        dst[r++] = v.imag();
      }
  }
  return out;
}

RowNormalizeReport row_normalize(SystemMatrix& S, MeasurementSeries& u, double eps_rel) {
  if (u.n_rows != S.n_rows)
    throw std::invalid_argument("row_normalize: matrix and data row counts differ");

  std::vector<double> norms(S.n_rows, 0.0);
  double max_norm = 0.0;
  for (int r = 0; r < S.n_rows; ++r) {
    const double* row = S.row(r);
    double s = 0.0;
    for (int j = 0; j < S.n_cols; ++j) s += row[j] * row[j];
    norms[r] = std::sqrt(s);
    max_norm = std::max(max_norm, norms[r]);
  }
  const double eps = eps_rel * max_norm;

  RowNormalizeReport report;
  std::vector<int> keep;
  keep.reserve(S.n_rows);
  for (int r = 0; r < S.n_rows; ++r) {
    if (norms[r] <= eps) {
      report.dropped_rows.push_back(r);
    } else {
      keep.push_back(r);
    }
  }
  report.kept = static_cast<int>(keep.size());
  report.dropped = static_cast<int>(report.dropped_rows.size());
  if (keep.empty()) throw std::runtime_error("row_normalize: all rows dropped");

  SystemMatrix ns;
  ns.grid = S.grid;
  ns.n_rows = report.kept;
  ns.n_cols = S.n_cols;
  ns.domain_tag = S.domain_tag;
  ns.data.resize(static_cast<std::size_t>(report.kept) * S.n_cols);
  ns.row_meta.resize(report.kept);
  MeasurementSeries nu(u.n_frames, report.kept, u.domain_tag);

  for (int out_r = 0; out_r < report.kept; ++out_r) {
    const int r = keep[out_r];
    const double inv = 1.0 / std::max(norms[r], eps);
    const double* src = S.row(r);
    double* dst = ns.row(out_r);
    for (int j = 0; j < S.n_cols; ++j) dst[j] = src[j] * inv;
    ns.row_meta[out_r] = S.row_meta.empty() ? SystemMatrixRowMeta{} : S.row_meta[r];
    for (int f = 0; f < u.n_frames; ++f) nu.frame(f)[out_r] = u.frame(f)[r] * inv;
  }

  S = std::move(ns);
  u = std::move(nu);
  return report;
}

MeasurementSeries subtract_background(const MeasurementSeries& u,
                                      const MeasurementSeries& background) {
  if (u.n_frames != background.n_frames || u.n_rows != background.n_rows ||
      u.domain_tag != background.domain_tag)
    throw std::invalid_argument("subtract_background: shape mismatch");
  MeasurementSeries out = u;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= background.data[i];
  return out;
}

std::string selection_table(const SystemMatrix& S) {
  std::ostringstream os;
  os << "# channel bin frequency_hz part\n";
  for (const auto& m : S.row_meta) {
    const char* part = m.part == SystemMatrixRowMeta::Part::real   ? "re"
                       : m.part == SystemMatrixRowMeta::Part::imag ? "im"
                                                                   : "t";
    os << m.channel << ' ' << m.index << ' ' << m.frequency_hz << ' ' << part << '\n';
  }
  return os.str();
}

}  // namespace dynmpi
