#include "dynmpi/acquisition.hpp"

#include <cmath>
#include <stdexcept>

#include "dynmpi/magnetization.hpp"
#include "dynmpi/parallel.hpp"
#include "dynmpi/rng.hpp"

namespace dynmpi {

NoiseModel::NoiseModel(double level_, std::uint64_t seed_) : level(level_), seed(seed_) {
  if (level < 0.0) throw std::invalid_argument("NoiseModel: level must be >= 0");
}

MeasurementSeries simulate_dynamic_signal(const ImageSequence& phantom,
                                          const ScannerModel& scanner, const CycleClock& clock,
                                          int parallelism_hint) {
  const CycleClock own = scanner.clock();
  if (own.samples_per_cycle != clock.samples_per_cycle ||
      own.base_frequency != clock.base_frequency)
    throw std::invalid_argument("simulate_dynamic_signal: clock does not match scanner");

  const Grid3& grid = phantom.grid;
  const int n_samples = clock.samples_per_cycle;
  const int n_coils = scanner.n_coils();
  const int n_rows = n_coils * n_samples;

  std::vector<Eigen::Vector3d> hd(n_samples), hdot(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    const double t = k / clock.sample_rate;
    hd[k] = drive_field(t, scanner);
    hdot[k] = drive_field_rate(t, scanner);
  }

  const double weight = grid.quadrature_weight();
  const double prefactor = -scanner.particle.mu0 * scanner.particle.m0 * weight;
  const Eigen::MatrixXd coils_t = scanner.receive_coils.transpose();

  MeasurementSeries u(phantom.n_frames, n_rows, DomainTag::time_domain);

  parallel_for(
      phantom.n_frames,
      [&](std::size_t f) {
        const double* c = phantom.frame(static_cast<int>(f));
        double* out = u.frame(static_cast<int>(f));
        for (int ix = 0; ix < grid.dims[0]; ++ix)
          for (int iy = 0; iy < grid.dims[1]; ++iy)
            for (int iz = 0; iz < grid.dims[2]; ++iz) {
              const double cv = c[grid.index(ix, iy, iz)];
              if (cv == 0.0) continue;
              const auto xc = grid.voxel_center(ix, iy, iz);
              const Eigen::Vector3d gx =
                  scanner.gradient * Eigen::Vector3d(xc[0], xc[1], xc[2]);
              const double amp = prefactor * cv;
              for (int k = 0; k < n_samples; ++k) {
                const Eigen::Vector3d H = gx + hd[k];
                const Eigen::VectorXd s =
                    coils_t * (amp * (ftilde_or_limit(H, scanner.particle) * hdot[k]));
                for (int i = 0; i < n_coils; ++i)
                  out[static_cast<std::size_t>(i) * n_samples + k] += s[i];
              }
            }
      },
      parallelism_hint);

  return u;
}

MeasurementSeries add_noise(const MeasurementSeries& u, const NoiseModel& noise) {
  if (u.domain_tag != DomainTag::time_domain)
    throw std::invalid_argument("add_noise: time-domain input required");
  if (noise.level == 0.0) return u;

  double umax = 0.0;
  for (double v : u.data) umax = std::max(umax, std::abs(v));
  const double sigma = noise.level * umax;

  MeasurementSeries out = u;
  for (std::size_t n = 0; n < out.data.size(); ++n)
    out.data[n] += sigma * rng::gaussian(noise.seed, n);
  return out;
}

MeasurementSeries select_window(const MeasurementSeries& u, const CycleClock& clock,
                                int n_channels, int start, int length) {
  if (u.domain_tag != DomainTag::time_domain)
    throw std::invalid_argument("select_window: time-domain input required");
  const int n = clock.samples_per_cycle;
  if (u.n_rows != n_channels * n)
    throw std::invalid_argument("select_window: series shape does not match clock/channels");
  if (start < 0 || length < 1 || start + length > n)
    throw std::invalid_argument("select_window: window out of range");

  MeasurementSeries out(u.n_frames, n_channels * length, DomainTag::time_domain);
  for (int f = 0; f < u.n_frames; ++f) {
    const double* src = u.frame(f);
    double* dst = out.frame(f);
    for (int i = 0; i < n_channels; ++i)
      for (int j = 0; j < length; ++j)
        dst[static_cast<std::size_t>(i) * length + j] =
            src[static_cast<std::size_t>(i) * n + start + j];
  }
  return out;
}

std::vector<double> neglected_term_ratio(const ImageSequence& phantom,
                                         const ScannerModel& scanner, const CycleClock& clock,
                                         const MeasurementSeries& signal) {
  if (phantom.n_frames < 2) return {};
  const Grid3& grid = phantom.grid;
  const int n_samples = clock.samples_per_cycle;
  const int n_coils = scanner.n_coils();
  const double weight = grid.quadrature_weight();
  const Eigen::MatrixXd coils_t = scanner.receive_coils.transpose();

  double umax = 0.0;
  for (double v : signal.data) umax = std::max(umax, std::abs(v));
  if (umax == 0.0) return std::vector<double>(phantom.n_frames - 1, 0.0);

  std::vector<double> ratio(phantom.n_frames - 1, 0.0);
  // coarse time subsampling is enough for a reporting-only magnitude estimate
  const int stride = std::max(1, n_samples / 64);
  parallel_for(phantom.n_frames - 1, [&](std::size_t f) {
    const double* c0 = phantom.frame(static_cast<int>(f));
    const double* c1 = phantom.frame(static_cast<int>(f) + 1);
    double worst = 0.0;
    for (int k = 0; k < n_samples; k += stride) {
      const double t = k / clock.sample_rate;
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int ix = 0; ix < grid.dims[0]; ++ix)
        for (int iy = 0; iy < grid.dims[1]; ++iy)
          for (int iz = 0; iz < grid.dims[2]; ++iz) {
            const std::size_t j = grid.index(ix, iy, iz);
            const double dc = (c1[j] - c0[j]) / clock.repetition_time;
            if (dc == 0.0) continue;
            const auto xc = grid.voxel_center(ix, iy, iz);
            const Eigen::Vector3d H =
                effective_field(Eigen::Vector3d(xc[0], xc[1], xc[2]), t, scanner);
            acc += dc * mean_moment(H, scanner.particle);
          }
      const Eigen::VectorXd term = scanner.particle.mu0 * weight * (coils_t * acc);
      for (int i = 0; i < n_coils; ++i) worst = std::max(worst, std::abs(term[i]));
    }
    ratio[f] = worst / umax;
  });
  return ratio;
}

}  // namespace dynmpi
