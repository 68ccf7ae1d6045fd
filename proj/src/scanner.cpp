#include "dynmpi/scanner.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dynmpi/parallel.hpp"

namespace dynmpi {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

CycleClock CycleClock::from_divisors(std::array<int, 3> divisors, double base_frequency) {
  CycleClock c;
  c.divisors = divisors;
  c.base_frequency = base_frequency;
  c.sample_rate = base_frequency;
  if (!(base_frequency > 0.0))
    throw std::invalid_argument("CycleClock: base frequency must be > 0");
  long long l = 1;
  for (int d : divisors) {
    if (d < 1) throw std::invalid_argument("CycleClock: divisors must be >= 1");
    l = std::lcm(l, static_cast<long long>(d));
  }
  if (l > 1'000'000'000LL) throw std::invalid_argument("CycleClock: divisor lcm too large");
  c.samples_per_cycle = static_cast<int>(l);
  c.repetition_time = c.samples_per_cycle / c.base_frequency;
  return c;
}

ScannerModel::ScannerModel(const Eigen::Matrix3d& gradient_, const Eigen::Vector3d& amplitudes,
                           std::array<int, 3> divisors, double base_frequency_,
                           double sample_rate_, Eigen::MatrixXd coils, ParticleModel particle_)
    : gradient(gradient_),
      drive_amplitudes(amplitudes),
      drive_divisors(divisors),
      base_frequency(base_frequency_),
      sample_rate(sample_rate_),
      receive_coils(std::move(coils)),
      particle(particle_) {
  Eigen::FullPivLU<Eigen::Matrix3d> lu(gradient);
  if (!lu.isInvertible())
    throw std::invalid_argument("ScannerModel: selection-field gradient must be invertible");
  gradient_inverse_ = lu.inverse();
  if (receive_coils.rows() != 3 || receive_coils.cols() < 1)
    throw std::invalid_argument("ScannerModel: receive coils must be a 3 x L matrix, L >= 1");
  if (sample_rate != base_frequency)
    throw std::invalid_argument("ScannerModel: sample rate must equal the base frequency");
  for (int d : divisors)
    if (d < 1) throw std::invalid_argument("ScannerModel: divisors must be >= 1");
}

Eigen::Vector3d ScannerModel::drive_frequencies() const {
  Eigen::Vector3d f;
  for (int a = 0; a < 3; ++a) f[a] = base_frequency / drive_divisors[a];
  return f;
}

Eigen::Vector3d drive_field(double t, const ScannerModel& scanner) {
  const Eigen::Vector3d f = scanner.drive_frequencies();
  Eigen::Vector3d h;
  for (int a = 0; a < 3; ++a) h[a] = scanner.drive_amplitudes[a] * std::sin(kTwoPi * f[a] * t);
  return h;
}

Eigen::Vector3d drive_field_rate(double t, const ScannerModel& scanner) {
  const Eigen::Vector3d f = scanner.drive_frequencies();
  Eigen::Vector3d h;
  for (int a = 0; a < 3; ++a)
    h[a] = scanner.drive_amplitudes[a] * kTwoPi * f[a] * std::cos(kTwoPi * f[a] * t);
  return h;
}

Eigen::Vector3d ffp_position(double t, const ScannerModel& scanner) {
  return -scanner.gradient_inverse() * drive_field(t, scanner);
}

Eigen::Vector3d ffp_velocity(double t, const ScannerModel& scanner) {
  return -scanner.gradient_inverse() * drive_field_rate(t, scanner);
}

Eigen::Vector3d effective_field(const Eigen::Vector3d& x, double t,
                                const ScannerModel& scanner) {
  return scanner.gradient * x + drive_field(t, scanner);
}

Eigen::VectorXd system_function(const Eigen::Vector3d& x, double t,
                                const ScannerModel& scanner) {
  const Eigen::Vector3d H = effective_field(x, t, scanner);
  const Eigen::Vector3d Hdot = drive_field_rate(t, scanner);  // dH/dt is x-independent
  const Eigen::Vector3d response =
      -scanner.particle.mu0 * scanner.particle.m0 * (ftilde_or_limit(H, scanner.particle) * Hdot);
  return scanner.receive_coils.transpose() * response;
}

void SystemMatrix::apply(const double* c, double* out) const {
  for (int r = 0; r < n_rows; ++r) {
    const double* row_ptr = row(r);
    double s = 0.0;
    for (int j = 0; j < n_cols; ++j) s += row_ptr[j] * c[j];
    out[r] = s;
  }
}

void SystemMatrix::apply_adjoint(const double* y, double* out) const {
  for (int j = 0; j < n_cols; ++j) out[j] = 0.0;
  for (int r = 0; r < n_rows; ++r) {
    const double* row_ptr = row(r);
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (int j = 0; j < n_cols; ++j) out[j] += yr * row_ptr[j];
  }
}

SystemMatrix build_system_matrix(const Grid3& grid, const CycleClock& clock,
                                 const ScannerModel& scanner, int parallelism_hint,
                                 std::size_t element_budget) {
  const CycleClock own = scanner.clock();
  if (own.samples_per_cycle != clock.samples_per_cycle ||
      own.base_frequency != clock.base_frequency)
    throw std::invalid_argument("build_system_matrix: clock does not match scanner");

  const int n_samples = clock.samples_per_cycle;
  const int n_coils = scanner.n_coils();
  const std::size_t n_rows = static_cast<std::size_t>(n_coils) * n_samples;
  const std::size_t n_cols = grid.n_voxels();
  if (n_rows * n_cols > element_budget)
    throw std::runtime_error("build_system_matrix: matrix exceeds the element budget (" +
                             std::to_string(n_rows * n_cols) + " > " +
                             std::to_string(element_budget) + ")");

  // Warn when the grid extends past the FFP-covered region |G^-1| A.
  {
    const Eigen::Vector3d reach =
        scanner.gradient_inverse().cwiseAbs() * scanner.drive_amplitudes;
    for (int a = 0; a < 3; ++a) {
      const double half = 0.5 * grid.dims[a] * grid.voxel_size[a];
      const double lo = grid.origin[a] - 0.5 * grid.voxel_size[a];
      const double hi = lo + grid.dims[a] * grid.voxel_size[a];
      if (grid.dims[a] > 1 && (lo < -reach[a] - 1e-12 || hi > reach[a] + 1e-12)) {
        std::cerr << "warning: grid axis " << a << " spans [" << lo << ", " << hi
                  << "] m but the FFP only reaches +-" << reach[a] << " m\n";
        (void)half;
        break;
      }
    }
  }

  SystemMatrix S;
  S.grid = grid;
  S.n_rows = static_cast<int>(n_rows);
  S.n_cols = static_cast<int>(n_cols);
  S.domain_tag = DomainTag::time_domain;
  S.data.assign(n_rows * n_cols, 0.0);
  S.row_meta.resize(n_rows);
  for (int i = 0; i < n_coils; ++i)
    for (int k = 0; k < n_samples; ++k) {
      auto& meta = S.row_meta[static_cast<std::size_t>(i) * n_samples + k];
      meta.channel = i;
      meta.index = k;
      meta.part = SystemMatrixRowMeta::Part::time_sample;
    }

  // Drive field and its rate depend on time only; precompute per sample.
  std::vector<Eigen::Vector3d> hd(n_samples), hdot(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    const double t = k / clock.sample_rate;
    hd[k] = drive_field(t, scanner);
    hdot[k] = drive_field_rate(t, scanner);
  }

  const double weight = grid.quadrature_weight();
  const double prefactor = -scanner.particle.mu0 * scanner.particle.m0 * weight;
  const Eigen::MatrixXd coils_t = scanner.receive_coils.transpose();

  parallel_for_chunks(
      n_cols,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
          const int ix = static_cast<int>(j) / (grid.dims[1] * grid.dims[2]);
          const int iy = (static_cast<int>(j) / grid.dims[2]) % grid.dims[1];
          const int iz = static_cast<int>(j) % grid.dims[2];
          const auto xc = grid.voxel_center(ix, iy, iz);
          const Eigen::Vector3d gx =
              scanner.gradient * Eigen::Vector3d(xc[0], xc[1], xc[2]);
          for (int k = 0; k < n_samples; ++k) {
            const Eigen::Vector3d H = gx + hd[k];
            const Eigen::Vector3d response =
                prefactor * (ftilde_or_limit(H, scanner.particle) * hdot[k]);
            const Eigen::VectorXd s = coils_t * response;
            for (int i = 0; i < n_coils; ++i)
              S.data[(static_cast<std::size_t>(i) * n_samples + k) * n_cols + j] = s[i];
          }
        }
      },
      parallelism_hint);

  return S;
}

}  // namespace dynmpi
