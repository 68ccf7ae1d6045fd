#ifndef DYNMPI_SCANNER_HPP
#define DYNMPI_SCANNER_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "dynmpi/core.hpp"
#include "dynmpi/magnetization.hpp"

namespace dynmpi {

/// One Lissajous cycle: divisors of the base frequency per drive axis.
/// Disabled axes use divisor 1 together with zero drive amplitude.
struct CycleClock {
  std::array<int, 3> divisors{1, 1, 1};
  double base_frequency = 2.5e6;   // Hz
  double sample_rate = 2.5e6;      // f_S, Hz (must equal base_frequency)
  int samples_per_cycle = 1;       // lcm(divisors)
  double repetition_time = 0.0;    // T_R = samples_per_cycle / base_frequency

  static CycleClock from_divisors(std::array<int, 3> divisors, double base_frequency);
};

/// Scanner geometry and electronics. Fields are stored in T/mu0 numeric
/// units: gradient entries in T/m/mu0, drive amplitudes in T/mu0.
struct ScannerModel {
  Eigen::Matrix3d gradient = Eigen::Matrix3d::Identity();
  Eigen::Vector3d drive_amplitudes = Eigen::Vector3d::Zero();
  std::array<int, 3> drive_divisors{1, 1, 1};
  double base_frequency = 2.5e6;
  double sample_rate = 2.5e6;
  Eigen::MatrixXd receive_coils;  // 3 x L, columns are coil sensitivities
  ParticleModel particle;

  ScannerModel() = default;
  ScannerModel(const Eigen::Matrix3d& gradient, const Eigen::Vector3d& amplitudes,
               std::array<int, 3> divisors, double base_frequency, double sample_rate,
               Eigen::MatrixXd coils, ParticleModel particle);

  int n_coils() const { return static_cast<int>(receive_coils.cols()); }
  CycleClock clock() const { return CycleClock::from_divisors(drive_divisors, base_frequency); }
  Eigen::Vector3d drive_frequencies() const;
  const Eigen::Matrix3d& gradient_inverse() const { return gradient_inverse_; }

private:
  Eigen::Matrix3d gradient_inverse_ = Eigen::Matrix3d::Identity();
};

Eigen::Vector3d drive_field(double t, const ScannerModel& scanner);
Eigen::Vector3d drive_field_rate(double t, const ScannerModel& scanner);  // dH_D/dt
Eigen::Vector3d ffp_position(double t, const ScannerModel& scanner);      // -G^-1 H_D(t)
Eigen::Vector3d ffp_velocity(double t, const ScannerModel& scanner);      // -G^-1 dH_D/dt
Eigen::Vector3d effective_field(const Eigen::Vector3d& x, double t,
                                const ScannerModel& scanner);             // Gx + H_D(t)

/// System function s_i(x,t) = -mu0 m0 R_i^T F~(H(x,t)) dH/dt for each coil.
Eigen::VectorXd system_function(const Eigen::Vector3d& x, double t,
                                const ScannerModel& scanner);

struct SystemMatrixRowMeta {
  enum class Part : std::uint8_t { time_sample, real, imag };
  int channel = 0;
  int index = 0;  // time sample k or frequency bin kappa
  Part part = Part::time_sample;
  double frequency_hz = 0.0;  // frequency-domain rows only
};

/// Dense forward-operator rows on a grid, either time-domain samples or
/// selected frequency components split into real/imaginary rows.
struct SystemMatrix {
  Grid3 grid;
  int n_rows = 0;
  int n_cols = 0;
  std::vector<double> data;  // row-major
  std::vector<SystemMatrixRowMeta> row_meta;
  DomainTag domain_tag = DomainTag::time_domain;

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * n_cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * n_cols; }

  void apply(const double* c, double* out) const;          // out = S c
  void apply_adjoint(const double* y, double* out) const;  // out = S^T y
};

/// Assemble the time-domain matrix S[(i,k), j] = s_i(x_j, t_k) * w with the
/// midpoint quadrature weight w. Deterministic for any parallelism level.
/// Refuses assembly if rows*cols exceeds `element_budget`.
SystemMatrix build_system_matrix(const Grid3& grid, const CycleClock& clock,
                                 const ScannerModel& scanner, int parallelism_hint = 0,
                                 std::size_t element_budget = 200'000'000);

}  // namespace dynmpi

#endif
