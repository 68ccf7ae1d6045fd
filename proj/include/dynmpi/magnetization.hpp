#ifndef DYNMPI_MAGNETIZATION_HPP
#define DYNMPI_MAGNETIZATION_HPP

#include <Eigen/Dense>

namespace dynmpi {

/// Equilibrium (Langevin) particle model. Magnetic fields throughout the
/// toolkit are stored in T/mu0 numeric units, so `beta` multiplies stored
/// field values directly: beta = m0 / (k_B * temperature).
struct ParticleModel {
  double beta = 0.0;   // Langevin dilation, per (T/mu0) field unit
  double m0 = 0.0;     // particle magnetic moment magnitude, A m^2
  double mu0 = 1.2566370614359172e-6;  // 4 pi 1e-7 N/A^2

  ParticleModel() = default;
  ParticleModel(double beta_, double m0_);

  /// Derive beta and m0 from core parameters: m0 = Msat * (pi/6) d^3 with
  /// Msat given in T/mu0, beta = m0/(k_B T).
  static ParticleModel from_core_parameters(double saturation_magnetization_T,
                                            double core_diameter_m, double temperature_K);
};

/// Dilated Langevin function coth(beta z) - 1/(beta z), odd, range (-1,1).
double langevin(double z, double beta);

/// d/dz of the dilated Langevin function; strictly positive, beta/3 at z=0.
double langevin_derivative(double z, double beta);

/// Field-response matrix F~(xi) = (L'(r)/r^2 - L(r)/r^3) xi xi^T + (L(r)/r) I,
/// r = |xi|. Symmetric positive definite for xi != 0 (throws at xi = 0).
Eigen::Matrix3d ftilde(const Eigen::Vector3d& xi, const ParticleModel& particle);

/// F~ evaluated with its r -> 0 limit (beta/3) I; total on all inputs.
/// Used by the system function where the FFP itself is a valid location.
Eigen::Matrix3d ftilde_or_limit(const Eigen::Vector3d& xi, const ParticleModel& particle);

/// Mean magnetic moment m0 L(|H|) H/|H|, zero at H = 0.
Eigen::Vector3d mean_moment(const Eigen::Vector3d& H, const ParticleModel& particle);

}  // namespace dynmpi

#endif
