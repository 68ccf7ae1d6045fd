#ifndef DYNMPI_CORE_HPP
#define DYNMPI_CORE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dynmpi {

/// Regular 3D voxel grid. `origin` is the physical center of voxel (0,0,0);
/// storage is C-order with the z index fastest.
struct Grid3 {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> voxel_size{1e-3, 1e-3, 1e-3};  // meters
  std::array<double, 3> origin{0.0, 0.0, 0.0};         // meters

  Grid3() = default;
  Grid3(std::array<int, 3> d, std::array<double, 3> vs, std::array<double, 3> o);

  // Grid whose physical extent dims*voxel_size is centered on the scanner origin.
  static Grid3 centered(std::array<int, 3> dims, std::array<double, 3> voxel_size);

  std::size_t n_voxels() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
  std::array<double, 3> voxel_center(int ix, int iy, int iz) const {
    return {origin[0] + ix * voxel_size[0], origin[1] + iy * voxel_size[1],
            origin[2] + iz * voxel_size[2]};
  }
  std::array<double, 3> extent() const {
    return {dims[0] * voxel_size[0], dims[1] * voxel_size[1], dims[2] * voxel_size[2]};
  }
  double voxel_volume() const { return voxel_size[0] * voxel_size[1] * voxel_size[2]; }
  // Quadrature weight of one voxel: the z factor is dropped on single-slice
  // grids, where the concentration is treated as a Dirac layer in z.
  double quadrature_weight() const;

  bool operator==(const Grid3&) const = default;
};

/// Time-indexed concentration volumes c(x, t_s), shape (n_frames, nx, ny, nz).
struct ImageSequence {
  Grid3 grid;
  int n_frames = 0;
  std::vector<double> data;

  ImageSequence() = default;
  ImageSequence(const Grid3& g, int frames);  // zero-filled
  ImageSequence(const Grid3& g, int frames, std::vector<double> values);

  double* frame(int k) { return data.data() + static_cast<std::size_t>(k) * grid.n_voxels(); }
  const double* frame(int k) const {
    return data.data() + static_cast<std::size_t>(k) * grid.n_voxels();
  }
};

/// Time-indexed velocity fields linking consecutive frames, shape
/// (n_steps, 3, nx, ny, nz), in voxels per frame step. v[k] transports
/// frame k to frame k+1.
struct FlowField {
  Grid3 grid;
  int n_steps = 0;
  std::vector<double> data;

  FlowField() = default;
  FlowField(const Grid3& g, int steps);  // zero-filled
  FlowField(const Grid3& g, int steps, std::vector<double> values);

  // Pointer to the (3, nvox) block of step k.
  double* step(int k) { return data.data() + static_cast<std::size_t>(k) * 3 * grid.n_voxels(); }
  const double* step(int k) const {
    return data.data() + static_cast<std::size_t>(k) * 3 * grid.n_voxels();
  }
  double* step_component(int k, int c) { return step(k) + static_cast<std::size_t>(c) * grid.n_voxels(); }
  const double* step_component(int k, int c) const {
    return step(k) + static_cast<std::size_t>(c) * grid.n_voxels();
  }
};

enum class DomainTag { time_domain, frequency_selected_real_split };

/// Per-frame measurement vectors, shape (n_frames, n_rows).
struct MeasurementSeries {
  int n_frames = 0;
  int n_rows = 0;
  std::vector<double> data;
  DomainTag domain_tag = DomainTag::time_domain;

  MeasurementSeries() = default;
  MeasurementSeries(int frames, int rows, DomainTag tag);
  MeasurementSeries(int frames, int rows, std::vector<double> values, DomainTag tag);

  double* frame(int k) { return data.data() + static_cast<std::size_t>(k) * n_rows; }
  const double* frame(int k) const {
    return data.data() + static_cast<std::size_t>(k) * n_rows;
  }
};

// ---- on-disk array format -------------------------------------------------
// magic "DMPI", u32 version=1, u32 ndim, ndim x u64 dims, payload of
// little-endian f64 in C-order. No padding. Round trips are bit-exact.

struct LoadedArray {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

void save_array(const std::string& path, const std::vector<std::uint64_t>& dims,
                const double* values);
LoadedArray load_array(const std::string& path);

void save_image_sequence(const std::string& path, const ImageSequence& c);
void save_flow_field(const std::string& path, const FlowField& v);
void save_measurement_series(const std::string& path, const MeasurementSeries& u);

ImageSequence load_image_sequence(const std::string& path, const Grid3& grid);
FlowField load_flow_field(const std::string& path, const Grid3& grid);
MeasurementSeries load_measurement_series(const std::string& path, DomainTag tag);

// ---- resampling -----------------------------------------------------------

enum class ResampleMode { down_average, up_trilinear };

/// Integer per-axis resampling. down_average replaces each factor-sized block
/// by its mean (exactly mean preserving); up_trilinear is the cell-centered
/// trilinear prolongation used by the multiscale pyramid.
std::vector<double> resample_trilinear(const std::vector<double>& volume,
                                       const std::array<int, 3>& dims,
                                       const std::array<int, 3>& factor, ResampleMode mode,
                                       std::array<int, 3>* out_dims = nullptr);

/// Clamped trilinear interpolation at fractional voxel coordinates.
double trilinear_sample(const double* volume, const std::array<int, 3>& dims, double x,
                        double y, double z);

}  // namespace dynmpi

#endif
