#include "dynmpi/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dynmpi {

namespace {

void check_grid(const std::array<int, 3>& d, const std::array<double, 3>& vs) {
  for (int a = 0; a < 3; ++a) {
    if (d[a] < 1) throw std::invalid_argument("Grid3: dims must be >= 1");
    if (!(vs[a] > 0.0)) throw std::invalid_argument("Grid3: voxel sizes must be > 0");
  }
}

}  // namespace

Grid3::Grid3(std::array<int, 3> d, std::array<double, 3> vs, std::array<double, 3> o)
    : dims(d), voxel_size(vs), origin(o) {
  check_grid(d, vs);
}

Grid3 Grid3::centered(std::array<int, 3> dims, std::array<double, 3> voxel_size) {
  check_grid(dims, voxel_size);
  std::array<double, 3> origin{};
  for (int a = 0; a < 3; ++a) origin[a] = -0.5 * (dims[a] - 1) * voxel_size[a];
  return Grid3(dims, voxel_size, origin);
}

double Grid3::quadrature_weight() const {
  double w = 1.0;
  for (int a = 0; a < 3; ++a)
    if (dims[a] > 1) w *= voxel_size[a];
  return w;
}

ImageSequence::ImageSequence(const Grid3& g, int frames) : grid(g), n_frames(frames) {
  if (frames < 1) throw std::invalid_argument("ImageSequence: frame count must be >= 1");
  data.assign(static_cast<std::size_t>(frames) * g.n_voxels(), 0.0);
}

ImageSequence::ImageSequence(const Grid3& g, int frames, std::vector<double> values)
    : grid(g), n_frames(frames), data(std::move(values)) {
  if (frames < 1) throw std::invalid_argument("ImageSequence: frame count must be >= 1");
  if (data.size() != static_cast<std::size_t>(frames) * g.n_voxels())
    throw std::invalid_argument("ImageSequence: data shape inconsistent with grid");
}

FlowField::FlowField(const Grid3& g, int steps) : grid(g), n_steps(steps) {
  if (steps < 1) throw std::invalid_argument("FlowField: step count must be >= 1");
  data.assign(static_cast<std::size_t>(steps) * 3 * g.n_voxels(), 0.0);
}

FlowField::FlowField(const Grid3& g, int steps, std::vector<double> values)
    : grid(g), n_steps(steps), data(std::move(values)) {
  if (steps < 1) throw std::invalid_argument("FlowField: step count must be >= 1");
  if (data.size() != static_cast<std::size_t>(steps) * 3 * g.n_voxels())
    throw std::invalid_argument("FlowField: data shape inconsistent with grid");
  for (double x : data)
    if (!std::isfinite(x)) throw std::invalid_argument("FlowField: entries must be finite");
}

MeasurementSeries::MeasurementSeries(int frames, int rows, DomainTag tag)
    : n_frames(frames), n_rows(rows), domain_tag(tag) {
  if (frames < 1 || rows < 1)
    throw std::invalid_argument("MeasurementSeries: frames and rows must be >= 1");
  data.assign(static_cast<std::size_t>(frames) * rows, 0.0);
}

MeasurementSeries::MeasurementSeries(int frames, int rows, std::vector<double> values,
                                     DomainTag tag)
    : n_frames(frames), n_rows(rows), data(std::move(values)), domain_tag(tag) {
  if (frames < 1 || rows < 1)
    throw std::invalid_argument("MeasurementSeries: frames and rows must be >= 1");
  if (data.size() != static_cast<std::size_t>(frames) * rows)
    throw std::invalid_argument("MeasurementSeries: data shape inconsistent");
}

// ---- array io ---------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'M', 'P', 'I'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("array file: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("array file: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t checked_product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d == 0) throw std::runtime_error("array file: zero dimension");
    if (n > std::numeric_limits<std::uint64_t>::max() / d / sizeof(double))
      throw std::runtime_error("array file: dimension overflow");
    n *= d;
  }
  return n;
}

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559,
              "IEEE-754 binary64 layout required by the array format");

}  // namespace

void save_array(const std::string& path, const std::vector<std::uint64_t>& dims,
                const double* values) {
  const std::uint64_t n = checked_product(dims);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_array: cannot open " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (std::uint64_t d : dims) put_u64(os, d);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &values[i], 8);
    put_u64(os, bits);
  }
  if (!os) throw std::runtime_error("save_array: write failed for " + path);
}

LoadedArray load_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_array: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_array: bad magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("load_array: unsupported format version in " + path);
  const std::uint32_t ndim = get_u32(is);
  if (ndim == 0 || ndim > 16) throw std::runtime_error("load_array: implausible ndim");
  LoadedArray out;
  out.dims.resize(ndim);
  for (auto& d : out.dims) d = get_u64(is);
  const std::uint64_t n = checked_product(out.dims);
  out.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("load_array: truncated payload in " + path);
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
    std::memcpy(&out.values[i], &bits, 8);
  }
  return out;
}

void save_image_sequence(const std::string& path, const ImageSequence& c) {
  save_array(path,
             {static_cast<std::uint64_t>(c.n_frames), static_cast<std::uint64_t>(c.grid.dims[0]),
              static_cast<std::uint64_t>(c.grid.dims[1]), static_cast<std::uint64_t>(c.grid.dims[2])},
             c.data.data());
}

void save_flow_field(const std::string& path, const FlowField& v) {
  save_array(path,
             {static_cast<std::uint64_t>(v.n_steps), 3, static_cast<std::uint64_t>(v.grid.dims[0]),
              static_cast<std::uint64_t>(v.grid.dims[1]), static_cast<std::uint64_t>(v.grid.dims[2])},
             v.data.data());
}

void save_measurement_series(const std::string& path, const MeasurementSeries& u) {
  save_array(path,
             {static_cast<std::uint64_t>(u.n_frames), static_cast<std::uint64_t>(u.n_rows)},
             u.data.data());
}

ImageSequence load_image_sequence(const std::string& path, const Grid3& grid) {
  LoadedArray a = load_array(path);
  if (a.dims.size() != 4 || a.dims[1] != static_cast<std::uint64_t>(grid.dims[0]) ||
      a.dims[2] != static_cast<std::uint64_t>(grid.dims[1]) ||
      a.dims[3] != static_cast<std::uint64_t>(grid.dims[2]))
    throw std::runtime_error("load_image_sequence: shape does not match grid: " + path);
  return ImageSequence(grid, static_cast<int>(a.dims[0]), std::move(a.values));
}

FlowField load_flow_field(const std::string& path, const Grid3& grid) {
  LoadedArray a = load_array(path);
  if (a.dims.size() != 5 || a.dims[1] != 3 ||
      a.dims[2] != static_cast<std::uint64_t>(grid.dims[0]) ||
      a.dims[3] != static_cast<std::uint64_t>(grid.dims[1]) ||
      a.dims[4] != static_cast<std::uint64_t>(grid.dims[2]))
    throw std::runtime_error("load_flow_field: shape does not match grid: " + path);
  return FlowField(grid, static_cast<int>(a.dims[0]), std::move(a.values));
}

MeasurementSeries load_measurement_series(const std::string& path, DomainTag tag) {
  LoadedArray a = load_array(path);
  if (a.dims.size() != 2)
    throw std::runtime_error("load_measurement_series: expected 2-d array: " + path);
  return MeasurementSeries(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]),
                           std::move(a.values), tag);
}

// ---- resampling -------------------------------------------------------------

std::vector<double> resample_trilinear(const std::vector<double>& volume,
                                       const std::array<int, 3>& dims,
                                       const std::array<int, 3>& factor, ResampleMode mode,
                                       std::array<int, 3>* out_dims_ptr) {
  for (int a = 0; a < 3; ++a)
    if (factor[a] < 1) throw std::invalid_argument("resample: factors must be >= 1");
  if (volume.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])
    throw std::invalid_argument("resample: volume size does not match dims");

  std::array<int, 3> od{};
  if (mode == ResampleMode::down_average) {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] % factor[a] != 0)
        throw std::invalid_argument("resample: non-integer output dims");
      od[a] = dims[a] / factor[a];
    }
  } else {
    for (int a = 0; a < 3; ++a) od[a] = dims[a] * factor[a];
  }
  if (out_dims_ptr) *out_dims_ptr = od;

  std::vector<double> out(static_cast<std::size_t>(od[0]) * od[1] * od[2], 0.0);
  auto in_idx = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z;
  };
  auto out_idx = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(x) * od[1] + y) * od[2] + z;
  };

  if (mode == ResampleMode::down_average) {
    const double inv = 1.0 / (static_cast<double>(factor[0]) * factor[1] * factor[2]);
    for (int x = 0; x < od[0]; ++x)
      for (int y = 0; y < od[1]; ++y)
        for (int z = 0; z < od[2]; ++z) {
          double s = 0.0;
          for (int dx = 0; dx < factor[0]; ++dx)
            for (int dy = 0; dy < factor[1]; ++dy)
              for (int dz = 0; dz < factor[2]; ++dz)
                s += volume[in_idx(x * factor[0] + dx, y * factor[1] + dy, z * factor[2] + dz)];
          out[out_idx(x, y, z)] = s * inv;
        }
  } else {
    // Cell-centered prolongation: fine center i maps to coarse coordinate
    // (i + 0.5)/f - 0.5, clamped at the boundary.
    for (int x = 0; x < od[0]; ++x) {
      const double cx = (x + 0.5) / factor[0] - 0.5;
      for (int y = 0; y < od[1]; ++y) {
        const double cy = (y + 0.5) / factor[1] - 0.5;
        for (int z = 0; z < od[2]; ++z) {
          const double cz = (z + 0.5) / factor[2] - 0.5;
          out[out_idx(x, y, z)] = trilinear_sample(volume.data(), dims, cx, cy, cz);
        }
      }
    }
  }
  return out;
}

double trilinear_sample(const double* volume, const std::array<int, 3>& dims, double x,
                        double y, double z) {
  auto prep = [](double c, int n, int& i0, int& i1, double& w) {
    if (n == 1) {
      i0 = i1 = 0;
      w = 0.0;
      return;
    }
    c = std::clamp(c, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(c)), n - 2);
    i1 = i0 + 1;
    w = c - i0;
  };
  int x0, x1, y0, y1, z0, z1;
  double wx, wy, wz;
  prep(x, dims[0], x0, x1, wx);
  prep(y, dims[1], y0, y1, wy);
  prep(z, dims[2], z0, z1, wz);
  auto at = [&](int ix, int iy, int iz) {
    return volume[(static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz];
  };
  const double c00 = at(x0, y0, z0) * (1 - wx) + at(x1, y0, z0) * wx;
  const double c01 = at(x0, y0, z1) * (1 - wx) + at(x1, y0, z1) * wx;
  const double c10 = at(x0, y1, z0) * (1 - wx) + at(x1, y1, z0) * wx;
  const double c11 = at(x0, y1, z1) * (1 - wx) + at(x1, y1, z1) * wx;
  const double c0 = c00 * (1 - wy) + c10 * wy;
  const double c1 = c01 * (1 - wy) + c11 * wy;
  return c0 * (1 - wz) + c1 * wz;
}

}  // namespace dynmpi
