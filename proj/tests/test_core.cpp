#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dynmpi/core.hpp"
#include "dynmpi/rng.hpp"

using namespace dynmpi;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("array io round trips zeros bit-exactly") {
  const std::string path = temp_path("dynmpi_core_zeros.dmpi");
  std::vector<double> a(8, 0.0);
  save_array(path, {2, 2, 2}, a.data());
  LoadedArray b = load_array(path);
  REQUIRE(b.dims == std::vector<std::uint64_t>({2, 2, 2}));
  CHECK(b.values == a);
}

TEST_CASE("array io round trips extreme doubles bit-exactly") {
  const std::string path = temp_path("dynmpi_core_extreme.dmpi");
  std::vector<double> a = {-0.0, 1e-300, 1e300, -1.5, 0.1};
  save_array(path, {5}, a.data());
  LoadedArray b = load_array(path);
  REQUIRE(b.values.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::uint64_t ba, bb;
    std::memcpy(&ba, &a[i], 8);
    std::memcpy(&bb, &b.values[i], 8);
    CHECK(ba == bb);
  }
  CHECK(std::signbit(b.values[0]));
}

TEST_CASE("array io round trips random payloads (property)") {
  const std::string path = temp_path("dynmpi_core_random.dmpi");
  rng::Stream rs(123);
  std::vector<double> a(257);
  for (auto& x : a) x = rs.next_gaussian() * std::pow(10.0, rs.next_uniform(-30, 30));
  save_array(path, {257}, a.data());
  LoadedArray b = load_array(path);
  CHECK(std::memcmp(a.data(), b.values.data(), a.size() * 8) == 0);
}

TEST_CASE("load rejects wrong magic") {
  const std::string path = temp_path("dynmpi_core_badmagic.dmpi");
  std::ofstream os(path, std::ios::binary);
  os << "NOPE" << std::string(32, '\0');
  os.close();
  CHECK_THROWS_WITH_AS(load_array(path), doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("load rejects truncated payload") {
  const std::string path = temp_path("dynmpi_core_trunc.dmpi");
  std::vector<double> a(8, 1.0);
  save_array(path, {8}, a.data());
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  CHECK_THROWS_WITH_AS(load_array(path), doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("containers reject inconsistent shapes") {
  Grid3 g({4, 4, 2}, {1e-3, 1e-3, 1e-3}, {0, 0, 0});
  CHECK_THROWS_AS(ImageSequence(g, 2, std::vector<double>(5)), std::invalid_argument);
  CHECK_THROWS_AS(FlowField(g, 1, std::vector<double>(7)), std::invalid_argument);
  CHECK_THROWS_AS(MeasurementSeries(2, 3, std::vector<double>(5), DomainTag::time_domain),
                  std::invalid_argument);
  CHECK_THROWS_AS(Grid3({0, 4, 4}, {1e-3, 1e-3, 1e-3}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid3({4, 4, 4}, {0.0, 1e-3, 1e-3}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(FlowField(g, 1, std::vector<double>(3 * 32, NAN)), std::invalid_argument);
}

TEST_CASE("down_average keeps constants fixed") {
  std::vector<double> v(4 * 4 * 4, 3.0);
  auto out = resample_trilinear(v, {4, 4, 4}, {2, 2, 2}, ResampleMode::down_average);
  REQUIRE(out.size() == 8);
  for (double x : out) CHECK(x == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("down_average equals the block mean and preserves the volume mean") {
  rng::Stream rs(7);
  std::array<int, 3> dims{4, 4, 4};
  std::vector<double> v(64);
  for (auto& x : v) x = rs.next_uniform(-2, 2);
  auto out = resample_trilinear(v, dims, {2, 2, 2}, ResampleMode::down_average);

  // independent block-mean oracle
  auto at = [&](int x, int y, int z) { return v[(x * 4 + y) * 4 + z]; };
  double vol_mean = 0.0;
  for (double x : v) vol_mean += x;
  vol_mean /= 64.0;
  double out_mean = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) {
        double m = 0.0;
        for (int dx = 0; dx < 2; ++dx)
          for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz) m += at(2 * x + dx, 2 * y + dy, 2 * z + dz);
        m /= 8.0;
        CHECK(out[(x * 2 + y) * 2 + z] == doctest::Approx(m).epsilon(1e-14));
        out_mean += out[(x * 2 + y) * 2 + z];
      }
  out_mean /= 8.0;
  CHECK(out_mean == doctest::Approx(vol_mean).epsilon(1e-12));
}

TEST_CASE("down then up of a constant is the constant") {
  std::vector<double> v(8 * 8 * 1, 2.5);
  std::array<int, 3> mid_dims{};
  auto down = resample_trilinear(v, {8, 8, 1}, {2, 2, 1}, ResampleMode::down_average, &mid_dims);
  auto up = resample_trilinear(down, mid_dims, {2, 2, 1}, ResampleMode::up_trilinear);
  REQUIRE(up.size() == v.size());
  for (double x : up) CHECK(x == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("resample rejects non-integer output dims") {
  std::vector<double> v(5 * 4 * 4, 0.0);
  CHECK_THROWS_AS(resample_trilinear(v, {5, 4, 4}, {2, 2, 2}, ResampleMode::down_average),
                  std::invalid_argument);
}

TEST_CASE("trilinear_sample reproduces linear ramps in the interior") {
  std::array<int, 3> dims{5, 4, 3};
  std::vector<double> v(5 * 4 * 3);
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 3; ++z) v[(x * 4 + y) * 3 + z] = 2.0 * x - y + 0.5 * z;
  CHECK(trilinear_sample(v.data(), dims, 1.5, 2.25, 0.75) ==
        doctest::Approx(2.0 * 1.5 - 2.25 + 0.5 * 0.75).epsilon(1e-14));
  // clamped outside
  CHECK(trilinear_sample(v.data(), dims, -3.0, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
}
