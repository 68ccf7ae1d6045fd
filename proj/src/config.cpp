#include "dynmpi/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dynmpi {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scanner.gradient",          "scanner.drive_amplitudes", "scanner.drive_divisors",
      "scanner.base_frequency",    "scanner.sample_rate",      "scanner.coil_axes",
      "particle.core_diameter",    "particle.saturation_magnetization",
      "particle.temperature",      "particle.beta",            "particle.m0",
      "grid.recon_dims",           "grid.recon_voxel_size",    "grid.sim_refine",
      "phantom.kind",              "phantom.ball_radius",      "phantom.circle_diameter",
      "phantom.z_pitch",           "phantom.rod_length",       "phantom.rod_width",
      "phantom.center",            "phantom.intensity",        "phantom.frames",
      "phantom.angular_speed",     "phantom.phase0",
      "noise.level",               "noise.seed",
      "preprocessing.mode",        "preprocessing.max_mixing_order",
      "preprocessing.min_frequency", "preprocessing.snr_threshold",
      "preprocessing.row_normalize",
      "recon.algorithm",           "recon.alpha1",             "recon.alpha2",
      "recon.gamma",               "recon.batches",            "recon.stage_iters",
      "recon.positivity",
      "recon.alternations",        "recon.seed",               "recon.init",
      "kaczmarz.lambda",           "kaczmarz.sweeps",          "kaczmarz.positivity",
      "kaczmarz.average_frames",
      "motion.regularizer",        "motion.beta",              "motion.levels",
      "motion.scale_factor",       "motion.warp_increments",   "motion.solver_iters",
      "matrix.element_budget",     "pipeline.threads",
      "paths.out",
      "sweep.alpha1",              "sweep.alpha2",             "sweep.gamma",
      "sweep.kaczmarz_lambda",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::validate_key(const std::string& key) const {
  if (!known_keys().count(key)) throw config_error("unknown config key: " + key);
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::apply_override(const std::string& key_equals_value) {
  const auto eq = key_equals_value.find('=');
  if (eq == std::string::npos)
    throw config_error("override must look like section.key=value: " + key_equals_value);
  set(trim(key_equals_value.substr(0, eq)), trim(key_equals_value.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  validate_key(key);
  if (value.empty()) throw config_error("empty value for config key: " + key);
  values_[key] = value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  validate_key(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  validate_key(key);
  auto it = values_.find(key);
  if (it == values_.end()) throw config_error("missing required config key: " + key);
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  validate_key(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw config_error("config key " + key + ": not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  const int i = static_cast<int>(v);
  if (v != i) throw config_error("config key " + key + ": not an integer");
  return i;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  validate_key(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw config_error("config key " + key + ": not an unsigned integer");
  }
}

std::vector<double> Config::get_list(const std::string& key) const {
  validate_key(key);
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::vector<double> out;
  std::istringstream is(it->second);
  std::string tok;
  while (is >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw config_error("config key " + key + ": not a number list: " + it->second);
    }
  }
  return out;
}

std::array<double, 3> Config::get_vec3(const std::string& key,
                                       std::array<double, 3> fallback) const {
  auto list = get_list(key);
  if (list.empty()) return fallback;
  if (list.size() != 3) throw config_error("config key " + key + ": expected 3 values");
  return {list[0], list[1], list[2]};
}

std::array<int, 3> Config::get_ivec3(const std::string& key,
                                     std::array<int, 3> fallback) const {
  auto list = get_list(key);
  if (list.empty()) return fallback;
  if (list.size() != 3) throw config_error("config key " + key + ": expected 3 values");
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) {
    out[a] = static_cast<int>(list[a]);
    if (list[a] != out[a]) throw config_error("config key " + key + ": expected integers");
  }
  return out;
}

std::string Config::dump() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

std::uint64_t Config::content_hash() const {
  const std::string text = dump();
  return fnv1a(text.data(), text.size());
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("hash_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace dynmpi
