#ifndef DYNMPI_CONFIG_HPP
#define DYNMPI_CONFIG_HPP

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynmpi {

/// Configuration problems exit the CLI with code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plain-text "section.key = value" configuration. '#' starts a comment.
/// Unknown keys are rejected with their key path.
class Config {
public:
  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  void apply_override(const std::string& key_equals_value);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::array<double, 3> get_vec3(const std::string& key, std::array<double, 3> fallback) const;
  std::array<int, 3> get_ivec3(const std::string& key, std::array<int, 3> fallback) const;
  std::vector<double> get_list(const std::string& key) const;  // empty if absent

  /// FNV-1a over the normalized sorted key=value lines.
  std::uint64_t content_hash() const;
  std::string dump() const;

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  void validate_key(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t h = 1469598103934665603ull);
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace dynmpi

#endif
