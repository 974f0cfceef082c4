#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace metarlbo::bench {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat sectioned key-value text:
//   [section]
//   key = value        # comment
// Keys are addressed as "section.key". See docs/config.md for the schema.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>");

  bool has(const std::string& path) const {
    return values_.find(path) != values_.end();
  }

  std::string get_string(const std::string& path) const;
  std::string get_string_or(const std::string& path,
                            const std::string& fallback) const;
  long long get_int(const std::string& path) const;
  long long get_int_or(const std::string& path, long long fallback) const;
  std::uint64_t get_u64_or(const std::string& path,
                           std::uint64_t fallback) const;
  double get_double(const std::string& path) const;
  double get_double_or(const std::string& path, double fallback) const;
  bool get_bool_or(const std::string& path, bool fallback) const;

  void set(const std::string& path, const std::string& value) {
    values_[path] = value;
  }

  // Sorted "path = value" lines; the run-directory name is derived from the
  // hash of this form.
  std::string canonical() const;
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace metarlbo::bench
