#include "metarlbo/config.hpp"

#include <fstream>
#include <sstream>

#include "metarlbo/rng.hpp"

namespace metarlbo::bench {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str(), path);
}

Config Config::from_string(const std::string& text,
                           const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.resize(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" +
                        key + "' outside any [section]");
    }
    cfg.values_[section + "." + key] = value;
  }
  return cfg;
}

std::string Config::get_string(const std::string& path) const {
  const auto it = values_.find(path);
  if (it == values_.end()) {
    throw ConfigError("missing required config field '" + path + "'");
  }
  return it->second;
}

std::string Config::get_string_or(const std::string& path,
                                  const std::string& fallback) const {
  const auto it = values_.find(path);
  return it == values_.end() ? fallback : it->second;
}

long long Config::get_int(const std::string& path) const {
  const std::string raw = get_string(path);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + path + "': '" + raw +
                      "' is not an integer");
  }
}

long long Config::get_int_or(const std::string& path, long long fallback) const {
  return has(path) ? get_int(path) : fallback;
}

std::uint64_t Config::get_u64_or(const std::string& path,
                                 std::uint64_t fallback) const {
  if (!has(path)) return fallback;
  const std::string raw = get_string(path);
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + path + "': '" + raw +
                      "' is not an unsigned integer");
  }
}

double Config::get_double(const std::string& path) const {
  const std::string raw = get_string(path);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + path + "': '" + raw +
                      "' is not a number");
  }
}

double Config::get_double_or(const std::string& path, double fallback) const {
  return has(path) ? get_double(path) : fallback;
}

bool Config::get_bool_or(const std::string& path, bool fallback) const {
  if (!has(path)) return fallback;
  const std::string raw = get_string(path);
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") {
    return false;
  }
  throw ConfigError("config field '" + path + "': '" + raw +
                    "' is not a boolean");
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t Config::hash() const { return fnv1a64(canonical()); }

}  // namespace metarlbo::bench
