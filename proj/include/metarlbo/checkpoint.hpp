#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metarlbo/nn.hpp"

namespace metarlbo {

// Flat list of named parameter tensors with shapes plus a text header of
// key/value pairs (architecture, geometry). Values are little-endian 64-bit
// floats written verbatim, so save/load round-trips bit-exactly.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<nn::TensorSpec> tensors;
  std::vector<double> values;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  std::string header_value(const std::string& key) const;
};

std::uint64_t file_checksum(const std::string& path);

}  // namespace metarlbo
