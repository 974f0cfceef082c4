#include "metarlbo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "metarlbo/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace metarlbo {

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "metarlbo-checkpoint v1\n";
  for (const auto& [key, value] : header) out << key << ' ' << value << '\n';
  out << "tensors " << tensors.size() << '\n';
  std::size_t total = 0;
  for (const auto& t : tensors) {
    out << t.name << ' ' << t.shape.size();
    for (int d : t.shape) out << ' ' << d;
    out << '\n';
    total += t.size;
  }
  if (total != values.size()) {
    throw std::logic_error("checkpoint tensor sizes do not match data");
  }
  out << "binary\n";
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "metarlbo-checkpoint v1") {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  Checkpoint ckpt;
  while (std::getline(in, line)) {
    if (line.rfind("tensors ", 0) == 0) break;
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw std::runtime_error("malformed checkpoint header line: " + line);
    }
    ckpt.header.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  const std::size_t count = std::stoull(line.substr(8));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("truncated tensor table in " + path);
    }
    std::istringstream ss(line);
    nn::TensorSpec t;
    std::size_t ndim = 0;
    if (!(ss >> t.name >> ndim)) {
      throw std::runtime_error("malformed tensor line: " + line);
    }
    t.shape.resize(ndim);
    t.size = 1;
    for (auto& d : t.shape) {
      if (!(ss >> d) || d < 1) {
        throw std::runtime_error("malformed tensor shape: " + line);
      }
      t.size *= static_cast<std::size_t>(d);
    }
    t.offset = offset;
    offset += t.size;
    ckpt.tensors.push_back(std::move(t));
  }
  if (!std::getline(in, line) || line != "binary") {
    throw std::runtime_error("missing binary marker in " + path);
  }
  ckpt.values.resize(offset);
  in.read(reinterpret_cast<char*>(ckpt.values.data()),
          static_cast<std::streamsize>(offset * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(offset * sizeof(double))) {
    throw std::runtime_error("truncated checkpoint data in " + path);
  }
  return ckpt;
}

std::string Checkpoint::header_value(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw std::runtime_error("checkpoint header missing key '" + key + "'");
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for checksum: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())),
                h);
    if (!in) break;
  }
  return h;
}

}  // namespace metarlbo
