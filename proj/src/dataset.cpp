#include "metarlbo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace metarlbo::seqcore {

bool Dataset::insert(const Sequence& seq, double score, int round) {
  if (!std::isfinite(score)) {
    throw std::invalid_argument("dataset insert: non-finite score");
  }
  if (index_.find(seq) != index_.end()) return false;
  index_.emplace(seq, entries_.size());
  entries_.push_back(ScoredSequence{seq, score, round});
  cum_max_.push_back(cum_max_.empty() ? score
                                      : std::max(cum_max_.back(), score));
  return true;
}

double Dataset::best_score() const {
  return cum_max_.empty() ? -std::numeric_limits<double>::infinity()
                          : cum_max_.back();
}

std::vector<ScoredSequence> Dataset::subsample(double p, Rng& rng) const {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("subsample fraction must be in (0, 1]");
  }
  if (entries_.empty()) {
    throw std::invalid_argument("cannot subsample an empty dataset");
  }
  const auto n = entries_.size();
  auto m = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  m = std::max<std::size_t>(1, std::min(m, n));
  if (m == n) return entries_;

  // Partial Fisher-Yates over an index array, then restore insertion order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  std::vector<ScoredSequence> out;
  out.reserve(m);
  for (std::size_t i : idx) out.push_back(entries_[i]);
  return out;
}

void Dataset::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# metarlbo-dataset v1\talphabet=" << alphabet_.symbols()
      << "\teos=" << (alphabet_.has_eos() ? 1 : 0) << "\n";
  char buf[64];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof buf, "%.17g", e.score);
    out << e.round << '\t' << buf << '\t'
        << sequence_to_string(alphabet_, e.seq) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset Dataset::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("empty dataset file: " + path);
  }
  const std::string magic = "# metarlbo-dataset v1\talphabet=";
  if (header.rfind(magic, 0) != 0) {
    throw std::runtime_error("bad dataset header in " + path);
  }
  const auto eos_pos = header.find("\teos=", magic.size());
  if (eos_pos == std::string::npos) {
    throw std::runtime_error("bad dataset header in " + path);
  }
  const std::string symbols = header.substr(magic.size(), eos_pos - magic.size());
  const bool has_eos = header.substr(eos_pos + 5) == "1";

  Dataset ds{Alphabet(symbols, has_eos)};
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed dataset line");
    }
    const int round = std::stoi(line.substr(0, t1));
    const double score = std::stod(line.substr(t1 + 1, t2 - t1 - 1));
    const Sequence seq =
        sequence_from_string(ds.alphabet_, line.substr(t2 + 1));
    ds.insert(seq, score, round);
  }
  return ds;
}

}  // namespace metarlbo::seqcore
