#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "metarlbo/rng.hpp"
#include "metarlbo/sequence.hpp"

namespace metarlbo::seqcore {

struct ScoredSequence {
  Sequence seq;
  double score = 0.0;
  int round = 0;
};

// Append-only store of oracle-scored sequences with exact-duplicate rejection.
// One writer (the round orchestrator) and any number of concurrent readers;
// writes happen only at round barriers, so readers never observe a mutation.
class Dataset {
 public:
  explicit Dataset(Alphabet alphabet) : alphabet_(std::move(alphabet)) {}

  // Appends unless the exact token string is already present. Returns whether
  // the entry was appended. Throws on non-finite score.
  bool insert(const Sequence& seq, double score, int round);

  bool contains(const Sequence& seq) const {
    return index_.find(seq) != index_.end();
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ScoredSequence>& entries() const { return entries_; }
  const ScoredSequence& entry(std::size_t i) const { return entries_[i]; }
  const Alphabet& alphabet() const { return alphabet_; }

  // Running maximum of scores in insertion order; same length as entries().
  const std::vector<double>& cumulative_max() const { return cum_max_; }
  double best_score() const;

  // Uniform subsample without replacement of size ceil(p * size()), at least
  // one element, in insertion order. Deterministic for a fixed rng state.
  std::vector<ScoredSequence> subsample(double p, Rng& rng) const;

  // Line-oriented text format: header naming the alphabet, then one
  // `<round>\t<score>\t<tokens>` line per entry. Round-trips losslessly.
  void save(const std::string& path) const;
  static Dataset load(const std::string& path);

 private:
  Alphabet alphabet_;
  std::vector<ScoredSequence> entries_;
  std::vector<double> cum_max_;
  std::unordered_map<Sequence, std::size_t, SequenceHash> index_;
};

}  // namespace metarlbo::seqcore
