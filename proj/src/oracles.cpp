#include "metarlbo/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metarlbo/rng.hpp"

namespace metarlbo::oracles {

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::ising_alternating: return "ising";
    case OracleKind::rna_binding: return "rna";
    case OracleKind::random_landscape: return "landscape";
  }
  return "?";
}

OracleKind oracle_kind_from_string(const std::string& name) {
  if (name == "ising") return OracleKind::ising_alternating;
  if (name == "rna") return OracleKind::rna_binding;
  if (name == "landscape") return OracleKind::random_landscape;
  throw std::invalid_argument("unknown oracle kind '" + name +
                              "' (expected ising|rna|landscape)");
}

void OracleSpec::validate() const {
  if (min_length < 1 || max_length < min_length) {
    throw std::invalid_argument("oracle lengths must satisfy 1 <= min <= max");
  }
  if (kind == OracleKind::rna_binding) {
    if (alphabet.size() != 4) {
      throw std::invalid_argument("rna oracle requires a 4-letter alphabet");
    }
    if (!fixed_length()) {
      throw std::invalid_argument("rna oracle requires a fixed length");
    }
    if (rna_target_length < max_length) {
      throw std::invalid_argument("rna target shorter than the candidate");
    }
  }
  if (kind == OracleKind::ising_alternating && !fixed_length()) {
    throw std::invalid_argument("ising oracle requires a fixed length");
  }
}

double ising_score(const Sequence& s) {
  if (s.empty()) throw std::invalid_argument("ising_score: empty sequence");
  double score = 1.0;
  if (s.size() >= 2 && s[1] != s[0]) score += 1.0;
  for (std::size_t t = 2; t < s.size(); ++t) {
    if (s[t] != s[t - 1] && s[t] == s[t - 2]) score += 1.0;
  }
  return score;
}

namespace {

// Unordered base-pair strength: G.C=3, A.U=2, G.U=1.
int pair_weight(char x, char y) {
  if (x > y) std::swap(x, y);
  if (x == 'C' && y == 'G') return 3;
  if (x == 'A' && y == 'U') return 2;
  if (x == 'G' && y == 'U') return 1;
  return 0;
}

}  // namespace

double rna_binding_score(const Sequence& s, const Sequence& target,
                         const Alphabet& alphabet) {
  if (s.empty()) throw std::invalid_argument("rna score: empty sequence");
  if (target.size() < s.size()) {
    throw std::invalid_argument("rna score: target shorter than candidate");
  }
  for (char c : std::string("ACGU")) {
    if (alphabet.index_of(c) < 0) {
      throw std::invalid_argument("rna score: alphabet must contain A,C,G,U");
    }
  }
  const std::size_t n = s.size();
  // Precompute the per-position weights of the 3'->5' flipped candidate
  // against each of the four target bases.
  int best = 0;
  for (std::size_t w = 0; w + n <= target.size(); ++w) {
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const char cand = alphabet.symbol(s[n - 1 - i]);
      const char targ = alphabet.symbol(target[w + i]);
      total += pair_weight(cand, targ);
    }
    best = std::max(best, total);
  }
  return static_cast<double>(best) / (3.0 * static_cast<double>(n));
}

double landscape_score(const Sequence& s, std::uint64_t seed) {
  if (s.empty()) {
    throw std::invalid_argument("landscape_score: empty sequence");
  }
  const std::size_t k = std::min<std::size_t>(3, s.size());
  const std::size_t n = s.size() - k + 1;
  const std::uint64_t base = derive_seed(seed, "landscape_kmer");
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::string_view kmer(
        reinterpret_cast<const char*>(s.tokens.data() + j), k);
    Rng stream(base ^ fnv1a64(kmer));
    sum += stream.normal();
  }
  const double mean = sum / static_cast<double>(n);
  const double gain = 3.0;
  return 1.0 / (1.0 + std::exp(-gain * mean));
}

Oracle::Oracle(OracleSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == OracleKind::rna_binding) {
    Rng rng(derive_seed(spec_.seed, "rna_target"));
    rna_target_.tokens.resize(static_cast<std::size_t>(spec_.rna_target_length));
    for (auto& t : rna_target_.tokens) {
      t = static_cast<std::uint8_t>(
          rng.uniform_int(static_cast<std::uint64_t>(spec_.alphabet.size())));
    }
  }
}

Oracle::Oracle(OracleSpec spec, Sequence rna_target)
    : spec_(std::move(spec)), rna_target_(std::move(rna_target)) {
  spec_.validate();
  if (spec_.kind != OracleKind::rna_binding) {
    throw std::invalid_argument("explicit target only valid for rna oracles");
  }
  if (static_cast<int>(rna_target_.size()) != spec_.rna_target_length) {
    throw std::invalid_argument("rna target length mismatch");
  }
}

void Oracle::check_geometry(const Sequence& s) const {
  const auto len = static_cast<int>(s.size());
  if (len < spec_.min_length || len > spec_.max_length) {
    throw std::invalid_argument(
        "sequence length " + std::to_string(len) + " outside oracle range [" +
        std::to_string(spec_.min_length) + ", " +
        std::to_string(spec_.max_length) + "]");
  }
  for (std::uint8_t t : s.tokens) {
    if (t >= spec_.alphabet.size()) {
      throw std::invalid_argument("sequence token outside oracle alphabet");
    }
  }
}

double Oracle::score(const Sequence& s) const {
  check_geometry(s);
  switch (spec_.kind) {
    case OracleKind::ising_alternating: return ising_score(s);
    case OracleKind::rna_binding:
      return rna_binding_score(s, rna_target_, spec_.alphabet);
    case OracleKind::random_landscape: return landscape_score(s, spec_.seed);
  }
  throw std::logic_error("unreachable oracle kind");
}

void QueryLedger::record(int round, long long n) {
  if (round < 0) throw std::invalid_argument("ledger round must be >= 0");
  if (per_round.size() <= static_cast<std::size_t>(round)) {
    per_round.resize(static_cast<std::size_t>(round) + 1, 0);
  }
  per_round[static_cast<std::size_t>(round)] += n;
  total += n;
}

std::vector<double> query_batch(const Oracle& oracle,
                                const std::vector<Sequence>& batch,
                                QueryLedger& ledger, int round) {
  if (batch.empty()) throw std::invalid_argument("query_batch: empty batch");
  std::vector<double> scores;
  scores.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      scores.push_back(oracle.score(batch[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("query_batch: sequence " + std::to_string(i) +
                               ": " + e.what());
    }
  }
  ledger.record(round, static_cast<long long>(batch.size()));
  return scores;
}

BruteForceResult brute_force_max(const OracleSpec& spec,
                                 std::uint64_t max_enumeration) {
  spec.validate();
  const auto a = static_cast<std::uint64_t>(spec.alphabet.size());
  std::uint64_t count = 0;
  for (int len = spec.min_length; len <= spec.max_length; ++len) {
    std::uint64_t states = 1;
    for (int i = 0; i < len; ++i) {
      if (states > max_enumeration / a) {
        throw std::invalid_argument("search space exceeds enumeration cap");
      }
      states *= a;
    }
    count += states;
    if (count > max_enumeration) {
      throw std::invalid_argument("search space exceeds enumeration cap");
    }
  }

  const Oracle oracle(spec);
  BruteForceResult result;
  bool first = true;
  // Lengths ascending, token strings in lexicographic order within a length,
  // so keeping strict improvements yields the lexicographically smallest
  // argmax.
  for (int len = spec.min_length; len <= spec.max_length; ++len) {
    Sequence s;
    s.tokens.assign(static_cast<std::size_t>(len), 0);
    while (true) {
      const double score = oracle.score(s);
      ++result.evaluated;
      if (first || score > result.max_score) {
        first = false;
        result.max_score = score;
        result.argmax = s;
      }
      int pos = len - 1;
      while (pos >= 0 &&
             s.tokens[static_cast<std::size_t>(pos)] + 1ull == a) {
        s.tokens[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++s.tokens[static_cast<std::size_t>(pos)];
    }
  }
  return result;
}

}  // namespace metarlbo::oracles
