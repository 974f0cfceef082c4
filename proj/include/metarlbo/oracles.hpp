#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metarlbo/sequence.hpp"

namespace metarlbo::oracles {

using seqcore::Alphabet;
using seqcore::Sequence;

enum class OracleKind { ising_alternating, rna_binding, random_landscape };

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& name);

struct OracleSpec {
  OracleKind kind = OracleKind::ising_alternating;
  Alphabet alphabet;
  int min_length = 0;
  int max_length = 0;
  std::uint64_t seed = 0;
  int rna_target_length = 50;

  bool fixed_length() const { return min_length == max_length; }
  void validate() const;
};

// Per-position alternation score: position 0 always counts, position 1 counts
// when it differs from its predecessor, and every later position counts when
// it differs from its predecessor and repeats the token two back. Range
// [1, L]; the maximum L is attained exactly by strict two-token alternations.
double ising_score(const Sequence& s);

// Complementarity proxy for negative binding energy against a hidden target:
// the reversed candidate is slid over every target window and aligned pairs
// are scored 3 (G.C), 2 (A.U), 1 (G.U wobble), 0 otherwise; the best window
// total is normalized by 3*|s| into [0, 1].
double rna_binding_score(const Sequence& s, const Sequence& target,
                         const Alphabet& alphabet);

// Seeded synthetic fitness landscape: mean of per-position k-mer weights
// (k = 3, each weight a unit normal derived from (seed, k-mer)), squashed
// through a logistic into (0, 1). Deterministic per (seed, sequence).
double landscape_score(const Sequence& s, std::uint64_t seed);

// Ground-truth scoring function bound to a task geometry. Stateless after
// construction; safe for concurrent evaluation.
class Oracle {
 public:
  explicit Oracle(OracleSpec spec);
  // Test hook: rna_binding with an explicit hidden target.
  Oracle(OracleSpec spec, Sequence rna_target);

  double score(const Sequence& s) const;
  const OracleSpec& spec() const { return spec_; }
  const Sequence& rna_target() const { return rna_target_; }

 private:
  void check_geometry(const Sequence& s) const;

  OracleSpec spec_;
  Sequence rna_target_;
};

struct QueryLedger {
  long long total = 0;
  std::vector<long long> per_round;

  void record(int round, long long n);
};

// Scores a batch in input order and charges |batch| queries to the round.
std::vector<double> query_batch(const Oracle& oracle,
                                const std::vector<Sequence>& batch,
                                QueryLedger& ledger, int round);

struct BruteForceResult {
  Sequence argmax;
  double max_score = 0.0;
  std::uint64_t evaluated = 0;
};

// Exact maximum by full enumeration; ties resolved toward the
// lexicographically smallest token string. Refuses search spaces larger than
// max_enumeration.
BruteForceResult brute_force_max(const OracleSpec& spec,
                                 std::uint64_t max_enumeration);

}  // namespace metarlbo::oracles
