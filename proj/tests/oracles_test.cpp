#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "metarlbo/oracles.hpp"
#include "metarlbo/rng.hpp"

using namespace metarlbo;
using namespace metarlbo::oracles;
using seqcore::Alphabet;
using seqcore::Sequence;

namespace {

Sequence seq(const Alphabet& a, const std::string& text) {
  return seqcore::sequence_from_string(a, text);
}

// Independent enumerator: iterates every token string of the given length
// and applies the scorer directly.
template <typename Score>
std::pair<Sequence, double> enumerate_max(int alphabet_size, int length,
                                          Score&& score, int* count_max = nullptr) {
  Sequence s;
  s.tokens.assign(static_cast<std::size_t>(length), 0);
  Sequence best_seq = s;
  double best = score(s);
  int ties = 1;
  while (true) {
    int pos = length - 1;
    while (pos >= 0 && s.tokens[static_cast<std::size_t>(pos)] + 1 ==
                           alphabet_size) {
      s.tokens[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++s.tokens[static_cast<std::size_t>(pos)];
    const double v = score(s);
    if (v > best) {
      best = v;
      best_seq = s;
      ties = 1;
    } else if (v == best) {
      ++ties;
    }
  }
  if (count_max != nullptr) *count_max = ties;
  return {best_seq, best};
}

}  // namespace

TEST_CASE("ising score closed-form cases") {
  const Alphabet a("ABCD");
  CHECK(ising_score(seq(a, "ABABABAB")) == 8.0);
  CHECK(ising_score(seq(a, "AAAAAAAA")) == 1.0);
  CHECK(ising_score(seq(a, "ABCDABCD")) == 2.0);  // 4-cycle never repeats at lag 2
  CHECK(ising_score(seq(a, "ABAA")) == 3.0);      // positions 0,1,2 count
}

TEST_CASE("ising global maximum by full enumeration (L=8, A=4)") {
  const Alphabet a("ABCD");
  int ties = 0;
  const auto [best_seq, best] = enumerate_max(
      4, 8, [](const Sequence& s) { return ising_score(s); }, &ties);
  CHECK(best == 8.0);
  // Exactly A*(A-1) = 12 strict two-token alternations attain the maximum.
  CHECK(ties == 12);

  OracleSpec spec;
  spec.kind = OracleKind::ising_alternating;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 8;
  const auto bf = brute_force_max(spec, 1 << 20);
  CHECK(bf.max_score == 8.0);
  CHECK(bf.evaluated == 65536);
  CHECK(ising_score(bf.argmax) == 8.0);
  // Lexicographic tie-break: "ABABABAB" is the smallest maximizer.
  CHECK(seqcore::sequence_to_string(a, bf.argmax) == "ABABABAB");
}

TEST_CASE("ising maximum is attained only by two-token alternations") {
  const Alphabet a("ABC");
  for (int length = 2; length <= 7; ++length) {
    const auto check_all = [&](const Sequence& s) {
      const double v = ising_score(s);
      if (v == static_cast<double>(length)) {
        std::set<std::uint8_t> distinct(s.tokens.begin(), s.tokens.end());
        CHECK(distinct.size() == 2);
        for (std::size_t t = 2; t < s.size(); ++t) {
          CHECK(s[t] == s[t - 2]);
        }
      }
      return v;
    };
    enumerate_max(3, length, check_all);
  }
}

TEST_CASE("rna binding: perfect reverse complement scores 1.0") {
  const Alphabet a("ACGU");
  OracleSpec spec;
  spec.kind = OracleKind::rna_binding;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 14;
  spec.rna_target_length = 50;

  // Hand-built target with an all-G/C window at offset 10.
  Sequence target;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    target.push_back(static_cast<std::uint8_t>(rng.uniform_int(4)));
  }
  for (int i = 10; i < 24; ++i) {
    target.tokens[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(i % 2 == 0 ? a.index_of('G') : a.index_of('C'));
  }
  const Oracle oracle(spec, target);

  // Reverse complement of the window: complement pairs A<->U, C<->G.
  Sequence candidate;
  for (int i = 23; i >= 10; --i) {
    const char base = a.symbol(target[static_cast<std::size_t>(i)]);
    const char comp = base == 'G' ? 'C' : base == 'C' ? 'G' : base == 'A' ? 'U' : 'A';
    candidate.push_back(static_cast<std::uint8_t>(a.index_of(comp)));
  }
  CHECK(oracle.score(candidate) == doctest::Approx(1.0));
}

TEST_CASE("rna binding stays in [0,1] on random sequences") {
  const Alphabet a("ACGU");
  OracleSpec spec;
  spec.kind = OracleKind::rna_binding;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 14;
  spec.seed = 99;
  const Oracle oracle(spec);
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    Sequence s;
    for (int j = 0; j < 14; ++j) {
      s.push_back(static_cast<std::uint8_t>(rng.uniform_int(4)));
    }
    const double v = oracle.score(s);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("rna reduced instance matches the enumerator") {
  const Alphabet a("ACGU");
  OracleSpec spec;
  spec.kind = OracleKind::rna_binding;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 6;
  spec.seed = 12345;
  spec.rna_target_length = 12;
  const Oracle oracle(spec);

  const auto [best_seq, best] = enumerate_max(
      4, 6, [&](const Sequence& s) { return oracle.score(s); });
  const auto bf = brute_force_max(spec, 100000);
  CHECK(bf.evaluated == 4096);
  CHECK(bf.max_score == best);  // same oracle, same enumeration: bit-exact
  CHECK(oracle.score(bf.argmax) == bf.max_score);
}

TEST_CASE("landscape oracle: determinism, seed dependence, enumerator") {
  const Alphabet a("ACGT");
  Sequence s = seq(a, "ACGT");
  CHECK(landscape_score(s, 7) == landscape_score(s, 7));
  bool any_diff = false;
  for (std::uint64_t other = 8; other < 13; ++other) {
    any_diff = any_diff || landscape_score(s, other) != landscape_score(s, 7);
  }
  CHECK(any_diff);

  OracleSpec spec;
  spec.kind = OracleKind::random_landscape;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 4;
  spec.seed = 31;
  const Oracle oracle(spec);
  const auto [best_seq, best] = enumerate_max(
      4, 4, [&](const Sequence& s2) { return oracle.score(s2); });
  const auto bf = brute_force_max(spec, 100000);
  CHECK(bf.evaluated == 256);
  CHECK(bf.max_score == best);
  CHECK(bf.max_score >= 0.0);
  CHECK(bf.max_score <= 1.0);

  CHECK_THROWS_AS(landscape_score(Sequence{}, 1), std::invalid_argument);
}

TEST_CASE("oracle purity: identical inputs give identical outputs") {
  const Alphabet a("ABCD");
  OracleSpec spec;
  spec.kind = OracleKind::ising_alternating;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 8;
  const Oracle o1(spec), o2(spec);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Sequence s;
    for (int j = 0; j < 8; ++j) {
      s.push_back(static_cast<std::uint8_t>(rng.uniform_int(4)));
    }
    CHECK(o1.score(s) == o2.score(s));
  }
}

TEST_CASE("brute force rejects oversized spaces and handles L=1") {
  const Alphabet a("ABCD");
  OracleSpec spec;
  spec.kind = OracleKind::ising_alternating;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 8;
  CHECK_THROWS_AS(brute_force_max(spec, 1000), std::invalid_argument);

  spec.min_length = spec.max_length = 1;
  const auto bf = brute_force_max(spec, 10);
  CHECK(bf.evaluated == 4);
  CHECK(bf.max_score == 1.0);
  CHECK(bf.argmax.size() == 1);
}

TEST_CASE("query batch accounting and error context") {
  const Alphabet a("ABCD");
  OracleSpec spec;
  spec.kind = OracleKind::ising_alternating;
  spec.alphabet = a;
  spec.min_length = spec.max_length = 4;
  const Oracle oracle(spec);
  QueryLedger ledger;

  std::vector<Sequence> batch{seq(a, "ABAB"), seq(a, "AAAA"), seq(a, "ABCA")};
  const auto scores = query_batch(oracle, batch, ledger, 0);
  CHECK(scores == std::vector<double>{4.0, 1.0, 2.0});
  CHECK(ledger.total == 3);
  CHECK(ledger.per_round == std::vector<long long>{3});

  query_batch(oracle, batch, ledger, 2);
  CHECK(ledger.total == 6);
  REQUIRE(ledger.per_round.size() == 3);
  CHECK(ledger.per_round[1] == 0);
  CHECK(ledger.per_round[2] == 3);
  long long sum = 0;
  for (const auto v : ledger.per_round) sum += v;
  CHECK(sum == ledger.total);

  CHECK_THROWS_AS(query_batch(oracle, {}, ledger, 0), std::invalid_argument);
  std::vector<Sequence> bad{seq(a, "ABA")};
  CHECK_THROWS_WITH_AS(query_batch(oracle, bad, ledger, 0),
                       doctest::Contains("sequence 0"), std::runtime_error);
}
