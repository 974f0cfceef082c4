#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "metarlbo/dataset.hpp"
#include "metarlbo/rng.hpp"
#include "metarlbo/sequence.hpp"

using namespace metarlbo;
using namespace metarlbo::seqcore;

namespace {

Sequence seq(const Alphabet& a, const std::string& text) {
  return sequence_from_string(a, text);
}

Sequence random_sequence(const Alphabet& a, std::size_t len, Rng& rng) {
  Sequence s;
  s.tokens.resize(len);
  for (auto& t : s.tokens) {
    t = static_cast<std::uint8_t>(
        rng.uniform_int(static_cast<std::uint64_t>(a.size())));
  }
  return s;
}

// Full-matrix Levenshtein, kept independent of the two-row implementation
// under test.
int dp_oracle_edit(const Sequence& a, const Sequence& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return dp[n][m];
}

}  // namespace

TEST_CASE("alphabet basics and validation") {
  const Alphabet a("ACGT");
  CHECK(a.size() == 4);
  CHECK(a.index_of('G') == 2);
  CHECK(a.index_of('X') == -1);
  CHECK(a.action_count() == 4);

  const Alphabet with_eos("ACGT", true);
  CHECK(with_eos.action_count() == 5);
  CHECK(with_eos.eos_action() == 4);

  CHECK_THROWS_AS(Alphabet("A"), std::invalid_argument);
  CHECK_THROWS_AS(Alphabet("AAB"), std::invalid_argument);
}

TEST_CASE("sequence string round trip") {
  const Alphabet a("ACGT");
  const Sequence s = seq(a, "GATTACA");
  CHECK(sequence_to_string(a, s) == "GATTACA");
  CHECK_THROWS_AS(seq(a, "GATTAXA"), std::invalid_argument);
}

TEST_CASE("hamming distance examples") {
  const Alphabet a("AB");
  CHECK(hamming_distance(seq(a, "AAAA"), seq(a, "AAAA")) == 0);
  CHECK(hamming_distance(seq(a, "ABAB"), seq(a, "BABA")) == 4);
  const Alphabet dna("ACGT");
  CHECK(hamming_distance(seq(dna, "ACGT"), seq(dna, "ACGA")) == 1);
  CHECK_THROWS_AS(hamming_distance(seq(a, "AA"), seq(a, "AAA")),
                  std::invalid_argument);
}

TEST_CASE("edit distance examples") {
  const Alphabet a("ABEGIKNST");
  CHECK(edit_distance(Sequence{}, seq(a, "AB")) == 2);
  const Sequence kitten = seq(a, "KITTEN");
  const Sequence sitting = seq(a, "SITTING");
  CHECK(dp_oracle_edit(kitten, sitting) == 3);
  CHECK(edit_distance(kitten, sitting) == 3);
  CHECK(edit_distance(kitten, kitten) == 0);
}

TEST_CASE("distances agree with the DP oracle and satisfy metric axioms") {
  const Alphabet a("ACGT");
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto la = 1 + rng.uniform_int(10);
    const auto lb = 1 + rng.uniform_int(10);
    const Sequence x = random_sequence(a, la, rng);
    const Sequence y = random_sequence(a, lb, rng);
    const Sequence z = random_sequence(a, 1 + rng.uniform_int(10), rng);

    const int dxy = edit_distance(x, y);
    CHECK(dxy == dp_oracle_edit(x, y));
    CHECK(dxy == edit_distance(y, x));
    CHECK((dxy == 0) == (x == y));
    CHECK(dxy <= edit_distance(x, z) + edit_distance(z, y));

    for (int cap = 1; cap <= 4; ++cap) {
      CHECK(bounded_edit_distance(x, y, cap) == std::min(dxy, cap));
    }

    if (la == lb) {
      const int h = hamming_distance(x, y);
      CHECK(dxy <= h);
      if (h <= 1) CHECK(dxy == h);
      CHECK(bounded_hamming_distance(x, y, 3) == std::min(h, 3));
    }
  }
}

TEST_CASE("dataset insert, duplicates, cumulative max") {
  const Alphabet a("AB");
  Dataset d(a);
  CHECK(d.insert(seq(a, "AAB"), 1.0, 0));
  CHECK_FALSE(d.insert(seq(a, "AAB"), 5.0, 0));
  CHECK(d.size() == 1);
  CHECK(d.insert(seq(a, "ABB"), 0.5, 0));
  CHECK(d.insert(seq(a, "BBB"), 2.0, 1));
  CHECK(d.cumulative_max() == std::vector<double>{1.0, 1.0, 2.0});
  CHECK(d.best_score() == 2.0);
  CHECK_THROWS_AS(d.insert(seq(a, "BBA"), std::nan(""), 1),
                  std::invalid_argument);

  for (std::size_t i = 1; i < d.cumulative_max().size(); ++i) {
    CHECK(d.cumulative_max()[i] >= d.cumulative_max()[i - 1]);
  }
}

TEST_CASE("dataset subsample size, determinism, subset property") {
  const Alphabet a("ACGT");
  Dataset d(a);
  Rng fill(3);
  while (d.size() < 100) {
    d.insert(random_sequence(a, 8, fill), fill.uniform(), 0);
  }

  Rng r1(42), r2(42), r3(43);
  const auto s1 = d.subsample(0.8, r1);
  CHECK(s1.size() == 80);
  const auto s2 = d.subsample(0.8, r2);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].seq == s2[i].seq);  // bit-for-bit reproducible
  }
  const auto s3 = d.subsample(0.8, r3);
  bool same = s3.size() == s1.size();
  if (same) {
    same = std::equal(s1.begin(), s1.end(), s3.begin(),
                      [](const auto& x, const auto& y) { return x.seq == y.seq; });
  }
  CHECK_FALSE(same);

  for (const auto& e : s1) CHECK(d.contains(e.seq));

  Rng r4(1);
  CHECK(d.subsample(1.0, r4).size() == d.size());
  CHECK(d.subsample(0.001, r4).size() == 1);  // ceil with minimum 1
  CHECK_THROWS_AS(d.subsample(0.0, r4), std::invalid_argument);
  CHECK_THROWS_AS(d.subsample(1.5, r4), std::invalid_argument);
}

TEST_CASE("dataset save/load round trip is lossless") {
  const Alphabet a("ACGU");
  Dataset d(a);
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    d.insert(random_sequence(a, 1 + rng.uniform_int(12), rng),
             rng.normal(0.0, 3.0), i % 4);
  }
  const auto path = std::filesystem::temp_directory_path() /
                    "metarlbo_dataset_roundtrip.tsv";
  d.save(path.string());
  const Dataset loaded = Dataset::load(path.string());
  REQUIRE(loaded.size() == d.size());
  CHECK(loaded.alphabet() == d.alphabet());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(loaded.entry(i).seq == d.entry(i).seq);
    CHECK(loaded.entry(i).score == d.entry(i).score);  // bit-exact via %.17g
    CHECK(loaded.entry(i).round == d.entry(i).round);
  }
  std::filesystem::remove(path);
}

TEST_CASE("rng streams are deterministic and split independently") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "y", 0));
  CHECK(derive_seed(1, "x", 2, 3) != derive_seed(1, "x", 3, 2));
  CHECK(derive_seed(1, "x", 5) == derive_seed(1, "x", 5));

  Rng u(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += u.uniform();
  mean /= n;
  CHECK(std::abs(mean - 0.5) < 0.01);
}
