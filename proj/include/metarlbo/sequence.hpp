#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace metarlbo::seqcore {

// Finite symbol set over single-character tokens. When `has_eos` is set a
// reserved terminal action (index == size()) is available to generators; the
// EOS marker is not a symbol and never appears inside a sequence body.
class Alphabet {
 public:
  Alphabet() { for (int& v : lookup_) v = -1; }
  explicit Alphabet(std::string symbols, bool has_eos = false);

  int size() const { return static_cast<int>(symbols_.size()); }
  bool has_eos() const { return has_eos_; }
  // Number of generator actions: size(), plus one for EOS when present.
  int action_count() const { return size() + (has_eos_ ? 1 : 0); }
  int eos_action() const { return size(); }

  char symbol(int index) const { return symbols_[static_cast<size_t>(index)]; }
  // Returns -1 for characters outside the alphabet.
  int index_of(char c) const {
    return lookup_[static_cast<unsigned char>(c)];
  }
  const std::string& symbols() const { return symbols_; }

  bool operator==(const Alphabet& other) const {
    return symbols_ == other.symbols_ && has_eos_ == other.has_eos_;
  }

 private:
  std::string symbols_;
  bool has_eos_ = false;
  int lookup_[256] = {};
};

// Token-index string. Comparison is lexicographic over token indices, which
// also serves as the deterministic tie-break order used by batch selection.
struct Sequence {
  std::vector<std::uint8_t> tokens;

  Sequence() = default;
  explicit Sequence(std::vector<std::uint8_t> t) : tokens(std::move(t)) {}

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::uint8_t operator[](std::size_t i) const { return tokens[i]; }
  void push_back(std::uint8_t t) { tokens.push_back(t); }

  auto operator<=>(const Sequence&) const = default;
};

struct SequenceHash {
  std::size_t operator()(const Sequence& s) const {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t t : s.tokens) {
      h ^= t;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

Sequence sequence_from_string(const Alphabet& a, std::string_view text);
std::string sequence_to_string(const Alphabet& a, const Sequence& s);

// Positionwise mismatch count; requires equal lengths.
int hamming_distance(const Sequence& a, const Sequence& b);
// Unit-cost Levenshtein distance.
int edit_distance(const Sequence& a, const Sequence& b);

// Capped variants returning min(distance, cap); used by the density penalty
// where only distances below a small threshold matter.
int bounded_hamming_distance(const Sequence& a, const Sequence& b, int cap);
int bounded_edit_distance(const Sequence& a, const Sequence& b, int cap);

}  // namespace metarlbo::seqcore
