#include "metarlbo/sequence.hpp"

#include <algorithm>
#include <stdexcept>

namespace metarlbo::seqcore {

Alphabet::Alphabet(std::string symbols, bool has_eos)
    : symbols_(std::move(symbols)), has_eos_(has_eos) {
  if (symbols_.size() < 2) {
    throw std::invalid_argument("alphabet needs at least 2 symbols");
  }
  std::fill(std::begin(lookup_), std::end(lookup_), -1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[c] != -1) {
      throw std::invalid_argument("alphabet symbols must be distinct");
    }
    lookup_[c] = static_cast<int>(i);
  }
}

Sequence sequence_from_string(const Alphabet& a, std::string_view text) {
  Sequence s;
  s.tokens.reserve(text.size());
  for (char c : text) {
    const int idx = a.index_of(c);
    if (idx < 0) {
      throw std::invalid_argument(std::string("symbol '") + c +
                                  "' not in alphabet " + a.symbols());
    }
    s.tokens.push_back(static_cast<std::uint8_t>(idx));
  }
  return s;
}

std::string sequence_to_string(const Alphabet& a, const Sequence& s) {
  std::string out;
  out.reserve(s.size());
  for (std::uint8_t t : s.tokens) out.push_back(a.symbol(t));
  return out;
}

int hamming_distance(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(
        "hamming_distance requires equal lengths; use edit_distance");
  }
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

int bounded_hamming_distance(const Sequence& a, const Sequence& b, int cap) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(
        "bounded_hamming_distance requires equal lengths");
  }
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] != b[i];
    if (d >= cap) return cap;
  }
  return d;
}

int edit_distance(const Sequence& a, const Sequence& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return static_cast<int>(m);
  if (m == 0) return static_cast<int>(n);
  std::vector<int> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int saved = row[j];
      const int sub = diag + (a[i - 1] != b[j - 1]);
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
      diag = saved;
    }
  }
  return row[m];
}

int bounded_edit_distance(const Sequence& a, const Sequence& b, int cap) {
  const auto n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  if (std::abs(n - m) >= cap) return cap;
  if (n == 0 || m == 0) return std::min(cap, std::max(n, m));
  std::vector<int> row(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) row[static_cast<std::size_t>(j)] = j;
  for (int i = 1; i <= n; ++i) {
    int diag = row[0];
    row[0] = i;
    int row_min = row[0];
    for (int j = 1; j <= m; ++j) {
      const int saved = row[static_cast<std::size_t>(j)];
      const int sub = diag + (a[static_cast<std::size_t>(i - 1)] !=
                              b[static_cast<std::size_t>(j - 1)]);
      row[static_cast<std::size_t>(j)] =
          std::min({row[static_cast<std::size_t>(j)] + 1,
                    row[static_cast<std::size_t>(j - 1)] + 1, sub});
      row_min = std::min(row_min, row[static_cast<std::size_t>(j)]);
      diag = saved;
    }
    if (row_min >= cap) return cap;
  }
  return std::min(row[static_cast<std::size_t>(m)], cap);
}

}  // namespace metarlbo::seqcore
