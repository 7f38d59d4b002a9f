#pragma once

// Finite-type input constraints defined by forbidden-word lists.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmrate/error.hpp"
#include "hmrate/linalg.hpp"

namespace hmrate {

/// A word over a dense symbol index alphabet.
using Word = std::vector<int>;

/// A 2-word (x, y) in dense indices.
struct SymbolPair {
  int first;
  int second;
  bool operator==(const SymbolPair&) const = default;
};

using Adjacency = BasicMatrix<int>;

namespace detail {

inline bool contains_factor(const Word& word, const Word& factor) {
  if (factor.size() > word.size()) return false;
  return std::search(word.begin(), word.end(), factor.begin(), factor.end()) != word.end();
}

inline Adjacency bool_product(const Adjacency& a, const Adjacency& b) {
  const std::size_t n = a.rows();
  Adjacency out(n, n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (!a(i, k)) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (b(k, j)) out(i, j) = 1;
    }
  return out;
}

inline bool all_positive(const Adjacency& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (!a(i, j)) return false;
  return true;
}

}  // namespace detail

/// Smallest e with A^e entrywise positive, searched up to the Wielandt bound
/// (n-1)^2 + 1. Returns nullopt when A is not primitive.
inline std::optional<int> primitivity_exponent(const Adjacency& a) {
  const std::size_t n = a.rows();
  if (n == 0) return std::nullopt;
  const std::size_t bound = (n - 1) * (n - 1) + 1;
  Adjacency power = a;
  for (std::size_t e = 1; e <= bound; ++e) {
    if (detail::all_positive(power)) return static_cast<int>(e);
    power = detail::bool_product(power, a);
  }
  return std::nullopt;
}

/// A finite-type constraint of topological order at most 1. Symbols are
/// single characters; index i of `alphabet()` is the dense symbol id used by
/// every downstream matrix.
class Constraint {
 public:
  const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
  std::size_t size() const noexcept { return alphabet_.size(); }
  const std::vector<Word>& forbidden() const noexcept { return forbidden_; }
  const Adjacency& adjacency() const noexcept { return adjacency_; }
  const std::vector<SymbolPair>& allowed_pairs() const noexcept { return allowed_pairs_; }

  /// Maximal forbidden length minus one (0 for an empty list).
  int order_bound() const noexcept { return order_bound_; }
  bool mixing() const noexcept { return primitivity_exponent_.has_value(); }
  std::optional<int> primitivity_exponent() const noexcept { return primitivity_exponent_; }

  bool allowed(int x, int y) const { return adjacency_(x, y) != 0; }

  /// Position of (x, y) in `allowed_pairs()`, or -1.
  int pair_index(int x, int y) const {
    for (std::size_t i = 0; i < allowed_pairs_.size(); ++i)
      if (allowed_pairs_[i].first == x && allowed_pairs_[i].second == y) return static_cast<int>(i);
    return -1;
  }

  std::optional<int> symbol_index(const std::string& symbol) const {
    for (std::size_t i = 0; i < alphabet_.size(); ++i)
      if (alphabet_[i] == symbol) return static_cast<int>(i);
    return std::nullopt;
  }

  Word parse_word(const std::string& text) const {
    Word w;
    for (char ch : text) {
      auto idx = symbol_index(std::string(1, ch));
      if (!idx) fail(ErrorCode::ForeignSymbol, "symbol '" + std::string(1, ch) + "' not in alphabet");
      w.push_back(*idx);
    }
    return w;
  }

  std::string format_word(const Word& w) const {
    std::string out;
    for (int s : w) out += alphabet_.at(s);
    return out;
  }

  bool word_allowed(const Word& w) const {
    return std::none_of(forbidden_.begin(), forbidden_.end(),
                        [&](const Word& f) { return detail::contains_factor(w, f); });
  }

  friend Constraint build_constraint(const std::vector<std::string>& alphabet,
                                     const std::vector<std::string>& forbidden);

 private:
  std::vector<std::string> alphabet_;
  std::vector<Word> forbidden_;
  Adjacency adjacency_;
  std::vector<SymbolPair> allowed_pairs_;
  int order_bound_ = 0;
  std::optional<int> primitivity_exponent_;
};

inline Constraint build_constraint(const std::vector<std::string>& alphabet,
                                   const std::vector<std::string>& forbidden) {
  if (alphabet.empty()) fail(ErrorCode::EmptyAlphabet, "alphabet must contain at least one symbol");
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    if (alphabet[i].size() != 1)
      fail(ErrorCode::BadParameter, "symbol '" + alphabet[i] + "' must be a single character");
    for (std::size_t j = 0; j < i; ++j)
      if (alphabet[i] == alphabet[j]) fail(ErrorCode::BadParameter, "duplicate symbol '" + alphabet[i] + "'");
  }

  Constraint c;
  c.alphabet_ = alphabet;
  std::size_t max_len = 0;
  for (const auto& text : forbidden) {
    if (text.empty()) fail(ErrorCode::BadParameter, "forbidden words must have length >= 1");
    Word w;
    for (char ch : text) {
      auto it = std::find(alphabet.begin(), alphabet.end(), std::string(1, ch));
      if (it == alphabet.end())
        fail(ErrorCode::ForeignSymbol, "forbidden word '" + text + "' uses unknown symbol '" + ch + "'");
      w.push_back(static_cast<int>(it - alphabet.begin()));
    }
    max_len = std::max(max_len, w.size());
    c.forbidden_.push_back(std::move(w));
  }
  if (max_len > 2)
    fail(ErrorCode::OrderTooHigh,
         "maximal forbidden length " + std::to_string(max_len) + " exceeds 2 (constraint order > 1)");
  c.order_bound_ = max_len == 0 ? 0 : static_cast<int>(max_len) - 1;

  const std::size_t n = alphabet.size();
  c.adjacency_ = Adjacency(n, n, 0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      const Word w{static_cast<int>(x), static_cast<int>(y)};
      if (c.word_allowed(w)) {
        c.adjacency_(x, y) = 1;
        c.allowed_pairs_.push_back({static_cast<int>(x), static_cast<int>(y)});
      }
    }

  // Every symbol must be able to occur in a bi-infinite allowed sequence.
  for (std::size_t x = 0; x < n; ++x) {
    bool has_out = false;
    bool has_in = false;
    for (std::size_t y = 0; y < n; ++y) {
      has_out = has_out || c.adjacency_(x, y);
      has_in = has_in || c.adjacency_(y, x);
    }
    if (!has_out || !has_in)
      fail(ErrorCode::Degenerate, "symbol '" + alphabet[x] + "' cannot occur in any bi-infinite allowed sequence");
  }
  c.primitivity_exponent_ = primitivity_exponent(c.adjacency_);
  return c;
}

/// Forbidden list of the (d,k) run-length-limited constraint; nullopt k means
/// k = infinity. Words are over the alphabet {"0","1"}.
inline std::vector<std::string> rll_forbidden(int d, std::optional<int> k) {
  if (d < 0 || (k && *k < 0)) fail(ErrorCode::BadParameter, "RLL parameters must be non-negative");
  if (k && d >= *k) fail(ErrorCode::NotMixing, "S(d,k) requires d < k to be mixing");
  std::vector<std::string> words;
  for (int l = 0; l < d; ++l) words.push_back("1" + std::string(static_cast<std::size_t>(l), '0') + "1");
  if (k) words.push_back(std::string(static_cast<std::size_t>(*k + 1), '0'));
  return words;
}

inline Constraint rll_constraint(int d, std::optional<int> k) {
  return build_constraint({"0", "1"}, rll_forbidden(d, k));
}

/// All allowed words of length n in lexicographic (dense index) order.
inline std::vector<Word> enumerate_allowed(const Constraint& c, int n) {
  std::vector<Word> out;
  if (n < 1) return out;
  Word w;
  w.reserve(static_cast<std::size_t>(n));
  const int q = static_cast<int>(c.size());
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(w.size()) == n) {
      out.push_back(w);
      return;
    }
    for (int s = 0; s < q; ++s) {
      w.push_back(s);
      // Any new forbidden factor must be a suffix of the extended prefix.
      bool ok = true;
      for (const auto& f : c.forbidden()) {
        if (f.size() > w.size()) continue;
        if (std::equal(f.begin(), f.end(), w.end() - static_cast<std::ptrdiff_t>(f.size()))) {
          ok = false;
          break;
        }
      }
      if (ok) self(self);
      w.pop_back();
    }
  };
  rec(rec);
  return out;
}

}  // namespace hmrate
