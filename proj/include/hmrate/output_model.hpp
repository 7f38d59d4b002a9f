#pragma once

// The output process Z of a Markov input sent through a memoryless channel:
// Omega matrices on the joint (input, state) space, word probabilities as
// numbers and as eps-series, the induced simplex map, alpha-typicality and
// structural checks on orders and Taylor coefficients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hmrate/channel.hpp"
#include "hmrate/eps_series.hpp"
#include "hmrate/error.hpp"
#include "hmrate/linalg.hpp"
#include "hmrate/markov_input.hpp"
#include "hmrate/parallel.hpp"

namespace hmrate {

using SeriesMatrix = BasicMatrix<EpsSeries>;
using PolyMatrix = BasicMatrix<Polynomial>;

/// Joint state (x, c); x is a constraint symbol index, c a channel state.
struct JointState {
  int x;
  int c;
  bool operator==(const JointState&) const = default;
};

inline constexpr std::uint64_t kDefaultWordBudget = std::uint64_t{1} << 22;

class OmegaSet {
 public:
  const JointProb& input() const noexcept { return input_; }
  const ChannelSpec& channel() const noexcept { return channel_; }

  std::size_t size() const noexcept { return states_.size(); }
  std::size_t num_outputs() const noexcept { return channel_.num_outputs(); }
  const std::vector<JointState>& joint_states() const noexcept { return states_; }

  /// Omega_z as polynomials, series and order matrices; state index x*|C|+c.
  const PolyMatrix& poly_z(int z) const { return poly_z_[static_cast<std::size_t>(z)]; }
  const SeriesMatrix& omega_z(int z) const { return series_z_[static_cast<std::size_t>(z)]; }
  const TropicalMatrix& tropical_z(int z) const { return tropical_z_[static_cast<std::size_t>(z)]; }
  const SeriesMatrix& omega() const noexcept { return omega_; }

  /// Stationary vector pi_x q_c of Omega (eps independent).
  const Vector& stationary() const noexcept { return stationary_; }
  TropicalVector stationary_orders() const {
    TropicalVector o(stationary_.size(), Order::infinity());
    for (std::size_t i = 0; i < o.size(); ++i)
      if (stationary_[i] > 0.0) o[i] = Order(0);
    return o;
  }

  int max_order() const noexcept { return channel_.max_order(); }
  int primitivity_e() const noexcept { return primitivity_e_; }
  int budget() const noexcept { return budget_; }

  /// Output index z(x) of joint state s under the noiseless map.
  int noiseless_output(std::size_t s) const {
    return channel_.noiseless_map()[static_cast<std::size_t>(input_index_[static_cast<std::size_t>(states_[s].x)])];
  }

  /// Channel input index used for constraint symbol x.
  int channel_input(int x) const { return input_index_[static_cast<std::size_t>(x)]; }

  /// Omega_z evaluated at eps for every z.
  std::vector<Matrix> numeric(double eps) const {
    std::vector<Matrix> out;
    out.reserve(poly_z_.size());
    for (const auto& pm : poly_z_) {
      Matrix m(pm.rows(), pm.cols());
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = pm(i, j)(eps);
      out.push_back(std::move(m));
    }
    return out;
  }

  /// Parses a word of single-character output symbols.
  Word parse_word(const std::string& text) const {
    Word w;
    for (char ch : text) {
      auto z = channel_.output_index(std::string(1, ch));
      if (!z) fail(ErrorCode::UnknownSymbol, "output symbol '" + std::string(1, ch) + "' is not in the channel outputs");
      w.push_back(*z);
    }
    return w;
  }

  std::string format_word(const Word& w) const {
    std::string out;
    for (int z : w) out += channel_.outputs().at(static_cast<std::size_t>(z));
    return out;
  }

  void check_word(const Word& w) const {
    for (int z : w)
      if (z < 0 || static_cast<std::size_t>(z) >= num_outputs())
        fail(ErrorCode::UnknownSymbol, "output index " + std::to_string(z) + " out of range");
  }

  friend OmegaSet build_omegas(const JointProb& p, const ChannelSpec& ch, int budget);

 private:
  JointProb input_;
  ChannelSpec channel_;
  std::vector<int> input_index_;
  std::vector<JointState> states_;
  std::vector<PolyMatrix> poly_z_;
  std::vector<SeriesMatrix> series_z_;
  std::vector<TropicalMatrix> tropical_z_;
  SeriesMatrix omega_;
  Vector stationary_;
  int primitivity_e_ = 0;
  int budget_ = kDefaultDegreeBudget;
};

/// Omega_z((x,c),(y,d)) = Pi_xy q_d p(z|y,d). Constraint symbols are matched
/// to channel inputs by name.
inline OmegaSet build_omegas(const JointProb& p, const ChannelSpec& ch, int budget = kDefaultDegreeBudget) {
  if (budget < 0) fail(ErrorCode::BadParameter, "degree budget must be non-negative");
  const Constraint& c = p.constraint();
  OmegaSet os;
  os.input_ = p;
  os.channel_ = ch;
  os.budget_ = budget;
  os.primitivity_e_ = c.primitivity_exponent().value_or(0);
  for (const auto& sym : c.alphabet()) {
    auto idx = ch.input_index(sym);
    if (!idx) fail(ErrorCode::AlphabetMismatch, "constraint symbol '" + sym + "' is not a channel input");
    os.input_index_.push_back(*idx);
  }

  const std::size_t nx = c.size(), nc = ch.num_states(), nz = ch.num_outputs();
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < nc; ++s) os.states_.push_back({static_cast<int>(x), static_cast<int>(s)});
  const std::size_t n = os.states_.size();

  const Vector marg = p.marginal();
  Matrix pi(nx, nx);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < nx; ++y)
      pi(x, y) = marg[x] > 0.0 ? p.joint(static_cast<int>(x), static_cast<int>(y)) / marg[x] : 0.0;

  const auto& q = ch.state_probs();
  os.stationary_.resize(n);
  for (std::size_t i = 0; i < n; ++i) os.stationary_[i] = marg[static_cast<std::size_t>(os.states_[i].x)] * q[static_cast<std::size_t>(os.states_[i].c)];

  os.omega_ = SeriesMatrix(n, n, EpsSeries(budget));
  for (std::size_t z = 0; z < nz; ++z) {
    PolyMatrix pm(n, n);
    SeriesMatrix sm(n, n, EpsSeries(budget));
    TropicalMatrix tm(n, n, Order::infinity());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const JointState& from = os.states_[i];
        const JointState& to = os.states_[j];
        const double w = pi(static_cast<std::size_t>(from.x), static_cast<std::size_t>(to.x)) * q[static_cast<std::size_t>(to.c)];
        if (w == 0.0) continue;
        pm(i, j) = w * ch.kernel(os.input_index_[static_cast<std::size_t>(to.x)], to.c, static_cast<int>(z));
        sm(i, j) = EpsSeries::from_polynomial(pm(i, j), budget);
        tm(i, j) = pm(i, j).order();
      }
    os.poly_z_.push_back(std::move(pm));
    os.series_z_.push_back(std::move(sm));
    os.tropical_z_.push_back(std::move(tm));
  }

  // Sum over z must reproduce Pi (x) q as a constant.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Polynomial total;
      EpsSeries total_series(budget);
      for (std::size_t z = 0; z < nz; ++z) {
        total = total + os.poly_z_[z](i, j);
        total_series += os.series_z_[z](i, j);
      }
      const double want = pi(static_cast<std::size_t>(os.states_[i].x), static_cast<std::size_t>(os.states_[j].x)) *
                          q[static_cast<std::size_t>(os.states_[j].c)];
      for (std::size_t k = 0; k < std::max<std::size_t>(total.coeffs().size(), 1); ++k)
        if (std::abs(total.coeff(k) - (k == 0 ? want : 0.0)) > 1e-12)
          fail(ErrorCode::RowSumNotOne, "sum over outputs of Omega_z differs from Omega");
      os.omega_(i, j) = total_series;
    }
  return os;
}

// ---------------------------------------------------------------------------
// Word probabilities.

inline Order word_order(const OmegaSet& os, const Word& word) {
  os.check_word(word);
  TropicalVector v = os.stationary_orders();
  for (int z : word) v = tropical_vec_mat(v, os.tropical_z(z));
  return tropical_min(v);
}

inline bool z_allowed(const OmegaSet& os, const Word& word) { return word_order(os, word) == Order(0); }

namespace detail {

inline std::vector<EpsSeries> series_vec_mat(const std::vector<EpsSeries>& v, const SeriesMatrix& m) {
  std::vector<EpsSeries> out(m.cols(), EpsSeries(v.empty() ? kDefaultDegreeBudget : v[0].budget()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (v[i].is_zero()) continue;
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (!m(i, j).is_zero()) out[j] += v[i] * m(i, j);
  }
  return out;
}

inline std::vector<EpsSeries> stationary_series(const OmegaSet& os) {
  std::vector<EpsSeries> v;
  for (double x : os.stationary()) v.push_back(EpsSeries::constant(x, os.budget()));
  return v;
}

inline EpsSeries series_total(const std::vector<EpsSeries>& v, int budget) {
  EpsSeries s(budget);
  for (const auto& x : v) s += x;
  return s;
}

}  // namespace detail

/// p(word) = pi Omega_{z_1} ... Omega_{z_n} 1 as an eps-series.
inline EpsSeries word_probability_series(const OmegaSet& os, const Word& word) {
  os.check_word(word);
  auto v = detail::stationary_series(os);
  for (int z : word) v = detail::series_vec_mat(v, os.omega_z(z));
  return detail::series_total(v, os.budget());
}

/// p(word) at a fixed eps.
inline double word_probability(const OmegaSet& os, const Word& word, double eps) {
  os.check_word(word);
  const auto mats = os.numeric(eps);
  Vector v = os.stationary();
  for (int z : word) v = vec_mat(v, mats[static_cast<std::size_t>(z)]);
  return sum(v);
}

/// p(z0 | history) as an eps-series; history may be empty.
inline EpsSeries conditional_probability_series(const OmegaSet& os, int z0, const Word& history) {
  Word full = history;
  full.push_back(z0);
  const EpsSeries den = word_probability_series(os, history);
  if (den.is_zero()) fail(ErrorCode::ZeroHistory, "history " + os.format_word(history) + " has probability identically zero");
  const EpsSeries num = word_probability_series(os, full);
  EpsSeries out = num / den;
  if (out.order().is_finite() && out.order().value() > os.max_order() && os.input().in_m_delta(0.0))
    fail(ErrorCode::AssumptionViolated, "conditional order " + out.order().str() + " exceeds O_M = " +
                                           std::to_string(os.max_order()));
  return out;
}

inline double conditional_probability(const OmegaSet& os, int z0, const Word& history, double eps) {
  Word full = history;
  full.push_back(z0);
  const double den = word_probability(os, history, eps);
  if (!(den > 0.0)) fail(ErrorCode::ZeroHistory, "history " + os.format_word(history) + " has zero probability");
  return word_probability(os, full, eps) / den;
}

/// Induced map f_z(w) = w Omega_z / (w Omega_z 1). At eps = 0 the limit is
/// taken: entries of minimal eps-order are kept and their leading
/// coefficients normalized.
inline Vector simplex_step(const OmegaSet& os, const Vector& w, int z, double eps) {
  if (w.size() != os.size()) fail(ErrorCode::DimensionMismatch, "simplex point has wrong dimension");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) fail(ErrorCode::BadParameter, "simplex point has a negative entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::BadParameter, "simplex point does not sum to 1");
  os.check_word({z});
  if (eps < 0.0) fail(ErrorCode::BadParameter, "eps must be non-negative");

  const std::size_t n = os.size();
  Vector out(n, 0.0);
  if (eps > 0.0) {
    out = vec_mat(w, os.numeric(eps)[static_cast<std::size_t>(z)]);
  } else {
    std::vector<Polynomial> col(n);
    const PolyMatrix& pm = os.poly_z(z);
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) col[j] = col[j] + w[i] * pm(i, j);
    }
    Order lead = Order::infinity();
    for (const auto& pj : col) lead = min(lead, pj.order());
    if (lead.is_finite())
      for (std::size_t j = 0; j < n; ++j) out[j] = col[j].coeff(static_cast<std::size_t>(lead.value()));
  }
  const double s = sum(out);
  if (!(s > 0.0)) fail(ErrorCode::ZeroMass, "w Omega_z 1 vanishes for z = " + os.channel().outputs()[static_cast<std::size_t>(z)]);
  for (double& x : out) x /= s;
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration over all output words of a given length.

namespace detail {

inline std::uint64_t checked_word_count(std::size_t alphabet, int n, std::uint64_t budget) {
  std::uint64_t count = 1;
  for (int i = 0; i < n; ++i) {
    if (count > budget / std::max<std::size_t>(alphabet, 1))
      fail(ErrorCode::BudgetExceeded, std::to_string(alphabet) + "^" + std::to_string(n) +
                                          " words exceed the enumeration budget of " + std::to_string(budget));
    count *= alphabet;
  }
  if (count > budget)
    fail(ErrorCode::BudgetExceeded, "word count exceeds the enumeration budget of " + std::to_string(budget));
  return count;
}

/// Prefix length used to split enumeration into blocks (fixed per alphabet).
inline int block_prefix_length(std::size_t alphabet, int n) {
  int len = 0;
  std::size_t blocks = 1;
  while (len < n && blocks < 64) {
    blocks *= alphabet;
    ++len;
  }
  return len;
}

template <typename Leaf>
void dfs_words(const OmegaSet& os, const std::vector<Matrix>& mats, Word& word, const Vector& v, const TropicalVector& o,
               int remaining, Leaf& leaf) {
  if (remaining == 0) {
    leaf(word, v, o);
    return;
  }
  for (std::size_t z = 0; z < mats.size(); ++z) {
    word.push_back(static_cast<int>(z));
    dfs_words(os, mats, word, vec_mat(v, mats[z]), tropical_vec_mat(o, os.tropical_z(static_cast<int>(z))),
              remaining - 1, leaf);
    word.pop_back();
  }
}

/// Visits every word of length n with its forward vectors pi Omega_w (numeric
/// at eps) and the tropical analogue. Words are split into prefix blocks,
/// each block folding into its own accumulator; accumulators are returned in
/// block order for deterministic reduction.
template <typename Acc, typename Leaf>
std::vector<Acc> word_blocks(const OmegaSet& os, int n, double eps, Leaf leaf,
                             std::uint64_t budget = kDefaultWordBudget) {
  const std::size_t nz = os.num_outputs();
  checked_word_count(nz, n, budget);
  const auto mats = os.numeric(eps);
  const int plen = block_prefix_length(nz, n);
  std::size_t blocks = 1;
  for (int i = 0; i < plen; ++i) blocks *= nz;
  return parallel_map<Acc>(blocks, [&](std::size_t b) {
    Acc acc{};
    Word word(static_cast<std::size_t>(plen));
    std::size_t rest = b;
    for (int i = plen; i-- > 0;) {
      word[static_cast<std::size_t>(i)] = static_cast<int>(rest % nz);
      rest /= nz;
    }
    Vector v = os.stationary();
    TropicalVector o = os.stationary_orders();
    for (int z : word) {
      v = vec_mat(v, mats[static_cast<std::size_t>(z)]);
      o = tropical_vec_mat(o, os.tropical_z(z));
    }
    auto bound = [&](const Word& w, const Vector& fv, const TropicalVector& fo) { leaf(acc, w, fv, fo); };
    dfs_words(os, mats, word, v, o, n - plen, bound);
    return acc;
  });
}

}  // namespace detail

/// Calls fn(word, p(word) series, tropical order) for every word of length
/// n, lexicographically. Sequential; intended for oracle-style checks.
template <typename Fn>
void for_each_word_series(const OmegaSet& os, int n, Fn&& fn, std::uint64_t budget = kDefaultWordBudget) {
  detail::checked_word_count(os.num_outputs(), n, budget);
  Word word;
  auto rec = [&](auto&& self, const std::vector<EpsSeries>& v, const TropicalVector& o) -> void {
    if (static_cast<int>(word.size()) == n) {
      fn(static_cast<const Word&>(word), detail::series_total(v, os.budget()), tropical_min(o));
      return;
    }
    for (std::size_t z = 0; z < os.num_outputs(); ++z) {
      word.push_back(static_cast<int>(z));
      self(self, detail::series_vec_mat(v, os.omega_z(static_cast<int>(z))),
           tropical_vec_mat(o, os.tropical_z(static_cast<int>(z))));
      word.pop_back();
    }
  };
  rec(rec, detail::stationary_series(os), os.stationary_orders());
}

// ---------------------------------------------------------------------------
// alpha-typicality.

struct TypicalityReport {
  int n = 0;
  double alpha = 0.0;
  double eps = 0.0;
  std::uint64_t typical_count = 0;
  std::uint64_t atypical_count = 0;
  double atypical_mass = 0.0;
  int max_order_seen = 0;
};

/// Words of length n with ord(p(w)) <= alpha n are typical; atypical mass is
/// the total probability at eps of the rest.
inline TypicalityReport classify_typical(const OmegaSet& os, int n, double alpha, double eps,
                                         std::uint64_t budget = kDefaultWordBudget) {
  if (n < 1) fail(ErrorCode::BadParameter, "word length must be >= 1");
  if (!(alpha >= 0.0)) fail(ErrorCode::BadParameter, "alpha must be non-negative");
  if (eps < 0.0) fail(ErrorCode::BadParameter, "eps must be non-negative");
  struct Acc {
    std::uint64_t typical = 0, atypical = 0;
    double mass = 0.0;
    int max_order = 0;
  };
  const double threshold = alpha * n;
  auto blocks = detail::word_blocks<Acc>(
      os, n, eps,
      [&](Acc& acc, const Word&, const Vector& v, const TropicalVector& o) {
        const Order ord = tropical_min(o);
        if (ord.is_finite()) acc.max_order = std::max(acc.max_order, ord.value());
        if (ord.is_finite() && ord.value() <= threshold) {
          ++acc.typical;
        } else {
          ++acc.atypical;
          acc.mass += sum(v);
        }
      },
      budget);
  TypicalityReport r;
  r.n = n;
  r.alpha = alpha;
  r.eps = eps;
  Vector masses;
  for (const auto& b : blocks) {
    r.typical_count += b.typical;
    r.atypical_count += b.atypical;
    r.max_order_seen = std::max(r.max_order_seen, b.max_order);
    masses.push_back(b.mass);
  }
  r.atypical_mass = tree_sum(masses);
  return r;
}

// ---------------------------------------------------------------------------
// Row-wise order dominance of Omega products along Z-allowed words.

struct HayViolation {
  std::size_t row;
  std::size_t col_in;   // column in I_{z_{-1}}
  std::size_t col_other;  // second column compared against
  bool equality;        // true: two I-columns differ; false: dominance fails
};

struct HayReport {
  int length = 0;
  int required_length = 0;
  std::vector<std::size_t> dominant_columns;
  TropicalMatrix product;
  std::vector<HayViolation> violations;
  bool passed() const noexcept { return violations.empty(); }
};

/// Smallest N the dominance property is claimed for: 2 e O_M.
inline int hay_length(const OmegaSet& os) { return 2 * os.primitivity_e() * os.max_order(); }

/// For a Z-allowed word z_{-N}..z_{-1}, checks that in every row of
/// Omega_{z_{-N}} ... Omega_{z_{-1}} the orders are equal across the columns
/// (x,c) with z(x) = z_{-1} and strictly smaller than at all other columns.
inline HayReport verify_hay(const OmegaSet& os, const Word& word) {
  if (os.channel().has_zero_entries())
    fail(ErrorCode::AssumptionViolated, "channel has identically zero kernel entries");
  if (!os.input().in_m_delta(0.0)) fail(ErrorCode::AssumptionViolated, "input chain is not in M_0");
  if (word.empty() || !z_allowed(os, word))
    fail(ErrorCode::NotZAllowed, "word " + os.format_word(word) + " is not Z-allowed");
  HayReport r;
  r.length = static_cast<int>(word.size());
  r.required_length = hay_length(os);
  if (r.length < r.required_length)
    fail(ErrorCode::WordTooShort, "word length " + std::to_string(r.length) + " below 2 e O_M = " +
                                      std::to_string(r.required_length));
  const std::size_t n = os.size();
  r.product = tropical_identity(n);
  for (int z : word) r.product = tropical_multiply(r.product, os.tropical_z(z));

  const int last = word.back();
  const auto& q = os.channel().state_probs();
  std::vector<bool> in_i(n, false);
  for (std::size_t t = 0; t < n; ++t) {
    in_i[t] = os.noiseless_output(t) == last && q[static_cast<std::size_t>(os.joint_states()[t].c)] > 0.0;
    if (in_i[t]) r.dominant_columns.push_back(t);
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (r.dominant_columns.empty()) break;
    const std::size_t t1 = r.dominant_columns.front();
    for (std::size_t t = 0; t < n; ++t) {
      if (t == t1) continue;
      if (in_i[t] && r.product(s, t) != r.product(s, t1)) r.violations.push_back({s, t1, t, true});
      if (!in_i[t] && !(r.product(s, t1) < r.product(s, t))) r.violations.push_back({s, t1, t, false});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Stabilization of Taylor coefficients of conditionals.

struct StabilizationReport {
  int n = 0;
  int k = 0;
  int max_j = -1;  // coefficients 0..max_j are compared
  Order tail_order_a;
  Order tail_order_b;
  std::vector<double> coeffs_a;
  std::vector<double> coeffs_b;
  std::vector<double> deltas;
  double tolerance = 1e-9;
  bool passed = true;
};

namespace detail {

/// ord p(w_{len-n-1..len-2} | older prefix) for w including z0 as last symbol.
inline Order tail_order(const OmegaSet& os, const Word& w, int n) {
  const Word history(w.begin(), w.end() - 1);
  const Word older(w.begin(), w.end() - 1 - n);
  const Order full = word_order(os, history);
  const Order prefix = word_order(os, older);
  if (full.is_infinite() || prefix.is_infinite()) return Order::infinity();
  return Order(full.value() - prefix.value());
}

}  // namespace detail

/// `a` and `b` are words z_{-m}..z_0 and z'_{-m'}..z'_0 sharing their last
/// n+1 symbols. When both tail orders ord p(z_{-n}^{-1} | z_{-m}^{-n-1}) are
/// at most k, the eps^j coefficients of p(z_0 | history) agree for
/// j <= n - 4k - 1.
inline StabilizationReport verify_stabilization(const OmegaSet& os, const Word& a, const Word& b, int n, int k,
                                                double rel_tol = 1e-9) {
  if (n < 0 || k < 0) fail(ErrorCode::BadParameter, "n and k must be non-negative");
  const auto un = static_cast<std::size_t>(n);
  if (a.size() < un + 1 || b.size() < un + 1)
    fail(ErrorCode::PreconditionFailed, "both words need at least n+1 symbols");
  if (!std::equal(a.end() - static_cast<std::ptrdiff_t>(un + 1), a.end(), b.end() - static_cast<std::ptrdiff_t>(un + 1)))
    fail(ErrorCode::PreconditionFailed, "words do not share their last n+1 symbols");
  StabilizationReport r;
  r.n = n;
  r.k = k;
  r.tolerance = rel_tol;
  r.tail_order_a = detail::tail_order(os, a, n);
  r.tail_order_b = detail::tail_order(os, b, n);
  if (r.tail_order_a > Order(k) || r.tail_order_b > Order(k))
    fail(ErrorCode::PreconditionFailed, "tail orders " + r.tail_order_a.str() + ", " + r.tail_order_b.str() +
                                            " exceed k = " + std::to_string(k));
  r.max_j = n - 4 * k - 1;
  if (r.max_j < 0) return r;
  if (r.max_j > os.budget())
    fail(ErrorCode::BudgetExceeded, "need coefficients through eps^" + std::to_string(r.max_j) +
                                        " but the degree budget is " + std::to_string(os.budget()));
  const Word ha(a.begin(), a.end() - 1), hb(b.begin(), b.end() - 1);
  const EpsSeries ca = conditional_probability_series(os, a.back(), ha);
  const EpsSeries cb = conditional_probability_series(os, b.back(), hb);
  if (ca.known_through() < r.max_j || cb.known_through() < r.max_j)
    fail(ErrorCode::BudgetExceeded, "series lost precision below eps^" + std::to_string(r.max_j));
  double scale = 0.0;
  for (int j = 0; j <= r.max_j; ++j) {
    r.coeffs_a.push_back(ca.absolute_coeff(j));
    r.coeffs_b.push_back(cb.absolute_coeff(j));
    scale = std::max({scale, std::abs(r.coeffs_a.back()), std::abs(r.coeffs_b.back())});
  }
  for (int j = 0; j <= r.max_j; ++j) {
    const double d = std::abs(r.coeffs_a[static_cast<std::size_t>(j)] - r.coeffs_b[static_cast<std::size_t>(j)]);
    r.deltas.push_back(d);
    if (d > rel_tol * std::max(scale, 1e-300)) r.passed = false;
  }
  return r;
}

/// Deterministic history pairs for verify_stabilization. For each suffix
/// z_{-n}..z_0 the length-`prefix_len` prefixes with tail order at most k are
/// listed; round r pairs the first prefix with the (r+1)-th, visiting
/// suffixes in lexicographic order.
inline std::vector<std::pair<Word, Word>> stabilization_pairs(const OmegaSet& os, int n, int k, std::size_t count,
                                                              int prefix_len = 3) {
  if (n < 0 || k < 0 || prefix_len < 1) fail(ErrorCode::BadParameter, "n, k must be >= 0 and prefix_len >= 1");
  const std::size_t nz = os.num_outputs();
  const std::uint64_t suffixes = detail::checked_word_count(nz, n + 1, kDefaultWordBudget);
  const std::uint64_t prefixes = detail::checked_word_count(nz, prefix_len, kDefaultWordBudget);
  std::vector<std::pair<Word, Word>> out;
  auto word_at = [nz](std::uint64_t index, int len) {
    Word w(static_cast<std::size_t>(len));
    for (int i = len; i-- > 0;) {
      w[static_cast<std::size_t>(i)] = static_cast<int>(index % nz);
      index /= nz;
    }
    return w;
  };
  std::vector<std::vector<Word>> valid;
  std::size_t longest = 0;
  for (std::uint64_t si = 0; si < suffixes; ++si) {
    const Word suffix = word_at(si, n + 1);
    std::vector<Word> ok;
    for (std::uint64_t pi = 0; pi < prefixes; ++pi) {
      Word w = word_at(pi, prefix_len);
      w.insert(w.end(), suffix.begin(), suffix.end());
      if (detail::tail_order(os, w, n) <= Order(k)) ok.push_back(std::move(w));
    }
    longest = std::max(longest, ok.size());
    if (ok.size() >= 2) valid.push_back(std::move(ok));
  }
  for (std::size_t r = 1; r < longest && out.size() < count; ++r)
    for (const auto& ok : valid) {
      if (out.size() == count) break;
      if (r < ok.size()) out.emplace_back(ok.front(), ok[r]);
    }
  return out;
}

}  // namespace hmrate
