#pragma once

// Truncated power series in eps with exact leading-order tracking, plus
// min-plus (tropical) arithmetic on orders.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hmrate/error.hpp"
#include "hmrate/linalg.hpp"

namespace hmrate {

/// eps-order: a non-negative integer or +infinity (identically zero).
class Order {
 public:
  constexpr Order() = default;
  constexpr explicit Order(int v) : v_(v) {}
  static constexpr Order infinity() { return Order(kInf); }

  constexpr bool is_infinite() const noexcept { return v_ == kInf; }
  constexpr bool is_finite() const noexcept { return v_ != kInf; }
  constexpr int value() const noexcept { return v_; }

  /// Tropical product: ordinary sum with +inf absorbing.
  friend constexpr Order operator+(Order a, Order b) {
    return (a.is_infinite() || b.is_infinite()) ? infinity() : Order(a.v_ + b.v_);
  }
  friend constexpr Order min(Order a, Order b) { return a.v_ <= b.v_ ? a : b; }
  friend constexpr auto operator<=>(const Order&, const Order&) = default;
  friend constexpr bool operator==(const Order&, const Order&) = default;

  std::string str() const { return is_infinite() ? std::string("inf") : std::to_string(v_); }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max();
  int v_ = 0;
};

/// A polynomial in eps with real coefficients, constant term first. Used for
/// channel kernels; its order is exact because coefficients are user data.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }
  static Polynomial constant(double v) { return Polynomial({v}); }
  static Polynomial monomial(double coeff, int degree) {
    std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
    c.back() = coeff;
    return Polynomial(std::move(c));
  }

  const std::vector<double>& coeffs() const noexcept { return c_; }
  double coeff(std::size_t j) const { return j < c_.size() ? c_[j] : 0.0; }
  bool is_zero() const noexcept { return c_.empty(); }
  int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }

  Order order() const {
    for (std::size_t j = 0; j < c_.size(); ++j)
      if (c_[j] != 0.0) return Order(static_cast<int>(j));
    return Order::infinity();
  }

  double operator()(double eps) const {
    double acc = 0.0;
    for (std::size_t j = c_.size(); j-- > 0;) acc = acc * eps + c_[j];
    return acc;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = a.coeff(j) + b.coeff(j);
    return Polynomial(std::move(c));
  }
  friend Polynomial operator*(double s, const Polynomial& a) {
    std::vector<double> c = a.c_;
    for (double& x : c) x *= s;
    return Polynomial(std::move(c));
  }
  bool operator==(const Polynomial&) const = default;

 private:
  std::vector<double> c_;
};

inline constexpr int kDefaultDegreeBudget = 6;

/// Power series eps^order * (c_0 + c_1 eps + ... + c_{K} eps^K) with c_0 != 0.
///
/// Coefficients are stored relative to the leading order, so a product of
/// many small-probability factors keeps K+1 significant terms regardless of
/// how large its order gets. `absolute_coeff(j)` exposes the usual Taylor
/// coefficient of eps^j; entries with j > order+K are beyond the budget.
/// `valid()` counts how many relative coefficients are known; it only drops
/// below K+1 after a leading-term cancellation.
class EpsSeries {
 public:
  EpsSeries() : EpsSeries(kDefaultDegreeBudget) {}
  explicit EpsSeries(int budget) : order_(Order::infinity()), rel_(static_cast<std::size_t>(budget) + 1, 0.0),
                                   valid_(budget + 1) {}

  static EpsSeries zero(int budget = kDefaultDegreeBudget) { return EpsSeries(budget); }

  static EpsSeries constant(double v, int budget = kDefaultDegreeBudget) {
    EpsSeries s(budget);
    if (v != 0.0) {
      s.order_ = Order(0);
      s.rel_[0] = v;
    }
    return s;
  }

  static EpsSeries from_polynomial(const Polynomial& p, int budget = kDefaultDegreeBudget) {
    EpsSeries s(budget);
    s.order_ = p.order();
    if (s.order_.is_infinite()) return s;
    const auto o = static_cast<std::size_t>(s.order_.value());
    for (std::size_t j = 0; j < s.rel_.size(); ++j) s.rel_[j] = p.coeff(o + j);
    return s;
  }

  /// Builds from absolute Taylor coefficients c[0..]; leading zeros set the order.
  static EpsSeries from_coeffs(const std::vector<double>& absolute, int budget = kDefaultDegreeBudget) {
    return from_polynomial(Polynomial(absolute), budget);
  }

  int budget() const noexcept { return static_cast<int>(rel_.size()) - 1; }
  Order order() const noexcept { return order_; }
  bool is_zero() const noexcept { return order_.is_infinite(); }
  int valid() const noexcept { return valid_; }
  const std::vector<double>& relative_coeffs() const noexcept { return rel_; }
  double leading() const noexcept { return order_.is_infinite() ? 0.0 : rel_[0]; }

  /// Highest absolute degree whose coefficient is known.
  int known_through() const { return order_.is_infinite() ? std::numeric_limits<int>::max() : order_.value() + valid_ - 1; }

  double absolute_coeff(int j) const {
    if (order_.is_infinite() || j < order_.value()) return 0.0;
    const int r = j - order_.value();
    return r < valid_ ? rel_[static_cast<std::size_t>(r)] : 0.0;
  }

  /// Absolute coefficients of degrees 0..K (the degree-budget view).
  std::vector<double> absolute_coeffs() const {
    std::vector<double> out(rel_.size(), 0.0);
    for (int j = 0; j <= budget(); ++j) out[static_cast<std::size_t>(j)] = absolute_coeff(j);
    return out;
  }

  double operator()(double eps) const {
    if (order_.is_infinite()) return 0.0;
    double acc = 0.0;
    for (int j = valid_; j-- > 0;) acc = acc * eps + rel_[static_cast<std::size_t>(j)];
    return acc * std::pow(eps, order_.value());
  }

  EpsSeries operator-() const {
    EpsSeries s = *this;
    for (double& x : s.rel_) x = -x;
    return s;
  }

  friend EpsSeries operator+(const EpsSeries& a, const EpsSeries& b) {
    const int budget = std::min(a.budget(), b.budget());
    if (a.is_zero()) return b.with_budget(budget);
    if (b.is_zero()) return a.with_budget(budget);
    const EpsSeries& lo = a.order_ <= b.order_ ? a : b;
    const EpsSeries& hi = a.order_ <= b.order_ ? b : a;
    const int shift = hi.order_.value() - lo.order_.value();
    EpsSeries s(budget);
    s.order_ = lo.order_;
    s.valid_ = std::min({budget + 1, lo.valid_, hi.valid_ + shift});
    std::vector<double> mag(static_cast<std::size_t>(budget) + 1, 0.0);
    for (int j = 0; j <= budget; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      double v = lo.rel_[uj];
      mag[uj] = std::abs(v);
      if (j >= shift) {
        const double w = hi.rel_[static_cast<std::size_t>(j - shift)];
        v += w;
        mag[uj] += std::abs(w);
      }
      s.rel_[uj] = j < s.valid_ ? v : 0.0;
    }
    s.normalize(mag);
    return s;
  }

  friend EpsSeries operator-(const EpsSeries& a, const EpsSeries& b) { return a + (-b); }

  friend EpsSeries operator*(const EpsSeries& a, const EpsSeries& b) {
    const int budget = std::min(a.budget(), b.budget());
    EpsSeries s(budget);
    if (a.is_zero() || b.is_zero()) return s;
    s.order_ = a.order_ + b.order_;
    s.valid_ = std::min({budget + 1, a.valid_, b.valid_});
    for (int j = 0; j < s.valid_; ++j) {
      double acc = 0.0;
      for (int i = 0; i <= j; ++i) acc += a.rel_[static_cast<std::size_t>(i)] * b.rel_[static_cast<std::size_t>(j - i)];
      s.rel_[static_cast<std::size_t>(j)] = acc;
    }
    return s;
  }

  friend EpsSeries operator*(double c, const EpsSeries& a) {
    if (c == 0.0 || a.is_zero()) return EpsSeries(a.budget());
    EpsSeries s = a;
    for (double& x : s.rel_) x *= c;
    return s;
  }

  friend EpsSeries operator/(const EpsSeries& a, const EpsSeries& b) {
    if (b.is_zero() || b.valid_ == 0) fail(ErrorCode::DivByZeroSeries, "division by an identically zero series");
    const int budget = std::min(a.budget(), b.budget());
    if (a.is_zero()) return EpsSeries(budget);
    if (a.order_ < b.order_)
      fail(ErrorCode::OrderUnderflow, "numerator order " + a.order_.str() + " below denominator order " + b.order_.str());
    EpsSeries s(budget);
    s.order_ = Order(a.order_.value() - b.order_.value());
    s.valid_ = std::min({budget + 1, a.valid_, b.valid_});
    for (int j = 0; j < s.valid_; ++j) {
      double acc = a.rel_[static_cast<std::size_t>(j)];
      for (int i = 1; i <= j; ++i) acc -= b.rel_[static_cast<std::size_t>(i)] * s.rel_[static_cast<std::size_t>(j - i)];
      s.rel_[static_cast<std::size_t>(j)] = acc / b.rel_[0];
    }
    return s;
  }

  EpsSeries& operator+=(const EpsSeries& o) { return *this = *this + o; }
  EpsSeries& operator*=(const EpsSeries& o) { return *this = *this * o; }

  /// "c0 + c1 eps + ... (ord=k)" listing the known non-zero coefficients.
  std::string str() const {
    if (is_zero()) return "0 (ord=inf)";
    std::string out;
    char buf[64];
    for (int r = 0; r < valid_; ++r) {
      const int j = order_.value() + r;
      if (r > 0 && rel_[static_cast<std::size_t>(r)] == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.10g", rel_[static_cast<std::size_t>(r)]);
      if (!out.empty()) out += " + ";
      out += buf;
      if (j == 1) out += " eps";
      else if (j > 1) out += " eps^" + std::to_string(j);
    }
    return out + " (ord=" + order_.str() + ")";
  }

 private:
  // A coefficient below this fraction of the magnitudes that were summed
  // into it is treated as an exact cancellation.
  static constexpr double kCancelTol = 1e-13;

  EpsSeries with_budget(int budget) const {
    if (budget == this->budget()) return *this;
    EpsSeries s(budget);
    s.order_ = order_;
    s.valid_ = std::min(valid_, budget + 1);
    for (int j = 0; j <= budget; ++j) s.rel_[static_cast<std::size_t>(j)] = rel_[static_cast<std::size_t>(j)];
    return s;
  }

  void normalize(const std::vector<double>& magnitude) {
    int lead = 0;
    while (lead < valid_ &&
           std::abs(rel_[static_cast<std::size_t>(lead)]) <= kCancelTol * magnitude[static_cast<std::size_t>(lead)])
      ++lead;
    if (lead == 0) return;
    if (lead == valid_) {
      // Everything known cancelled; report as identically zero.
      order_ = Order::infinity();
      std::fill(rel_.begin(), rel_.end(), 0.0);
      valid_ = static_cast<int>(rel_.size());
      return;
    }
    std::vector<double> shifted(rel_.size(), 0.0);
    for (int j = lead; j < valid_; ++j) shifted[static_cast<std::size_t>(j - lead)] = rel_[static_cast<std::size_t>(j)];
    rel_ = std::move(shifted);
    valid_ -= lead;
    order_ = Order(order_.value() + lead);
  }

  Order order_;
  std::vector<double> rel_;
  int valid_;
};

// ---------------------------------------------------------------------------
// Tropical (min-plus) order arithmetic.

using TropicalMatrix = BasicMatrix<Order>;
using TropicalVector = std::vector<Order>;

inline TropicalMatrix tropical_identity(std::size_t n) {
  TropicalMatrix m(n, n, Order::infinity());
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Order(0);
  return m;
}

inline TropicalMatrix tropical_multiply(const TropicalMatrix& a, const TropicalMatrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::DimensionMismatch, "tropical product of non-conformable matrices");
  TropicalMatrix out(a.rows(), b.cols(), Order::infinity());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      if (a(i, k).is_infinite()) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = min(out(i, j), a(i, k) + b(k, j));
    }
  return out;
}

inline TropicalVector tropical_vec_mat(const TropicalVector& v, const TropicalMatrix& m) {
  if (v.size() != m.rows()) fail(ErrorCode::DimensionMismatch, "tropical vector/matrix size mismatch");
  TropicalVector out(m.cols(), Order::infinity());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (v[i].is_infinite()) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] = min(out[j], v[i] + m(i, j));
  }
  return out;
}

/// left * chain[0] * chain[1] * ... in the min-plus semiring.
inline TropicalVector tropical_product(const std::vector<TropicalMatrix>& chain, TropicalVector left) {
  for (const auto& m : chain) left = tropical_vec_mat(left, m);
  return left;
}

inline Order tropical_min(const TropicalVector& v) {
  Order best = Order::infinity();
  for (Order o : v) best = min(best, o);
  return best;
}

}  // namespace hmrate
