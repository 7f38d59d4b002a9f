#pragma once

// First-order stationary Markov inputs on a constraint, represented by their
// joint probabilities on the allowed 2-words.

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hmrate/constraint.hpp"
#include "hmrate/error.hpp"
#include "hmrate/linalg.hpp"

namespace hmrate {

inline constexpr double kJointTolerance = 1e-12;

class JointProb {
 public:
  JointProb() = default;

  /// Validates sum-to-one, non-negativity and stationarity to `tol`.
  JointProb(std::shared_ptr<const Constraint> constraint, Vector values, double tol = kJointTolerance)
      : constraint_(std::move(constraint)), values_(std::move(values)) {
    const auto& pairs = constraint_->allowed_pairs();
    if (values_.size() != pairs.size())
      fail(ErrorCode::DimensionMismatch, "joint vector has " + std::to_string(values_.size()) +
                                             " entries, constraint has " + std::to_string(pairs.size()) +
                                             " allowed 2-words");
    double total = 0.0;
    for (double v : values_) {
      if (!(v >= -tol)) fail(ErrorCode::NotStochastic, "joint probabilities must be non-negative");
      total += v;
    }
    if (std::abs(total - 1.0) > tol) fail(ErrorCode::NotStochastic, "joint probabilities must sum to 1");
    Vector out_mass(constraint_->size(), 0.0), in_mass(constraint_->size(), 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out_mass[pairs[i].first] += values_[i];
      in_mass[pairs[i].second] += values_[i];
    }
    for (std::size_t x = 0; x < out_mass.size(); ++x)
      if (std::abs(out_mass[x] - in_mass[x]) > tol)
        fail(ErrorCode::NotStochastic, "joint probabilities are not stationary at symbol '" +
                                           constraint_->alphabet()[x] + "'");
  }

  const Constraint& constraint() const { return *constraint_; }
  const std::shared_ptr<const Constraint>& constraint_ptr() const { return constraint_; }
  const Vector& values() const noexcept { return values_; }

  /// p(xy) for any 2-word; zero when xy is not allowed.
  double joint(int x, int y) const {
    const int i = constraint_->pair_index(x, y);
    return i < 0 ? 0.0 : values_[static_cast<std::size_t>(i)];
  }

  /// Symbol marginal p(x) = sum_y p(xy).
  Vector marginal() const {
    Vector m(constraint_->size(), 0.0);
    const auto& pairs = constraint_->allowed_pairs();
    for (std::size_t i = 0; i < pairs.size(); ++i) m[pairs[i].first] += values_[i];
    return m;
  }

  /// Membership in M_delta: every allowed 2-word has probability > delta.
  bool in_m_delta(double delta) const {
    for (double v : values_)
      if (!(v > delta)) return false;
    return true;
  }

 private:
  std::shared_ptr<const Constraint> constraint_;
  Vector values_;
};

namespace detail {

inline Vector stationary_by_power_iteration(const Matrix& pi, double tol = 1e-14, long max_iter = 1000000) {
  const std::size_t n = pi.rows();
  Vector v(n, 1.0 / static_cast<double>(n));
  for (long it = 0; it < max_iter; ++it) {
    Vector next = vec_mat(v, pi);
    const double s = sum(next);
    for (double& x : next) x /= s;
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (resid <= tol) return v;
  }
  fail(ErrorCode::NotPrimitive, "power iteration for the stationary vector did not converge");
}

inline Adjacency support_of(const Matrix& m) {
  Adjacency a(m.rows(), m.cols(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) a(i, j) = m(i, j) > 0.0 ? 1 : 0;
  return a;
}

/// Independent rows of {sum-to-one, stationarity} over allowed-pair coordinates.
inline std::pair<Matrix, Vector> affine_constraints(const Constraint& c) {
  const auto& pairs = c.allowed_pairs();
  const std::size_t m = pairs.size();
  std::vector<Vector> rows;
  Vector rhs;
  rows.emplace_back(m, 1.0);
  rhs.push_back(1.0);
  for (std::size_t x = 0; x < c.size(); ++x) {
    Vector r(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      r[i] = (pairs[i].first == static_cast<int>(x) ? 1.0 : 0.0) - (pairs[i].second == static_cast<int>(x) ? 1.0 : 0.0);
    rows.push_back(std::move(r));
    rhs.push_back(0.0);
  }
  // Keep a maximal independent subset so the normal equations are regular.
  std::vector<Vector> kept;
  Vector kept_rhs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Matrix trial(kept.size() + 1, m);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) trial(i, j) = kept[i][j];
    for (std::size_t j = 0; j < m; ++j) trial(kept.size(), j) = rows[r][j];
    if (rank(trial) == kept.size() + 1) {
      kept.push_back(rows[r]);
      kept_rhs.push_back(rhs[r]);
    }
  }
  Matrix e(kept.size(), m);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) e(i, j) = kept[i][j];
  return {e, kept_rhs};
}

/// Least-norm solution of E p = b.
inline Vector affine_particular_point(const Matrix& e, const Vector& b) {
  const Matrix gram = multiply(e, transpose(e));
  auto y = solve(gram, b);
  if (!y) fail(ErrorCode::Degenerate, "affine constraint system is singular");
  Vector p(e.cols(), 0.0);
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) p[j] += e(i, j) * (*y)[i];
  return p;
}

}  // namespace detail

/// Stationary chain with transition matrix `pi` on constraint `c`
/// (rows/cols indexed by the constraint alphabet).
inline JointProb from_transition(std::shared_ptr<const Constraint> c, const Matrix& pi) {
  const std::size_t n = c->size();
  if (pi.rows() != n || pi.cols() != n)
    fail(ErrorCode::DimensionMismatch, "transition matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  for (std::size_t x = 0; x < n; ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (!(pi(x, y) >= 0.0)) fail(ErrorCode::NotStochastic, "transition entries must be non-negative");
      if (pi(x, y) > 0.0 && !c->allowed(static_cast<int>(x), static_cast<int>(y)))
        fail(ErrorCode::SupportViolation, "transition " + c->alphabet()[x] + c->alphabet()[y] +
                                              " is forbidden by the constraint");
      s += pi(x, y);
    }
    if (std::abs(s - 1.0) > 1e-12) fail(ErrorCode::NotStochastic, "row " + c->alphabet()[x] + " does not sum to 1");
  }
  if (!primitivity_exponent(detail::support_of(pi)))
    fail(ErrorCode::NotPrimitive, "transition matrix is not primitive on its support");
  const Vector stat = detail::stationary_by_power_iteration(pi);
  Vector values;
  for (const auto& pr : c->allowed_pairs()) values.push_back(stat[pr.first] * pi(pr.first, pr.second));
  // Renormalize away the last ulp of drift before validation.
  const double total = sum(values);
  for (double& v : values) v /= total;
  return JointProb(std::move(c), std::move(values));
}

inline Matrix to_transition(const JointProb& p) {
  const Constraint& c = p.constraint();
  const Vector m = p.marginal();
  Matrix pi(c.size(), c.size());
  for (std::size_t x = 0; x < c.size(); ++x)
    if (!(m[x] > 0.0)) fail(ErrorCode::ZeroMarginal, "symbol '" + c.alphabet()[x] + "' has zero marginal");
  const auto& pairs = c.allowed_pairs();
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pi(pairs[i].first, pairs[i].second) = p.values()[i] / m[pairs[i].first];
  return pi;
}

/// Entropy rate sum_x pi_x sum_y -Pi_xy log Pi_xy in nats.
inline double markov_entropy_rate(const JointProb& p) {
  const Vector m = p.marginal();
  const auto& pairs = p.constraint().allowed_pairs();
  double h = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double v = p.values()[i];
    if (v > 0.0) h -= v * std::log(v / m[pairs[i].first]);
  }
  return h;
}

struct PerronData {
  double root;
  Vector right;  // normalized to unit sum
};

inline PerronData perron(const Constraint& c) {
  if (!c.mixing()) fail(ErrorCode::NotMixing, "constraint adjacency is not primitive");
  const std::size_t n = c.size();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = c.adjacency()(i, j);
  Vector r(n, 1.0 / static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 0; it < 1000000; ++it) {
    Vector next = mat_vec(a, r);
    const double s = sum(next);
    for (double& x : next) x /= s;
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(next[i] - r[i]));
    r = std::move(next);
    lambda = s;
    if (resid <= 1e-15) break;
  }
  // Rayleigh-style refinement: lambda = (A r)_sum / r_sum with r normalized.
  lambda = sum(mat_vec(a, r));
  return {lambda, r};
}

/// Parry measure: Pi_xy = A_xy r_y / (lambda r_x).
inline JointProb max_entropy_chain(std::shared_ptr<const Constraint> c) {
  const PerronData pd = perron(*c);
  const std::size_t n = c->size();
  Matrix pi(n, n);
  for (std::size_t x = 0; x < n; ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      pi(x, y) = c->adjacency()(x, y) * pd.right[y] / (pd.root * pd.right[x]);
      s += pi(x, y);
    }
    for (std::size_t y = 0; y < n; ++y) pi(x, y) /= s;
  }
  return from_transition(std::move(c), pi);
}

/// Affine chart p = base + sum_i t_i basis_i of the stationary joint
/// probability vectors on a constraint.
struct FreeChart {
  Vector base;
  std::vector<Vector> basis;

  std::size_t dimension() const noexcept { return basis.size(); }

  Vector point(std::span<const double> t) const {
    Vector p = base;
    for (std::size_t k = 0; k < basis.size(); ++k)
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += t[k] * basis[k][i];
    return p;
  }

  Vector coords(std::span<const double> p) const {
    Vector t(basis.size(), 0.0);
    for (std::size_t k = 0; k < basis.size(); ++k)
      for (std::size_t i = 0; i < p.size(); ++i) t[k] += basis[k][i] * (p[i] - base[i]);
    return t;
  }
};

inline FreeChart free_chart(const Constraint& c, const Vector& anchor) {
  auto [e, b] = detail::affine_constraints(c);
  (void)b;
  return FreeChart{anchor, null_space_basis(e)};
}

inline FreeChart free_chart(const JointProb& anchor) { return free_chart(anchor.constraint(), anchor.values()); }

/// Euclidean projection of `v` onto {stationary joint vectors} ∩ {all coords >= delta}.
///
/// Works in the orthonormal chart of the affine hull, where the problem is
/// projection of t_v onto a polytope {G t >= h}. Candidate active sets are
/// enumerated by increasing size; the first whose KKT system has a feasible
/// primal point and non-negative multipliers is the unique optimum. Only
/// linearly independent active sets are tried, which suffices by the conic
/// Caratheodory theorem.
inline JointProb project_to_feasible(std::shared_ptr<const Constraint> c, const Vector& v, double delta) {
  const std::size_t m = c->allowed_pairs().size();
  if (v.size() != m) fail(ErrorCode::DimensionMismatch, "vector length does not match allowed 2-words");
  if (delta < 0.0) fail(ErrorCode::BadParameter, "delta must be non-negative");

  auto [e, b] = detail::affine_constraints(*c);
  const Vector p0 = detail::affine_particular_point(e, b);
  const FreeChart chart{p0, null_space_basis(e)};
  const std::size_t d = chart.dimension();

  // Already feasible: return it untouched.
  {
    bool ok = true;
    for (double x : v) ok = ok && x >= delta;
    const Vector ev = mat_vec(e, v);
    for (std::size_t i = 0; i < ev.size(); ++i) ok = ok && std::abs(ev[i] - b[i]) <= 1e-13;
    if (ok) return JointProb(c, v);
  }

  const Vector tv = chart.coords(v);
  // Constraint i: g_i . t >= h_i.
  auto g = [&](std::size_t i, std::size_t k) { return chart.basis[k][i]; };
  Vector h(m);
  for (std::size_t i = 0; i < m; ++i) h[i] = delta - p0[i];

  constexpr double kFeasTol = 1e-12;
  std::vector<std::size_t> subset;
  std::optional<Vector> best;

  auto try_subset = [&]() -> bool {
    const std::size_t s = subset.size();
    Vector lambda;
    if (s > 0) {
      Matrix gram(s, s);
      Vector rhs(s);
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t bb = 0; bb < s; ++bb) {
          double acc = 0.0;
          for (std::size_t k = 0; k < d; ++k) acc += g(subset[a], k) * g(subset[bb], k);
          gram(a, bb) = acc;
        }
        double gt = 0.0;
        for (std::size_t k = 0; k < d; ++k) gt += g(subset[a], k) * tv[k];
        rhs[a] = h[subset[a]] - gt;
      }
      auto sol = solve(gram, rhs, 1e-10);
      if (!sol) return false;
      lambda = *sol;
      for (double l : lambda)
        if (l < -kFeasTol) return false;
    }
    Vector t = tv;
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t k = 0; k < d; ++k) t[k] += lambda[a] * g(subset[a], k);
    for (std::size_t i = 0; i < m; ++i) {
      double gt = 0.0;
      for (std::size_t k = 0; k < d; ++k) gt += g(i, k) * t[k];
      if (gt < h[i] - kFeasTol) return false;
    }
    Vector p = chart.point(t);
    for (std::size_t i : subset) p[i] = delta;
    for (double& x : p) x = std::max(x, delta);
    best = std::move(p);
    return true;
  };

  auto rec = [&](auto&& self, std::size_t start, std::size_t remaining) -> bool {
    if (remaining == 0) return try_subset();
    for (std::size_t i = start; i + remaining <= m; ++i) {
      subset.push_back(i);
      if (self(self, i + 1, remaining - 1)) return true;
      subset.pop_back();
    }
    return false;
  };
  for (std::size_t size = 0; size <= d; ++size)
    if (rec(rec, 0, size)) break;
  if (!best) fail(ErrorCode::InfeasibleDelta, "no stationary joint vector has all entries >= " + std::to_string(delta));
  return JointProb(std::move(c), std::move(*best), 1e-10);
}

}  // namespace hmrate
