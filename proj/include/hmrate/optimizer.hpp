#pragma once

// Maximization of I_n(Z; X) over stationary joint vectors in M_delta:
// concavity certification on a chart grid, projected gradient ascent and
// the maximizer sequence over n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hmrate/channel.hpp"
#include "hmrate/constraint.hpp"
#include "hmrate/entropy.hpp"
#include "hmrate/error.hpp"
#include "hmrate/finite_difference.hpp"
#include "hmrate/linalg.hpp"
#include "hmrate/markov_input.hpp"

namespace hmrate {

inline constexpr double kDefaultDelta = 1e-3;
inline constexpr double kDefaultOptTol = 1e-7;
inline constexpr int kDefaultMaxIter = 500;
inline constexpr double kLineSearchFloor = 1e-12;
inline constexpr double kArmijoC = 1e-4;

/// Per-coordinate bounding box of {t : chart.point(t) >= delta}, found by
/// enumerating polytope vertices.
struct ChartBox {
  Vector lo, hi;
};

inline ChartBox feasible_box(const FreeChart& chart, double delta) {
  const std::size_t d = chart.dimension(), m = chart.base.size();
  if (d == 0) fail(ErrorCode::BadParameter, "chart has dimension 0");
  ChartBox box{Vector(d, std::numeric_limits<double>::infinity()), Vector(d, -std::numeric_limits<double>::infinity())};
  std::vector<std::size_t> pick(d);
  for (std::size_t i = 0; i < d; ++i) pick[i] = i;
  bool any = false;
  for (;;) {
    Matrix a(d, d);
    Vector rhs(d);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t k = 0; k < d; ++k) a(r, k) = chart.basis[k][pick[r]];
      rhs[r] = delta - chart.base[pick[r]];
    }
    if (auto t = solve(a, rhs)) {
      const Vector p = chart.point(*t);
      bool ok = true;
      for (double x : p) ok = ok && x >= delta - 1e-12;
      if (ok) {
        any = true;
        for (std::size_t k = 0; k < d; ++k) {
          box.lo[k] = std::min(box.lo[k], (*t)[k]);
          box.hi[k] = std::max(box.hi[k], (*t)[k]);
        }
      }
    }
    std::size_t i = d;
    while (i > 0 && pick[i - 1] == m - d + (i - 1)) --i;
    if (i == 0) break;
    --i;
    ++pick[i];
    for (std::size_t j = i + 1; j < d; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (!any) fail(ErrorCode::InfeasibleDelta, "M_delta is empty for delta = " + std::to_string(delta));
  return box;
}

/// Interior tensor grid lo + (i+1)/(g+1) (hi - lo), restricted to M_delta.
inline std::vector<Vector> chart_grid(const FreeChart& chart, double delta, int grid) {
  if (grid < 2) fail(ErrorCode::BadParameter, "grid needs at least 2 points per dimension");
  const ChartBox box = feasible_box(chart, delta);
  const std::size_t d = chart.dimension();
  const ChartDomain inside = chart_domain(chart, delta);
  std::vector<Vector> out;
  std::vector<int> idx(d, 0);
  for (;;) {
    Vector t(d);
    for (std::size_t k = 0; k < d; ++k) t[k] = box.lo[k] + (idx[k] + 1.0) / (grid + 1.0) * (box.hi[k] - box.lo[k]);
    if (inside(t)) out.push_back(t);
    std::size_t k = 0;
    while (k < d && ++idx[k] == grid) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

struct ConcavityReport {
  int n = 0;
  double eps = 0.0;
  double delta = 0.0;
  int grid = 0;
  std::vector<Vector> points;
  std::vector<double> values;
  std::vector<double> max_eigs;
  double max_eigenvalue = -std::numeric_limits<double>::infinity();
  bool passed = false;
};

/// Largest FD Hessian eigenvalue of f over the chart grid; PASS iff all are
/// strictly negative. Stencils may reach into M_{delta/2}.
inline ConcavityReport certify_concavity_of(const ChartObjective& f, const FreeChart& chart, double delta, int grid,
                                            double h = kDefaultFdStep) {
  ConcavityReport r;
  r.delta = delta;
  r.grid = grid;
  r.points = chart_grid(chart, delta, grid);
  const ChartDomain stencil = chart_domain(chart, 0.5 * delta);
  for (const auto& t : r.points) {
    r.values.push_back(f(t));
    const auto eig = symmetric_eigenvalues(fd_hessian(f, t, stencil, h));
    const double top = eig.back();
    r.max_eigs.push_back(top);
    r.max_eigenvalue = std::max(r.max_eigenvalue, top);
  }
  r.passed = !r.points.empty() && r.max_eigenvalue < 0.0;
  return r;
}

namespace detail {

inline ChartObjective mi_objective(const ChannelSpec& ch, std::shared_ptr<const Constraint> c, const FreeChart& chart,
                                   int n, double eps, std::uint64_t budget) {
  return [ch, c, chart, n, eps, budget](const Vector& t) {
    return mutual_information_n(JointProb(c, chart.point(t)), ch, n, eps, budget);
  };
}

}  // namespace detail

inline ConcavityReport certify_concavity(const ChannelSpec& ch, std::shared_ptr<const Constraint> c, int n, double eps,
                                         double delta, int grid, std::uint64_t budget = kDefaultWordBudget) {
  const FreeChart chart = free_chart(*c, max_entropy_chain(c).values());
  if (chart.dimension() < 1) fail(ErrorCode::BadParameter, "chart has dimension 0");
  auto r = certify_concavity_of(detail::mi_objective(ch, c, chart, n, eps, budget), chart, delta, grid);
  r.n = n;
  r.eps = eps;
  return r;
}

// ---------------------------------------------------------------------------
// Projected gradient ascent.

enum class OptStatus { Converged, MaxIter, NoProgress };

inline const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::Converged: return "converged";
    case OptStatus::MaxIter: return "max_iter";
    case OptStatus::NoProgress: return "no_progress";
  }
  return "?";
}

struct OptimizationResult {
  JointProb argmax;
  Vector t;
  double value = 0.0;
  double grad_norm = 0.0;
  double raw_grad_norm = 0.0;
  std::vector<double> hessian_eigs;
  int iterations = 0;
  int n = 0;
  double eps = 0.0;
  double delta = 0.0;
  OptStatus status = OptStatus::MaxIter;
  bool touches_boundary = false;
  bool certified = false;
};

struct AscentOptions {
  double delta = kDefaultDelta;
  double tol = kDefaultOptTol;
  int max_iter = kDefaultMaxIter;
  double h = kDefaultFdStep;
};

/// Projected gradient ascent on a chart objective over M_delta. Steps start
/// from a Barzilai-Borwein estimate and are halved until the Armijo test
/// passes; the test tolerates rounding-level changes in f. `certified` is
/// set when every Hessian eigenvalue at the result is negative.
inline OptimizationResult ascend(const ChartObjective& f, std::shared_ptr<const Constraint> c, const FreeChart& chart,
                                 const Vector& start, const AscentOptions& opt) {
  if (!(opt.tol > 0.0)) fail(ErrorCode::BadParameter, "tol must be positive");
  if (opt.max_iter < 0) fail(ErrorCode::BadParameter, "max_iter must be non-negative");
  const double delta = opt.delta;
  const ChartDomain stencil = chart_domain(chart, 0.5 * delta);
  auto project = [&](const Vector& t) { return chart.coords(project_to_feasible(c, chart.point(t), delta).values()); };
  auto axpy_t = [](const Vector& t, double s, const Vector& g) {
    Vector out = t;
    for (std::size_t i = 0; i < t.size(); ++i) out[i] += s * g[i];
    return out;
  };
  auto projected_norm = [&](const Vector& t, const Vector& g) {
    constexpr double tau = 1e-4;
    return distance(project(axpy_t(t, tau, g)), t) / tau;
  };

  OptimizationResult r;
  r.delta = delta;
  Vector t = project(start);
  double ft = f(t);
  Vector g = fd_gradient(f, t, stencil, opt.h);
  double pg = projected_norm(t, g);
  double step = 1.0;
  Vector t_prev, g_prev;
  r.status = OptStatus::MaxIter;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (pg <= opt.tol) {
      r.status = OptStatus::Converged;
      break;
    }
    if (!t_prev.empty()) {
      Vector dt(t.size()), dg(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        dt[i] = t[i] - t_prev[i];
        dg[i] = g[i] - g_prev[i];
      }
      const double curv = -dot(dt, dg);
      if (curv > 0.0) step = std::clamp(dot(dt, dt) / curv, 1e-8, 1e8);
      else step = std::min(2.0 * step, 1e8);
    }
    const double noise = 1e-14 * std::max(1.0, std::abs(ft));
    bool accepted = false;
    Vector t_new;
    double f_new = 0.0;
    for (double s = step; s >= kLineSearchFloor; s *= 0.5) {
      t_new = project(axpy_t(t, s, g));
      f_new = f(t_new);
      Vector dt(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) dt[i] = t_new[i] - t[i];
      if (f_new >= ft + kArmijoC * dot(g, dt) - noise) {
        accepted = true;
        step = s;
        break;
      }
    }
    if (!accepted) {
      r.status = OptStatus::NoProgress;
      break;
    }
    t_prev = t;
    g_prev = g;
    t = t_new;
    ft = f_new;
    g = fd_gradient(f, t, stencil, opt.h);
    pg = projected_norm(t, g);
  }
  if (r.status == OptStatus::MaxIter && pg <= opt.tol) r.status = OptStatus::Converged;
  r.iterations = it;
  r.t = t;
  r.argmax = JointProb(c, chart.point(t));
  r.value = ft;
  r.grad_norm = pg;
  r.raw_grad_norm = norm2(g);
  r.hessian_eigs = symmetric_eigenvalues(fd_hessian(f, t, stencil, opt.h));
  r.touches_boundary = !r.argmax.in_m_delta(delta + 1e-9);
  r.certified = std::all_of(r.hessian_eigs.begin(), r.hessian_eigs.end(), [](double e) { return e < 0.0; });
  return r;
}

struct MaximizeOptions {
  double delta = kDefaultDelta;
  double tol = kDefaultOptTol;
  int max_iter = kDefaultMaxIter;
  double h = kDefaultFdStep;
  std::optional<Vector> start;
  std::uint64_t budget = kDefaultWordBudget;
};

/// Maximizes I_n over M_delta starting from the max-entropy chain projected
/// into M_delta (or opt.start, a joint vector).
inline OptimizationResult maximize_mi(const ChannelSpec& ch, std::shared_ptr<const Constraint> c, int n, double eps,
                                      const MaximizeOptions& opt = {}) {
  const JointProb parry = max_entropy_chain(c);
  const FreeChart chart = free_chart(*c, parry.values());
  const Vector start_p = opt.start ? *opt.start : parry.values();
  const Vector start = chart.coords(project_to_feasible(c, start_p, opt.delta).values());
  auto r = ascend(detail::mi_objective(ch, c, chart, n, eps, opt.budget), c, chart, start,
                  AscentOptions{opt.delta, opt.tol, opt.max_iter, opt.h});
  r.n = n;
  r.eps = eps;
  return r;
}

/// Deterministic feasible starting points: the projected max-entropy chain,
/// then uniform draws in the chart box projected into M_delta.
inline std::vector<Vector> start_points(std::shared_ptr<const Constraint> c, double delta, int count,
                                        std::uint64_t seed) {
  if (count < 1) fail(ErrorCode::BadParameter, "starts must be >= 1");
  const JointProb parry = max_entropy_chain(c);
  const FreeChart chart = free_chart(*c, parry.values());
  std::vector<Vector> out{project_to_feasible(c, parry.values(), delta).values()};
  if (count == 1) return out;
  const ChartBox box = feasible_box(chart, delta);
  CounterRng rng(block_seed(seed, 0));
  while (static_cast<int>(out.size()) < count) {
    Vector t(chart.dimension());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = box.lo[k] + rng.uniform() * (box.hi[k] - box.lo[k]);
    out.push_back(project_to_feasible(c, chart.point(t), delta).values());
  }
  return out;
}

struct MultiStartResult {
  std::vector<OptimizationResult> runs;
  std::size_t best = 0;
  /// Largest distance between any run's argmax and the best one.
  double spread = 0.0;
};

inline MultiStartResult maximize_mi_multistart(const ChannelSpec& ch, std::shared_ptr<const Constraint> c, int n,
                                               double eps, int starts, std::uint64_t seed,
                                               const MaximizeOptions& opt = {}) {
  MultiStartResult m;
  for (const auto& s : start_points(c, opt.delta, starts, seed)) {
    MaximizeOptions o = opt;
    o.start = s;
    m.runs.push_back(maximize_mi(ch, c, n, eps, o));
  }
  for (std::size_t i = 1; i < m.runs.size(); ++i)
    if (m.runs[i].value > m.runs[m.best].value) m.best = i;
  for (const auto& r : m.runs) m.spread = std::max(m.spread, distance(r.argmax.values(), m.runs[m.best].argmax.values()));
  return m;
}

// ---------------------------------------------------------------------------
// Maximizer sequence over n.

struct ConvergenceStudy {
  double eps = 0.0;
  std::vector<OptimizationResult> entries;
  /// |p_{n_{i+1}} - p_{n_i}|, indexed by i.
  std::vector<double> gaps;
  double fitted_rho = 0.0;
  bool contracting = false;
};

/// maximize_mi for each n (warm-started from the previous argmax), gaps
/// between successive argmaxes and their per-unit geometric ratio.
inline ConvergenceStudy capacity_sequence(const ChannelSpec& ch, std::shared_ptr<const Constraint> c, double eps,
                                          const std::vector<int>& n_list, double delta, double tol,
                                          int max_iter = kDefaultMaxIter,
                                          std::uint64_t budget = kDefaultWordBudget) {
  if (n_list.empty()) fail(ErrorCode::BadParameter, "n list is empty");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) fail(ErrorCode::BadParameter, "n list must be increasing");
  ConvergenceStudy s;
  s.eps = eps;
  MaximizeOptions opt;
  opt.delta = delta;
  opt.tol = tol;
  opt.max_iter = max_iter;
  opt.budget = budget;
  for (int n : n_list) {
    s.entries.push_back(maximize_mi(ch, c, n, eps, opt));
    opt.start = s.entries.back().argmax.values();
  }
  std::vector<double> xs;
  for (std::size_t i = 0; i + 1 < s.entries.size(); ++i) {
    xs.push_back(n_list[i]);
    s.gaps.push_back(distance(s.entries[i + 1].argmax.values(), s.entries[i].argmax.values()));
  }
  s.fitted_rho = geometric_ratio(xs, s.gaps);
  s.contracting = s.gaps.size() >= 2 && s.fitted_rho < 1.0;
  return s;
}

}  // namespace hmrate
