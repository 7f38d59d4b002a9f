#pragma once

// Central finite differences over a free chart, with the stencil shrunk
// until it fits inside the feasible region.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "hmrate/error.hpp"
#include "hmrate/linalg.hpp"
#include "hmrate/markov_input.hpp"

namespace hmrate {

inline constexpr double kDefaultFdStep = 1e-4;
inline constexpr double kMinFdStep = 1e-7;

using ChartObjective = std::function<double(const Vector& t)>;
using ChartDomain = std::function<bool(const Vector& t)>;

/// Chart points whose joint vector has every entry >= delta.
inline ChartDomain chart_domain(const FreeChart& chart, double delta) {
  return [chart, delta](const Vector& t) {
    for (double x : chart.point(t))
      if (!(x >= delta)) return false;
    return true;
  };
}

/// Accepts every point; for calibration objectives.
inline ChartDomain unbounded_domain() {
  return [](const Vector&) { return true; };
}

namespace detail {

inline Vector shifted(const Vector& t, std::size_t i, double hi, std::size_t j = 0, double hj = 0.0) {
  Vector s = t;
  s[i] += hi;
  s[j] += hj;
  return s;
}

inline double fit_step(const ChartDomain& domain, const Vector& t, double h, const std::function<bool(double)>& fits) {
  if (!(h > 0.0)) fail(ErrorCode::BadParameter, "finite-difference step must be positive");
  if (!domain(t)) fail(ErrorCode::StepUnderflow, "stencil centre lies outside the domain");
  while (!fits(h)) {
    h *= 0.5;
    if (h < kMinFdStep) fail(ErrorCode::StepUnderflow, "central stencil does not fit inside the domain");
  }
  return h;
}

}  // namespace detail

/// Central-difference gradient; each direction shrinks its own step.
inline Vector fd_gradient(const ChartObjective& f, const Vector& t, const ChartDomain& domain,
                          double h = kDefaultFdStep) {
  Vector g(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double hi = detail::fit_step(domain, t, h, [&](double s) {
      return domain(detail::shifted(t, i, s)) && domain(detail::shifted(t, i, -s));
    });
    g[i] = (f(detail::shifted(t, i, hi)) - f(detail::shifted(t, i, -hi))) / (2.0 * hi);
  }
  return g;
}

inline Vector fd_gradient(const ChartObjective& f, const FreeChart& chart, const Vector& t, double delta,
                          double h = kDefaultFdStep) {
  return fd_gradient(f, t, chart_domain(chart, delta), h);
}

/// Second-order central Hessian with one common step, symmetrized.
inline Matrix fd_hessian(const ChartObjective& f, const Vector& t, const ChartDomain& domain,
                         double h = kDefaultFdStep) {
  const std::size_t d = t.size();
  const double s = detail::fit_step(domain, t, h, [&](double step) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j)
        for (double a : {-step, step})
          for (double b : {-step, step})
            if (!domain(i == j ? detail::shifted(t, i, a) : detail::shifted(t, i, a, j, b))) return false;
    return true;
  });
  const double f0 = f(t);
  Matrix hess(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    hess(i, i) = (f(detail::shifted(t, i, s)) - 2.0 * f0 + f(detail::shifted(t, i, -s))) / (s * s);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = (f(detail::shifted(t, i, s, j, s)) - f(detail::shifted(t, i, s, j, -s)) -
                        f(detail::shifted(t, i, -s, j, s)) + f(detail::shifted(t, i, -s, j, -s))) /
                       (4.0 * s * s);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double m = 0.5 * (hess(i, j) + hess(j, i));
      hess(i, j) = m;
      hess(j, i) = m;
    }
  return hess;
}

inline Matrix fd_hessian(const ChartObjective& f, const FreeChart& chart, const Vector& t, double delta,
                         double h = kDefaultFdStep) {
  return fd_hessian(f, t, chart_domain(chart, delta), h);
}

}  // namespace hmrate
