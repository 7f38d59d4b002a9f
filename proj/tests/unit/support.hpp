#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hmrate/hmrate.hpp"

namespace testing_support {

inline std::shared_ptr<const hmrate::Constraint> golden() {
  return std::make_shared<const hmrate::Constraint>(hmrate::build_constraint({"0", "1"}, {"11"}));
}

inline std::shared_ptr<const hmrate::Constraint> full_binary() {
  return std::make_shared<const hmrate::Constraint>(hmrate::build_constraint({"0", "1"}, {}));
}

/// Golden-mean chain with Pi = [[1-p, p], [1, 0]].
inline hmrate::JointProb golden_chain(double p) {
  hmrate::Matrix pi(2, 2);
  pi(0, 0) = 1.0 - p;
  pi(0, 1) = p;
  pi(1, 0) = 1.0;
  return hmrate::from_transition(golden(), pi);
}

inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

/// Golden-section maximization of a unimodal function on [a, b].
template <typename F>
double golden_section_max(F f, double a, double b, double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Brute-force p(z_1..z_n) by summing over every joint (x, c) path.
inline double brute_word_probability(const hmrate::JointProb& p, const hmrate::ChannelSpec& ch,
                                     const std::vector<int>& word, double eps) {
  const auto& c = p.constraint();
  const hmrate::Matrix pi = hmrate::to_transition(p);
  const hmrate::Vector marg = p.marginal();
  const std::size_t nx = c.size(), nc = ch.num_states();
  const std::size_t n = word.size();
  std::vector<std::size_t> xs(n), cs(n);
  double total = 0.0;
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= nx * nc;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = rest % nx;
      rest /= nx;
      cs[i] = rest % nc;
      rest /= nc;
    }
    double pr = marg[xs[0]];
    for (std::size_t i = 1; i < n; ++i) pr *= pi(xs[i - 1], xs[i]);
    for (std::size_t i = 0; i < n; ++i) {
      const int xin = *ch.input_index(c.alphabet()[xs[i]]);
      pr *= ch.state_probs()[cs[i]] * ch.kernel(xin, static_cast<int>(cs[i]), word[i])(eps);
    }
    total += pr;
  }
  return total;
}

inline std::vector<int> word_from_index(std::size_t index, std::size_t alphabet, int n) {
  std::vector<int> w(static_cast<std::size_t>(n));
  for (int i = n; i-- > 0;) {
    w[static_cast<std::size_t>(i)] = static_cast<int>(index % alphabet);
    index /= alphabet;
  }
  return w;
}

}  // namespace testing_support
