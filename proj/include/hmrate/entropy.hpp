#pragma once

// Output entropy approximants H_n = H(Z_0 | Z_{-n}^{-1}), the split
// H_n = G_n + F_n log eps, mutual information I_n, a Monte Carlo estimator,
// first-order expansion coefficients and convergence diagnostics.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hmrate/channel.hpp"
#include "hmrate/error.hpp"
#include "hmrate/finite_difference.hpp"
#include "hmrate/linalg.hpp"
#include "hmrate/markov_input.hpp"
#include "hmrate/output_model.hpp"
#include "hmrate/parallel.hpp"

namespace hmrate {

enum class EstimateMode { Exact, MonteCarlo };

inline const char* to_string(EstimateMode m) { return m == EstimateMode::Exact ? "exact" : "monte_carlo"; }

struct EntropyDecomposition {
  int n = 0;
  double eps = 0.0;
  double H = 0.0;
  double F = 0.0;
  double G = 0.0;
  double residual = 0.0;
  EstimateMode mode = EstimateMode::Exact;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double stderr_H = 0.0;
  double stderr_F = 0.0;
};

namespace detail {

/// Kernel values at eps must be probabilities.
inline void check_eps(const ChannelSpec& ch, double eps) {
  if (!std::isfinite(eps)) fail(ErrorCode::BadParameter, "eps must be finite");
  if (eps < 0.0) fail(ErrorCode::NonpositiveEps, "eps must be non-negative");
  for (std::size_t x = 0; x < ch.num_inputs(); ++x)
    for (std::size_t c = 0; c < ch.num_states(); ++c)
      for (std::size_t z = 0; z < ch.num_outputs(); ++z) {
        const double v = ch.kernel(static_cast<int>(x), static_cast<int>(c), static_cast<int>(z))(eps);
        if (v < -1e-12 || v > 1.0 + 1e-12)
          fail(ErrorCode::BadParameter, "eps = " + std::to_string(eps) + " gives a kernel entry outside [0, 1]");
      }
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

/// H(Z_0 | X_0) = sum_x p(x) sum_z -m log m with m = sum_c q_c p(z|x,c).
inline double conditional_entropy_given_input(const JointProb& p, const ChannelSpec& ch, double eps) {
  detail::check_eps(ch, eps);
  const Constraint& c = p.constraint();
  const Vector marg = p.marginal();
  double h = 0.0;
  for (std::size_t x = 0; x < c.size(); ++x) {
    const auto idx = ch.input_index(c.alphabet()[x]);
    if (!idx) fail(ErrorCode::AlphabetMismatch, "constraint symbol '" + c.alphabet()[x] + "' is not a channel input");
    double hx = 0.0;
    for (std::size_t z = 0; z < ch.num_outputs(); ++z) hx -= detail::xlogx(ch.marginal_kernel(*idx, static_cast<int>(z))(eps));
    h += marg[x] * hx;
  }
  return h;
}

/// Exact H_n, F_n, G_n by enumeration of all |Z|^{n+1} output words.
inline EntropyDecomposition entropy_decomposition(const OmegaSet& os, int n, double eps,
                                                  std::uint64_t budget = kDefaultWordBudget) {
  if (n < 0) fail(ErrorCode::BadParameter, "n must be non-negative");
  detail::check_eps(os.channel(), eps);
  detail::checked_word_count(os.num_outputs(), n + 1, budget);
  const auto mats = os.numeric(eps);
  const double log_eps = eps > 0.0 ? std::log(eps) : 0.0;

  struct Acc {
    double h = 0.0, f = 0.0, g = 0.0;
  };
  auto blocks = detail::word_blocks<Acc>(
      os, n, eps,
      [&](Acc& acc, const Word&, const Vector& v, const TropicalVector& o) {
        const double ph = sum(v);
        const Order oh = tropical_min(o);
        if (!(ph > 0.0) || oh.is_infinite()) return;
        for (std::size_t z = 0; z < mats.size(); ++z) {
          const double pw = sum(vec_mat(v, mats[z]));
          const Order ow = tropical_min(tropical_vec_mat(o, os.tropical_z(static_cast<int>(z))));
          if (!(pw > 0.0) || ow.is_infinite()) continue;
          const double log_cond = std::log(pw / ph);
          acc.h -= pw * log_cond;
          if (eps > 0.0) {
            const int ord = ow.value() - oh.value();
            acc.f -= ord * pw;
            acc.g -= pw * (log_cond - ord * log_eps);
          }
        }
      },
      budget);

  Vector hs, fs, gs;
  for (const auto& b : blocks) {
    hs.push_back(b.h);
    fs.push_back(b.f);
    gs.push_back(b.g);
  }
  EntropyDecomposition r;
  r.n = n;
  r.eps = eps;
  r.H = tree_sum(hs);
  if (eps > 0.0) {
    r.F = tree_sum(fs);
    r.G = tree_sum(gs);
    r.residual = std::abs(r.H - r.G - r.F * log_eps);
  } else {
    r.F = 0.0;
    r.G = r.H;
  }
  return r;
}

inline EntropyDecomposition entropy_decomposition(const JointProb& p, const ChannelSpec& ch, int n, double eps,
                                                  std::uint64_t budget = kDefaultWordBudget) {
  return entropy_decomposition(build_omegas(p, ch), n, eps, budget);
}

/// I_n = H_n - H(Z_0 | X_0).
inline double mutual_information_n(const OmegaSet& os, int n, double eps, std::uint64_t budget = kDefaultWordBudget) {
  return entropy_decomposition(os, n, eps, budget).H - conditional_entropy_given_input(os.input(), os.channel(), eps);
}

inline double mutual_information_n(const JointProb& p, const ChannelSpec& ch, int n, double eps,
                                   std::uint64_t budget = kDefaultWordBudget) {
  return mutual_information_n(build_omegas(p, ch), n, eps, budget);
}

// ---------------------------------------------------------------------------
// Monte Carlo.

inline constexpr std::size_t kMonteCarloBlocks = 64;

/// SplitMix64 used as a counter-based generator: output i is mix(key + i * gamma).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ + 0x9E3779B97F4A7C15ULL * counter_++); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Index drawn from non-negative weights.
  std::size_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      acc += w[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline std::uint64_t block_seed(std::uint64_t seed, std::size_t block) {
  return CounterRng::mix(seed ^ CounterRng::mix(0xD1B54A32D192ED03ULL + block));
}

/// Sample means of -log p(z_0 | z_{-n}^{-1}) and -ord over simulated output
/// words. Each step draws the input, then the channel state, then the output.
inline EntropyDecomposition entropy_monte_carlo(const OmegaSet& os, int n, double eps, std::uint64_t samples,
                                                std::uint64_t seed) {
  if (n < 0) fail(ErrorCode::BadParameter, "n must be non-negative");
  if (samples < 1) fail(ErrorCode::BadParameter, "samples must be >= 1");
  if (!(eps > 0.0)) fail(ErrorCode::NonpositiveEps, "Monte Carlo requires eps > 0");
  detail::check_eps(os.channel(), eps);

  const JointProb& p = os.input();
  const ChannelSpec& ch = os.channel();
  const std::size_t nx = p.constraint().size(), nc = ch.num_states(), nz = ch.num_outputs();
  const Matrix trans = to_transition(p);
  const Vector marg = p.marginal();
  const auto mats = os.numeric(eps);
  std::vector<std::vector<Vector>> emit(nx, std::vector<Vector>(nc, Vector(nz)));
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t z = 0; z < nz; ++z)
        emit[x][c][z] = std::max(0.0, ch.kernel(os.channel_input(static_cast<int>(x)), static_cast<int>(c), static_cast<int>(z))(eps));

  struct Acc {
    double sh = 0.0, sh2 = 0.0, sf = 0.0, sf2 = 0.0;
  };
  auto blocks = parallel_map<Acc>(kMonteCarloBlocks, [&](std::size_t b) {
    Acc acc;
    const std::uint64_t count = samples / kMonteCarloBlocks + (b < samples % kMonteCarloBlocks ? 1 : 0);
    CounterRng rng(block_seed(seed, b));
    Word z(static_cast<std::size_t>(n) + 1);
    for (std::uint64_t s = 0; s < count; ++s) {
      std::size_t x = rng.categorical(marg);
      for (std::size_t t = 0; t <= static_cast<std::size_t>(n); ++t) {
        if (t > 0) x = rng.categorical(trans.row(x));
        const std::size_t c = rng.categorical(ch.state_probs());
        z[t] = static_cast<int>(rng.categorical(emit[x][c]));
      }
      Vector v = os.stationary();
      TropicalVector o = os.stationary_orders();
      for (std::size_t t = 0; t < static_cast<std::size_t>(n); ++t) {
        v = vec_mat(v, mats[static_cast<std::size_t>(z[t])]);
        const double sv = sum(v);
        for (double& e : v) e /= sv;
        o = tropical_vec_mat(o, os.tropical_z(z[t]));
      }
      const double cond = sum(vec_mat(v, mats[static_cast<std::size_t>(z[static_cast<std::size_t>(n)])]));
      const Order before = tropical_min(o);
      const Order after = tropical_min(tropical_vec_mat(o, os.tropical_z(z[static_cast<std::size_t>(n)])));
      const double h = -std::log(cond);
      const double f = -static_cast<double>(after.value() - before.value());
      acc.sh += h;
      acc.sh2 += h * h;
      acc.sf += f;
      acc.sf2 += f * f;
    }
    return acc;
  });

  Vector sh, sh2, sf, sf2;
  for (const auto& a : blocks) {
    sh.push_back(a.sh);
    sh2.push_back(a.sh2);
    sf.push_back(a.sf);
    sf2.push_back(a.sf2);
  }
  const double N = static_cast<double>(samples);
  auto stats = [&](const Vector& s1, const Vector& s2, double& mean, double& se) {
    const double t1 = tree_sum(s1), t2 = tree_sum(s2);
    mean = t1 / N;
    const double var = samples > 1 ? std::max(0.0, (t2 - t1 * t1 / N) / (N - 1.0)) : 0.0;
    se = std::sqrt(var / N);
  };
  EntropyDecomposition r;
  r.n = n;
  r.eps = eps;
  r.mode = EstimateMode::MonteCarlo;
  r.samples = samples;
  r.seed = seed;
  stats(sh, sh2, r.H, r.stderr_H);
  stats(sf, sf2, r.F, r.stderr_F);
  r.G = r.H - r.F * std::log(eps);
  r.residual = std::abs(r.H - r.G - r.F * std::log(eps));
  return r;
}

inline EntropyDecomposition entropy_monte_carlo(const JointProb& p, const ChannelSpec& ch, int n, double eps,
                                                std::uint64_t samples, std::uint64_t seed) {
  return entropy_monte_carlo(build_omegas(p, ch), n, eps, samples, seed);
}

// ---------------------------------------------------------------------------
// First-order expansion.

struct ExpansionEstimate {
  double f1 = 0.0;
  double g1 = 0.0;
  double H0 = 0.0;
  std::vector<double> eps_grid;
  double f1_error = 0.0;
  double g1_error = 0.0;
  double richardson_error = 0.0;
};

namespace detail {

/// Value at 0 of the interpolating polynomial through (x_i, y_i).
inline double neville_at_zero(std::span<const double> x, std::span<const double> y) {
  Vector p(y.begin(), y.end());
  const std::size_t m = x.size();
  for (std::size_t k = 1; k < m; ++k)
    for (std::size_t i = 0; i + k < m; ++i) p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
  return p[0];
}

/// Quadratic extrapolant through the last three points and its error
/// estimate against the previous window (or the linear extrapolant).
inline std::pair<double, double> extrapolate(const Vector& x, const Vector& y) {
  const std::size_t m = x.size();
  const std::span<const double> xs(x), ys(y);
  const double est = neville_at_zero(xs.subspan(m - 3), ys.subspan(m - 3));
  const double alt = m >= 4 ? neville_at_zero(xs.subspan(m - 4, 3), ys.subspan(m - 4, 3))
                            : neville_at_zero(xs.subspan(m - 2), ys.subspan(m - 2));
  return {est, std::abs(est - alt)};
}

}  // namespace detail

/// f1 = lim F_n / eps and g1 = lim (G_n - G_n(0)) / eps by order-2 Richardson
/// extrapolation over a decreasing eps grid.
inline ExpansionEstimate estimate_expansion(const OmegaSet& os, int n, const std::vector<double>& eps_grid,
                                            std::uint64_t budget = kDefaultWordBudget) {
  if (eps_grid.size() < 3) fail(ErrorCode::BadParameter, "eps grid needs at least 3 values");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) fail(ErrorCode::NonpositiveEps, "eps grid values must be positive");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) fail(ErrorCode::BadParameter, "eps grid must be strictly decreasing");
  }
  ExpansionEstimate r;
  r.eps_grid = eps_grid;
  r.H0 = entropy_decomposition(os, n, 0.0, budget).G;
  Vector yf, yg;
  for (double e : eps_grid) {
    const auto d = entropy_decomposition(os, n, e, budget);
    yf.push_back(d.F / e);
    yg.push_back((d.G - r.H0) / e);
  }
  std::tie(r.f1, r.f1_error) = detail::extrapolate(eps_grid, yf);
  std::tie(r.g1, r.g1_error) = detail::extrapolate(eps_grid, yg);
  r.richardson_error = std::max(r.f1_error, r.g1_error);
  if (r.f1_error > 0.1 * std::abs(r.f1) + 1e-12 || r.g1_error > 0.1 * std::abs(r.g1) + 1e-12)
    fail(ErrorCode::GridTooCoarse, "Richardson error exceeds 10% of the extrapolated value");
  return r;
}

inline ExpansionEstimate estimate_expansion(const JointProb& p, const ChannelSpec& ch, int n,
                                            const std::vector<double>& eps_grid) {
  return estimate_expansion(build_omegas(p, ch), n, eps_grid);
}

// ---------------------------------------------------------------------------
// Convergence diagnostics.

/// exp(slope) of the least-squares line through (x_i, log d_i), i.e. the
/// per-unit geometric ratio. Zero entries are dropped; 0 if fewer than two
/// positive entries remain.
inline double geometric_ratio(const std::vector<double>& x, const std::vector<double>& d) {
  if (x.size() != d.size()) fail(ErrorCode::DimensionMismatch, "geometric fit needs matching lengths");
  Vector xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (d[i] > 0.0) {
      xs.push_back(x[i]);
      ys.push_back(std::log(d[i]));
    }
  if (xs.size() < 2) return 0.0;
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / m;
    my += ys[i] / m;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) return 0.0;
  return std::exp(sxy / sxx);
}

struct ConvergenceReport {
  double eps = 0.0;
  std::vector<int> n_list;
  std::vector<double> H, F, G;
  std::vector<Vector> gradient;
  /// Differences between consecutive entries of n_list, indexed by the smaller n.
  std::vector<double> dH, dF, dG, dgrad;
  double rho_H = 0.0, rho_F = 0.0, rho_G = 0.0, rho_grad = 0.0;
  bool all_contracting = false;
};

/// Successive differences of H_n, F_n, G_n and of the FD gradient of I_n in
/// the free chart at p, with fitted geometric ratios.
inline ConvergenceReport convergence_diagnostics(const JointProb& p, const ChannelSpec& ch, double eps,
                                                 const std::vector<int>& n_list, double h = kDefaultFdStep,
                                                 std::uint64_t budget = kDefaultWordBudget) {
  if (n_list.size() < 3) fail(ErrorCode::BadParameter, "n list needs at least 3 entries");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) fail(ErrorCode::BadParameter, "n list must be increasing");

  ConvergenceReport r;
  r.eps = eps;
  r.n_list = n_list;
  const OmegaSet os = build_omegas(p, ch);
  const FreeChart chart = free_chart(p);
  const auto cptr = p.constraint_ptr();
  const Vector origin(chart.dimension(), 0.0);
  for (int n : n_list) {
    const auto d = entropy_decomposition(os, n, eps, budget);
    r.H.push_back(d.H);
    r.F.push_back(d.F);
    r.G.push_back(d.G);
    const ChartObjective objective = [&](const Vector& t) {
      return mutual_information_n(JointProb(cptr, chart.point(t)), ch, n, eps, budget);
    };
    r.gradient.push_back(fd_gradient(objective, chart, origin, 0.0, h));
  }
  std::vector<double> xs;
  for (std::size_t i = 0; i + 1 < n_list.size(); ++i) {
    xs.push_back(n_list[i]);
    r.dH.push_back(std::abs(r.H[i + 1] - r.H[i]));
    r.dF.push_back(std::abs(r.F[i + 1] - r.F[i]));
    r.dG.push_back(std::abs(r.G[i + 1] - r.G[i]));
    r.dgrad.push_back(distance(r.gradient[i + 1], r.gradient[i]));
  }
  r.rho_H = geometric_ratio(xs, r.dH);
  r.rho_F = geometric_ratio(xs, r.dF);
  r.rho_G = geometric_ratio(xs, r.dG);
  r.rho_grad = geometric_ratio(xs, r.dgrad);
  r.all_contracting = r.rho_H < 1.0 && r.rho_F < 1.0 && r.rho_G < 1.0 && r.rho_grad < 1.0;
  return r;
}

}  // namespace hmrate
