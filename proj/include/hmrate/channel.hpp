#pragma once

// Finite-state memoryless channels p(z|x,c)(eps) with an i.i.d. state c ~ q.
// Kernels are polynomials in eps.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmrate/eps_series.hpp"
#include "hmrate/error.hpp"

namespace hmrate {

inline constexpr double kDefaultEpsMax = 0.1;
inline constexpr int kPositivityGridPoints = 64;

/// kernel[x][c][z] = p(z | x, c) as a polynomial in eps.
using KernelTable = std::vector<std::vector<std::vector<Polynomial>>>;

class ChannelSpec {
 public:
  const std::vector<std::string>& inputs() const noexcept { return inputs_; }
  const std::vector<std::string>& states() const noexcept { return states_; }
  const std::vector<double>& state_probs() const noexcept { return q_; }
  const std::vector<std::string>& outputs() const noexcept { return outputs_; }
  const KernelTable& table() const noexcept { return kernel_; }
  /// Noiseless output index z(x) for each input index x.
  const std::vector<int>& noiseless_map() const noexcept { return noiseless_; }
  double eps_max() const noexcept { return eps_max_; }

  std::size_t num_inputs() const noexcept { return inputs_.size(); }
  std::size_t num_states() const noexcept { return states_.size(); }
  std::size_t num_outputs() const noexcept { return outputs_.size(); }

  const Polynomial& kernel(int x, int c, int z) const {
    return kernel_[static_cast<std::size_t>(x)][static_cast<std::size_t>(c)][static_cast<std::size_t>(z)];
  }

  /// Largest finite order among kernel entries.
  int max_order() const noexcept { return o_m_; }
  /// True if some kernel entry is the zero polynomial (order +inf).
  bool has_zero_entries() const noexcept { return has_zero_; }

  /// State-averaged kernel sum_c q_c p(z|x,c).
  Polynomial marginal_kernel(int x, int z) const {
    Polynomial out;
    for (std::size_t c = 0; c < q_.size(); ++c) out = out + q_[c] * kernel(x, static_cast<int>(c), z);
    return out;
  }

  std::optional<int> input_index(const std::string& s) const { return find(inputs_, s); }
  std::optional<int> output_index(const std::string& s) const { return find(outputs_, s); }

  friend ChannelSpec custom(std::vector<std::string> inputs, std::vector<std::string> states, std::vector<double> q,
                            std::vector<std::string> outputs, KernelTable table, std::vector<int> noiseless_map,
                            double eps_max);

 private:
  static std::optional<int> find(const std::vector<std::string>& v, const std::string& s) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] == s) return static_cast<int>(i);
    return std::nullopt;
  }

  std::vector<std::string> inputs_;
  std::vector<std::string> states_;
  std::vector<double> q_;
  std::vector<std::string> outputs_;
  KernelTable kernel_;
  std::vector<int> noiseless_;
  double eps_max_ = kDefaultEpsMax;
  int o_m_ = 0;
  bool has_zero_ = false;
};

/// Validates and builds a channel. Throws RowSumNotOne, NoiselessViolation,
/// NotInjective, or BadParameter for malformed shapes, state distributions,
/// or kernels leaving [0,1] on the eps grid.
inline ChannelSpec custom(std::vector<std::string> inputs, std::vector<std::string> states, std::vector<double> q,
                          std::vector<std::string> outputs, KernelTable table, std::vector<int> noiseless_map,
                          double eps_max = kDefaultEpsMax) {
  const std::size_t nx = inputs.size(), nc = states.size(), nz = outputs.size();
  if (nx == 0 || nc == 0 || nz == 0) fail(ErrorCode::BadParameter, "inputs, states and outputs must be non-empty");
  if (q.size() != nc) fail(ErrorCode::BadParameter, "state probability count does not match states");
  if (!(eps_max > 0.0)) fail(ErrorCode::BadParameter, "eps_max must be positive");
  double qs = 0.0;
  for (double v : q) {
    if (!(v >= 0.0)) fail(ErrorCode::BadParameter, "state probabilities must be non-negative");
    qs += v;
  }
  if (std::abs(qs - 1.0) > 1e-12) fail(ErrorCode::BadParameter, "state probabilities must sum to 1");
  if (table.size() != nx) fail(ErrorCode::BadParameter, "kernel table must have one block per input");
  for (const auto& bx : table) {
    if (bx.size() != nc) fail(ErrorCode::BadParameter, "kernel table must have one row per state");
    for (const auto& row : bx)
      if (row.size() != nz) fail(ErrorCode::BadParameter, "kernel rows must have one entry per output");
  }
  if (noiseless_map.size() != nx) fail(ErrorCode::BadParameter, "noiseless map must cover every input");
  for (std::size_t x = 0; x < nx; ++x) {
    const int z = noiseless_map[x];
    if (z < 0 || static_cast<std::size_t>(z) >= nz) fail(ErrorCode::BadParameter, "noiseless map points outside outputs");
    for (std::size_t y = 0; y < x; ++y)
      if (noiseless_map[y] == z)
        fail(ErrorCode::NotInjective, "inputs '" + inputs[y] + "' and '" + inputs[x] + "' share noiseless output");
  }

  ChannelSpec ch;
  ch.o_m_ = 0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& row = table[x][c];
      Polynomial total;
      for (std::size_t z = 0; z < nz; ++z) {
        total = total + row[z];
        const Order o = row[z].order();
        if (o.is_infinite()) ch.has_zero_ = true;
        else ch.o_m_ = std::max(ch.o_m_, o.value());
        for (int g = 0; g < kPositivityGridPoints; ++g) {
          const double eps = eps_max * g / (kPositivityGridPoints - 1);
          const double v = row[z](eps);
          if (v < -1e-12 || v > 1.0 + 1e-12)
            fail(ErrorCode::BadParameter, "p(" + outputs[z] + "|" + inputs[x] + "," + states[c] +
                                              ") leaves [0,1] at eps=" + std::to_string(eps));
        }
      }
      const std::size_t deg = total.coeffs().size();
      for (std::size_t j = 0; j < std::max<std::size_t>(deg, 1); ++j) {
        const double want = j == 0 ? 1.0 : 0.0;
        if (std::abs(total.coeff(j) - want) > 1e-12)
          fail(ErrorCode::RowSumNotOne, "kernel row (" + inputs[x] + "," + states[c] +
                                            ") does not sum to the constant 1 (eps^" + std::to_string(j) + ")");
      }
      const double at0 = row[static_cast<std::size_t>(noiseless_map[x])](0.0);
      if (std::abs(at0 - 1.0) > 1e-12)
        fail(ErrorCode::NoiselessViolation, "p(z(" + inputs[x] + ")|" + inputs[x] + "," + states[c] + ")(0) != 1");
    }

  ch.inputs_ = std::move(inputs);
  ch.states_ = std::move(states);
  ch.q_ = std::move(q);
  ch.outputs_ = std::move(outputs);
  ch.kernel_ = std::move(table);
  ch.noiseless_ = std::move(noiseless_map);
  ch.eps_max_ = eps_max;
  return ch;
}

namespace detail {

inline std::vector<std::vector<Polynomial>> bsc_rows(double k) {
  return {{Polynomial({1.0, -k}), Polynomial({0.0, k})}, {Polynomial({0.0, k}), Polynomial({1.0, -k})}};
}

}  // namespace detail

/// Binary symmetric channel with crossover eps.
inline ChannelSpec bsc(double eps_max = kDefaultEpsMax) {
  const auto rows = detail::bsc_rows(1.0);
  return custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, {{rows[0]}, {rows[1]}}, {0, 1}, eps_max);
}

/// Binary erasure channel with erasure rate eps; outputs {0, 1, e}.
inline ChannelSpec bec(double eps_max = kDefaultEpsMax) {
  const Polynomial keep({1.0, -1.0}), erase({0.0, 1.0}), never;
  KernelTable t{{{keep, never, erase}}, {{never, keep, erase}}};
  return custom({"0", "1"}, {"s"}, {1.0}, {"0", "1", "e"}, std::move(t), {0, 1}, eps_max);
}

/// Two-state channel: BSC(eps) in the good state (probability q_good),
/// BSC(k eps) in the bad state.
inline ChannelSpec gilbert_elliott(double q_good, double k, double eps_max = kDefaultEpsMax) {
  if (!(q_good > 0.0 && q_good < 1.0)) fail(ErrorCode::BadParameter, "q_good must lie in (0,1)");
  if (!(k > 0.0)) fail(ErrorCode::BadParameter, "k must be positive");
  if (k * eps_max > 1.0) fail(ErrorCode::BadParameter, "k * eps_max must not exceed 1");
  const auto good = detail::bsc_rows(1.0);
  const auto bad = detail::bsc_rows(k);
  KernelTable t{{good[0], bad[0]}, {good[1], bad[1]}};
  return custom({"0", "1"}, {"good", "bad"}, {q_good, 1.0 - q_good}, {"0", "1"}, std::move(t), {0, 1}, eps_max);
}

}  // namespace hmrate
