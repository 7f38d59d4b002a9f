// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hmrate/harness.hpp"
#include "support.hpp"

using namespace hmrate;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

OmegaSet golden_bsc(double p) { return build_omegas(ts::golden_chain(p), bsc()); }

OmegaSet parry_bsc() { return build_omegas(max_entropy_chain(ts::golden()), bsc()); }

Outcome golden_example() {
  double pi_err = 0.0, coeff_err = 0.0;
  bool orders_ok = true;
  for (double p : {0.3, 0.5, 0.7}) {
    const OmegaSet os = golden_bsc(p);
    const Vector m = os.input().marginal();
    pi_err = std::max({pi_err, std::abs(m[0] - 1.0 / (p + 1.0)), std::abs(m[1] - p / (p + 1.0))});
    const Word w = os.parse_word("110");
    const EpsSeries s = word_probability_series(os, w);
    orders_ok = orders_ok && s.order() == Order(1) && word_order(os, w) == Order(1);
    const double want = (2.0 * p - p * p) / (1.0 + p);
    coeff_err = std::max(coeff_err, std::abs(s.leading() - want) / want);
  }
  return {pi_err <= 1e-12 && coeff_err <= 1e-9 && orders_ok,
          "pi err " + num(pi_err) + ", 110 order " + (orders_ok ? "1" : "!=1") + ", coeff rel err " + num(coeff_err)};
}

Outcome decomposition_identity() {
  const OmegaSet os = parry_bsc();
  double worst = 0.0;
  for (double eps : {1e-2, 1e-3})
    for (int n = 4; n <= 10; ++n) {
      const auto d = entropy_decomposition(os, n, eps);
      worst = std::max(worst, std::abs(d.H - d.G - d.F * std::log(eps)));
    }
  return {worst <= 1e-10, "max |H - G - F log eps| = " + num(worst) + " over 14 cases"};
}

Outcome order_oracle() {
  std::uint64_t words = 0, mismatches = 0;
  for (const OmegaSet& os : {parry_bsc(), build_omegas(max_entropy_chain(ts::golden()), gilbert_elliott(0.8, 2.0))})
    for (int n = 1; n <= 10; ++n)
      for_each_word_series(os, n, [&](const Word&, const EpsSeries& s, Order o) {
        ++words;
        if (s.order() != o) ++mismatches;
      });
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(words) + " words"};
}

Outcome atypical_decay() {
  const OmegaSet os = parry_bsc();
  std::vector<double> ns, mass;
  for (int n = 6; n <= 10; ++n) {
    ns.push_back(n);
    mass.push_back(classify_typical(os, n, 0.3, 0.01).atypical_mass);
  }
  const double rho = geometric_ratio(ns, mass);
  return {mass.back() <= mass.front() && rho < 1.0,
          "mass n=6 " + num(mass.front()) + ", n=10 " + num(mass.back()) + ", ratio " + num(rho)};
}

Outcome stabilization() {
  const OmegaSet os = parry_bsc();
  const auto pairs = stabilization_pairs(os, 6, 0, 50);
  std::size_t ok = 0;
  int min_j = 1 << 30;
  for (const auto& [a, b] : pairs) {
    const auto r = verify_stabilization(os, a, b, 6, 0, 1e-9);
    if (r.passed) ++ok;
    min_j = std::min(min_j, r.max_j);
  }
  return {pairs.size() == 50 && ok == 50 && min_j >= 5,
          std::to_string(ok) + "/" + std::to_string(pairs.size()) + " pairs agree, coefficients j <= " +
              std::to_string(min_j)};
}

Outcome hay() {
  const OmegaSet os = parry_bsc();
  const int len = hay_length(os);
  std::uint64_t checked = 0, violations = 0;
  for_each_word_series(os, len, [&](const Word& w, const EpsSeries&, Order o) {
    if (o != Order(0)) return;
    ++checked;
    violations += verify_hay(os, w).violations.size();
  });
  return {checked > 0 && violations == 0, "N = " + std::to_string(len) + ", " + std::to_string(checked) +
                                              " Z-allowed words, " + std::to_string(violations) + " violations"};
}

Outcome concavity() {
  double worst = -1e300;
  bool all = true;
  for (double eps : {0.0, 0.005, 0.01}) {
    const auto r = certify_concavity(bsc(), ts::golden(), 8, eps, 0.02, 9);
    all = all && r.passed && r.points.size() == 9;
    worst = std::max(worst, r.max_eigenvalue);
  }
  // (1 + p) I_n at eps = 0 is the binary entropy of the 0 -> 1 transition probability.
  double d2_err = 0.0;
  for (double p : {0.2, 0.382, 0.5, 0.6, 0.8}) {
    const ChartObjective g = [](const Vector& t) {
      return (1.0 + t[0]) * mutual_information_n(ts::golden_chain(t[0]), bsc(), 8, 0.0);
    };
    const double fd = fd_hessian(g, Vector{p}, unbounded_domain())(0, 0);
    d2_err = std::max(d2_err, std::abs(fd - (-1.0 / p - 1.0 / (1.0 - p))));
  }
  return {all && worst < 0.0 && d2_err <= 1e-4,
          "max eigenvalue " + num(worst) + ", second derivative err " + num(d2_err)};
}

Outcome noiseless_optimum() {
  const auto r = maximize_mi(bsc(), ts::golden(), 8, 0.0);
  const double log_phi = std::log(perron(*ts::golden()).root);
  const double p_star =
      ts::golden_section_max([](double p) { return ts::binary_entropy(p) / (1.0 + p); }, 1e-6, 1.0 - 1e-6);
  const FreeChart chart = free_chart(max_entropy_chain(ts::golden()));
  const double t_star = chart.coords(ts::golden_chain(p_star).values())[0];
  const double value_err = std::abs(r.value - log_phi), arg_err = std::abs(r.t[0] - t_star);
  return {value_err <= 1e-8 && arg_err <= 1e-6,
          "value err " + num(value_err) + " nats, argmax err " + num(arg_err) + ", status " + to_string(r.status)};
}

Outcome maximizer_convergence() {
  const auto s = capacity_sequence(bsc(), ts::golden(), 0.01, {4, 6, 8, 10}, kDefaultDelta, 1e-11);
  bool decreasing = s.gaps.size() == 3;
  for (std::size_t i = 1; i < s.gaps.size(); ++i) decreasing = decreasing && s.gaps[i] < s.gaps[i - 1];
  std::string g;
  for (double x : s.gaps) g += (g.empty() ? "" : ", ") + num(x);
  return {decreasing && s.fitted_rho < 1.0, "argmax gaps " + g + ", fitted ratio " + num(s.fitted_rho)};
}

Outcome monte_carlo() {
  const OmegaSet os = parry_bsc();
  const auto exact = entropy_decomposition(os, 8, 0.01);
  const auto mc = entropy_monte_carlo(os, 8, 0.01, 100000, 1);
  const double z = std::abs(mc.H - exact.H) / mc.stderr_H;

  namespace fs = std::filesystem;
  namespace h = hmrate::harness;
  auto run_once = [](const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("hmrate_acceptance_mc_" + tag);
    fs::remove_all(dir);
    h::Overrides ov;
    ov.n_list = std::vector<int>{8};
    ov.eps_list = std::vector<double>{0.01};
    ov.mode = "monte_carlo";
    ov.samples = 100000;
    ov.seed = 1;
    ov.output_dir = dir.string();
    std::ostringstream out, err;
    if (h::run(std::string(HMRATE_CONFIG_DIR) + "/golden_bsc.json", "entropy", ov, out, err) != 0) return std::string();
    std::ifstream in(dir / "entropy.csv", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = run_once("a"), b = run_once("b");
  const bool identical = !a.empty() && a == b;
  return {z <= 3.0 && identical,
          "|MC - exact| = " + num(z) + " stderr, repeated CSV " + (identical ? "byte-identical" : "differs")};
}

Outcome diagnostics() {
  std::vector<int> ns;
  for (int n = 4; n <= 12; ++n) ns.push_back(n);
  const auto r = convergence_diagnostics(max_entropy_chain(ts::golden()), bsc(), 0.01, ns);
  return {r.rho_H < 1.0 && r.rho_grad < 1.0, "rho_H " + num(r.rho_H) + ", rho_grad " + num(r.rho_grad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"golden-mean BSC stationary law and word 110", golden_example},
      {"H_n = G_n + F_n log eps", decomposition_identity},
      {"tropical order equals series order", order_oracle},
      {"atypical mass decays", atypical_decay},
      {"conditional coefficients stabilize", stabilization},
      {"row-wise order dominance", hay},
      {"concavity certificate", concavity},
      {"noiseless optimum", noiseless_optimum},
      {"maximizer convergence", maximizer_convergence},
      {"Monte Carlo consistency", monte_carlo},
      {"convergence diagnostics", diagnostics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
