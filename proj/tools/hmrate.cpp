#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hmrate/harness.hpp"

int main(int argc, char** argv) {
  namespace h = hmrate::harness;
  CLI::App app{"Entropy rate and capacity estimates for hidden Markov outputs of constrained inputs"};
  app.set_version_flag("--version", std::string("hmrate ") + h::kToolVersion);
  app.require_subcommand(1, 1);

  h::Overrides ov;
  std::string config;
  std::vector<int> n_list;
  std::vector<double> eps_list;
  double delta = 0, tol = 0, alpha = 0;
  int max_iter = 0, starts = 0;
  std::uint64_t samples = 0, seed = 0;
  std::string mode;

  struct Flags {
    CLI::Option *n, *eps, *delta, *tol, *alpha, *max_iter, *starts, *samples, *seed, *mode;
  };
  std::vector<std::pair<CLI::App*, Flags>> subs;
  const std::vector<std::pair<std::string, std::string>> descriptions{
      {"constraint-info", "adjacency, mixing and Parry chain of the constraint"},
      {"entropy", "H_n, F_n, G_n per (n, eps)"},
      {"decompose", "exact decomposition plus per-word orders"},
      {"orders", "tropical and series orders of all words of a fixed length"},
      {"typical", "atypical mass per n"},
      {"optimize", "maximize I_n over M_delta"},
      {"capacity", "warm-started maximization over the n list"},
      {"verify", "dominance and stabilization checks"},
      {"sweep", "H_n and I_n over the n and eps grids"}};
  for (const auto& [name, desc] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    Flags f{};
    f.n = sub->add_option("--n", n_list, "context lengths")->delimiter(',');
    f.eps = sub->add_option("--eps", eps_list, "noise levels")->delimiter(',');
    f.delta = sub->add_option("--delta", delta, "M_delta margin");
    f.tol = sub->add_option("--tol", tol, "projected gradient tolerance");
    f.alpha = sub->add_option("--alpha", alpha, "typicality slope");
    f.max_iter = sub->add_option("--max-iter", max_iter, "ascent iteration cap");
    f.starts = sub->add_option("--starts", starts, "number of ascent starts");
    f.samples = sub->add_option("--samples", samples, "Monte Carlo sample count");
    f.seed = sub->add_option("--seed", seed, "RNG seed");
    f.mode = sub->add_option("--mode", mode, "exact or monte_carlo")->check(CLI::IsMember({"exact", "monte_carlo"}));
    sub->add_flag("--bits", ov.bits, "report entropies in bits");
    sub->add_option("--output-dir", ov.output_dir, "directory for CSV/JSON outputs");
    sub->add_flag("--require-certified", ov.require_certified, "exit 4 unless results are certified");
    subs.emplace_back(sub, f);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : h::kExitValidation;
  }

  for (const auto& [sub, f] : subs) {
    if (!sub->parsed()) continue;
    if (f.n->count()) ov.n_list = n_list;
    if (f.eps->count()) ov.eps_list = eps_list;
    if (f.delta->count()) ov.delta = delta;
    if (f.tol->count()) ov.tol = tol;
    if (f.alpha->count()) ov.alpha = alpha;
    if (f.max_iter->count()) ov.max_iter = max_iter;
    if (f.starts->count()) ov.starts = starts;
    if (f.samples->count()) ov.samples = samples;
    if (f.seed->count()) ov.seed = seed;
    if (f.mode->count()) ov.mode = mode;
    return h::run(config, sub->get_name(), ov, std::cout, std::cerr);
  }
  return h::kExitValidation;
}
