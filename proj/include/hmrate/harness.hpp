#pragma once

// Experiment configuration and subcommand orchestration for the hmrate CLI.
// Configs are JSON; tabular results are CSV, detail is JSON. Requires
// nlohmann/json (vendored as json.hpp).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hmrate/hmrate.hpp"
#include "json.hpp"

namespace hmrate::harness {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"constraint-info", "entropy", "decompose", "orders", "typical",
                                              "optimize",        "capacity", "verify",   "sweep"};
  return names;
}

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitValidation = 2, kExitBudget = 3, kExitCertification = 4 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BudgetExceeded: return kExitBudget;
    case ErrorCode::ZeroHistory:
    case ErrorCode::ZeroMass:
    case ErrorCode::DivByZeroSeries:
    case ErrorCode::OrderUnderflow:
    case ErrorCode::AssumptionViolated:
    case ErrorCode::PreconditionFailed:
    case ErrorCode::NotZAllowed:
    case ErrorCode::WordTooShort:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::StepUnderflow:
    case ErrorCode::NoProgress: return kExitOther;
    default: return kExitValidation;
  }
}

struct StabilizationSettings {
  int n = 6;
  int k = 0;
  int pairs = 50;
};

struct RunConfig {
  std::vector<int> n_list{8};
  std::vector<double> eps_list{0.01};
  double alpha = 0.3;
  double delta = kDefaultDelta;
  double tol = kDefaultOptTol;
  int max_iter = kDefaultMaxIter;
  int starts = 1;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  std::string mode = "exact";
  int degree_budget = kDefaultDegreeBudget;
  std::uint64_t word_budget = kDefaultWordBudget;
  int grid = 9;
  int orders_length = 3;
  StabilizationSettings stabilization;
  bool bits = false;
};

/// Command-line values that replace entries of the "run" section.
struct Overrides {
  std::optional<std::vector<int>> n_list;
  std::optional<std::vector<double>> eps_list;
  std::optional<double> delta, tol, alpha;
  std::optional<int> max_iter, starts;
  std::optional<std::uint64_t> samples, seed;
  std::optional<std::string> mode;
  bool bits = false;
  bool require_certified = false;
  std::string output_dir = ".";
};

struct ExperimentConfig {
  json doc;
  std::string hash;
  std::shared_ptr<const Constraint> constraint;
  JointProb input;
  ChannelSpec channel;
  RunConfig run;
};

// ---------------------------------------------------------------------------
// Schema helpers.

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  fail(ErrorCode::Config, path + ": " + msg);
}

inline void check_object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) config_error(path + "." + key, "unknown key");
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) config_error(path + "." + key, "missing required key");
  return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_error(path, "expected a number");
  return j.get<double>();
}

inline long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_error(path, "expected an integer");
  return j.get<long long>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) config_error(path, "expected a string");
  return j.get<std::string>();
}

inline std::vector<std::string> as_strings(const json& j, const std::string& path) {
  if (!j.is_array()) config_error(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) config_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// Re-raises a library error with the config key that triggered it.
template <typename F>
auto at_key(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

inline std::shared_ptr<const Constraint> parse_constraint(const json& j) {
  const std::string path = "constraint";
  check_object(j, path, {"alphabet", "forbidden", "rll"});
  if (j.contains("rll")) {
    if (j.contains("alphabet") || j.contains("forbidden")) config_error(path, "use either rll or alphabet/forbidden");
    const json& r = j.at("rll");
    check_object(r, path + ".rll", {"d", "k"});
    const int d = static_cast<int>(as_integer(require(r, "d", path + ".rll"), path + ".rll.d"));
    std::optional<int> k;
    if (r.contains("k") && !r.at("k").is_null()) k = static_cast<int>(as_integer(r.at("k"), path + ".rll.k"));
    return at_key(path + ".rll", [&] { return std::make_shared<const Constraint>(rll_constraint(d, k)); });
  }
  const auto alphabet = as_strings(require(j, "alphabet", path), path + ".alphabet");
  const auto forbidden = j.contains("forbidden") ? as_strings(j.at("forbidden"), path + ".forbidden") : std::vector<std::string>{};
  auto c = at_key(path, [&] { return build_constraint(alphabet, forbidden); });
  if (!c.mixing()) fail(ErrorCode::NotMixing, path + ": constraint is not mixing");
  return std::make_shared<const Constraint>(std::move(c));
}

inline JointProb parse_input(const json& j, std::shared_ptr<const Constraint> c) {
  const std::string path = "input";
  if (!j.is_object()) config_error(path, "expected an object");
  const std::string type = as_string(require(j, "type", path), path + ".type");
  if (type == "parry") {
    check_object(j, path, {"type"});
    return max_entropy_chain(c);
  }
  if (type == "transition") {
    check_object(j, path, {"type", "rows"});
    const json& rows = require(j, "rows", path);
    if (!rows.is_array() || rows.size() != c->size()) config_error(path + ".rows", "expected one row per symbol");
    Matrix pi(c->size(), c->size());
    for (std::size_t x = 0; x < c->size(); ++x) {
      const auto row = as_numbers(rows[x], path + ".rows[" + std::to_string(x) + "]");
      if (row.size() != c->size()) config_error(path + ".rows[" + std::to_string(x) + "]", "row has the wrong length");
      for (std::size_t y = 0; y < c->size(); ++y) pi(x, y) = row[y];
    }
    return at_key(path + ".rows", [&] { return from_transition(c, pi); });
  }
  if (type == "joint") {
    check_object(j, path, {"type", "values"});
    const auto values = as_numbers(require(j, "values", path), path + ".values");
    return at_key(path + ".values", [&] { return JointProb(c, values); });
  }
  config_error(path + ".type", "expected parry, transition or joint");
}

inline ChannelSpec parse_channel(const json& j, const Constraint& c) {
  const std::string path = "channel";
  if (!j.is_object()) config_error(path, "expected an object");
  const std::string type = as_string(require(j, "type", path), path + ".type");
  const double eps_max = j.contains("eps_max") ? as_number(j.at("eps_max"), path + ".eps_max") : kDefaultEpsMax;
  if (!(eps_max > 0.0 && eps_max <= 1.0)) config_error(path + ".eps_max", "must lie in (0, 1]");
  if (type == "bsc") {
    check_object(j, path, {"type", "eps_max"});
    return at_key(path, [&] { return bsc(eps_max); });
  }
  if (type == "bec") {
    check_object(j, path, {"type", "eps_max"});
    return at_key(path, [&] { return bec(eps_max); });
  }
  if (type == "ge") {
    check_object(j, path, {"type", "q_good", "k", "eps_max"});
    const double q_good = as_number(require(j, "q_good", path), path + ".q_good");
    const double k = as_number(require(j, "k", path), path + ".k");
    return at_key(path, [&] { return gilbert_elliott(q_good, k, eps_max); });
  }
  if (type == "custom") {
    check_object(j, path, {"type", "inputs", "states", "state_probs", "outputs", "table", "map", "eps_max"});
    const auto inputs = j.contains("inputs") ? as_strings(j.at("inputs"), path + ".inputs") : c.alphabet();
    const auto states = j.contains("states") ? as_strings(j.at("states"), path + ".states") : std::vector<std::string>{"s"};
    const auto q = j.contains("state_probs") ? as_numbers(j.at("state_probs"), path + ".state_probs") : std::vector<double>{1.0};
    const auto outputs = as_strings(require(j, "outputs", path), path + ".outputs");
    const json& tj = require(j, "table", path);
    const std::string tpath = path + ".table";
    if (!tj.is_array() || tj.size() != inputs.size()) config_error(tpath, "expected one entry per input");
    KernelTable table(inputs.size(), std::vector<std::vector<Polynomial>>(states.size()));
    for (std::size_t x = 0; x < inputs.size(); ++x) {
      const std::string xp = tpath + "[" + std::to_string(x) + "]";
      if (!tj[x].is_array() || tj[x].size() != states.size()) config_error(xp, "expected one entry per state");
      for (std::size_t s = 0; s < states.size(); ++s) {
        const std::string sp = xp + "[" + std::to_string(s) + "]";
        if (!tj[x][s].is_array() || tj[x][s].size() != outputs.size()) config_error(sp, "expected one polynomial per output");
        for (std::size_t z = 0; z < outputs.size(); ++z)
          table[x][s].push_back(Polynomial(as_numbers(tj[x][s][z], sp + "[" + std::to_string(z) + "]")));
      }
    }
    const auto map_syms = as_strings(require(j, "map", path), path + ".map");
    std::vector<int> map;
    for (std::size_t i = 0; i < map_syms.size(); ++i) {
      int idx = -1;
      for (std::size_t z = 0; z < outputs.size(); ++z)
        if (outputs[z] == map_syms[i]) idx = static_cast<int>(z);
      if (idx < 0) config_error(path + ".map[" + std::to_string(i) + "]", "unknown output symbol '" + map_syms[i] + "'");
      map.push_back(idx);
    }
    return at_key(path, [&] { return custom(inputs, states, q, outputs, table, map, eps_max); });
  }
  config_error(path + ".type", "expected bsc, bec, ge or custom");
}

inline RunConfig parse_run(const json& j) {
  const std::string path = "run";
  RunConfig r;
  if (j.is_null()) return r;
  check_object(j, path,
               {"n", "eps", "alpha", "delta", "tol", "max_iter", "starts", "samples", "seed", "mode", "degree_budget",
                "word_budget", "grid", "orders_length", "stabilization", "bits"});
  auto integer_in = [&](const std::string& key, long long lo, long long hi) {
    const long long v = as_integer(j.at(key), path + "." + key);
    if (v < lo || v > hi)
      config_error(path + "." + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  };
  if (j.contains("n")) {
    const json& ns = j.at("n");
    if (!ns.is_array() || ns.empty()) config_error(path + ".n", "expected a non-empty array of integers");
    r.n_list.clear();
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const long long v = as_integer(ns[i], path + ".n[" + std::to_string(i) + "]");
      if (v < 0 || v > 40) config_error(path + ".n[" + std::to_string(i) + "]", "must lie in [0, 40]");
      r.n_list.push_back(static_cast<int>(v));
    }
  }
  if (j.contains("eps")) {
    r.eps_list = as_numbers(j.at("eps"), path + ".eps");
    if (r.eps_list.empty()) config_error(path + ".eps", "expected a non-empty array");
    for (std::size_t i = 0; i < r.eps_list.size(); ++i)
      if (!(r.eps_list[i] >= 0.0 && r.eps_list[i] <= 1.0))
        config_error(path + ".eps[" + std::to_string(i) + "]", "must lie in [0, 1]");
  }
  if (j.contains("alpha")) {
    r.alpha = as_number(j.at("alpha"), path + ".alpha");
    if (!(r.alpha >= 0.0)) config_error(path + ".alpha", "must be non-negative");
  }
  if (j.contains("delta")) {
    r.delta = as_number(j.at("delta"), path + ".delta");
    if (!(r.delta >= 0.0 && r.delta < 1.0)) config_error(path + ".delta", "must lie in [0, 1)");
  }
  if (j.contains("tol")) {
    r.tol = as_number(j.at("tol"), path + ".tol");
    if (!(r.tol > 0.0)) config_error(path + ".tol", "must be positive");
  }
  if (j.contains("max_iter")) r.max_iter = static_cast<int>(integer_in("max_iter", 0, 1000000));
  if (j.contains("starts")) r.starts = static_cast<int>(integer_in("starts", 1, 1000));
  if (j.contains("samples")) r.samples = static_cast<std::uint64_t>(integer_in("samples", 1, 1000000000000LL));
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) config_error(path + ".seed", "expected a non-negative integer");
    r.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("mode")) {
    r.mode = as_string(j.at("mode"), path + ".mode");
    if (r.mode != "exact" && r.mode != "monte_carlo") config_error(path + ".mode", "expected exact or monte_carlo");
  }
  if (j.contains("degree_budget")) r.degree_budget = static_cast<int>(integer_in("degree_budget", 0, 64));
  if (j.contains("word_budget")) r.word_budget = static_cast<std::uint64_t>(integer_in("word_budget", 1, 1LL << 40));
  if (j.contains("grid")) r.grid = static_cast<int>(integer_in("grid", 2, 1000));
  if (j.contains("orders_length")) r.orders_length = static_cast<int>(integer_in("orders_length", 1, 40));
  if (j.contains("stabilization")) {
    const json& s = j.at("stabilization");
    const std::string sp = path + ".stabilization";
    check_object(s, sp, {"n", "k", "pairs"});
    auto sub = [&](const std::string& key, long long lo, long long hi) {
      const long long v = as_integer(s.at(key), sp + "." + key);
      if (v < lo || v > hi) config_error(sp + "." + key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return static_cast<int>(v);
    };
    if (s.contains("n")) r.stabilization.n = sub("n", 0, 30);
    if (s.contains("k")) r.stabilization.k = sub("k", 0, 30);
    if (s.contains("pairs")) r.stabilization.pairs = sub("pairs", 1, 100000);
  }
  if (j.contains("bits")) {
    if (!j.at("bits").is_boolean()) config_error(path + ".bits", "expected a boolean");
    r.bits = j.at("bits").get<bool>();
  }
  return r;
}

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Parses and validates a config document after applying overrides.
inline ExperimentConfig load_config_text(const std::string& text, const Overrides& ov = {}) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, "config: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  detail::check_object(doc, "config", {"constraint", "input", "channel", "run"});
  if (!doc.contains("run")) doc["run"] = json::object();
  json& run = doc["run"];
  if (!run.is_object()) detail::config_error("run", "expected an object");
  if (ov.n_list) run["n"] = *ov.n_list;
  if (ov.eps_list) run["eps"] = *ov.eps_list;
  if (ov.delta) run["delta"] = *ov.delta;
  if (ov.tol) run["tol"] = *ov.tol;
  if (ov.alpha) run["alpha"] = *ov.alpha;
  if (ov.max_iter) run["max_iter"] = *ov.max_iter;
  if (ov.starts) run["starts"] = *ov.starts;
  if (ov.samples) run["samples"] = *ov.samples;
  if (ov.seed) run["seed"] = *ov.seed;
  if (ov.mode) run["mode"] = *ov.mode;
  if (ov.bits) run["bits"] = true;

  ExperimentConfig cfg;
  cfg.constraint = detail::parse_constraint(detail::require(doc, "constraint", "config"));
  cfg.input = detail::parse_input(detail::require(doc, "input", "config"), cfg.constraint);
  cfg.channel = detail::parse_channel(detail::require(doc, "channel", "config"), *cfg.constraint);
  cfg.run = detail::parse_run(run);
  cfg.doc = doc;
  cfg.hash = detail::fnv1a_hex(doc.dump());
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& ov = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Config, "config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), ov);
}

// ---------------------------------------------------------------------------
// Output.

/// 17 significant digits; "inf", "-inf", "nan" for non-finite values.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(Order o) { return o.is_infinite() ? "inf" : std::to_string(o.value()); }

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const ExperimentConfig& cfg, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail(ErrorCode::Config, "output: cannot write '" + path.string() + "'");
    out_ << "# hmrate " << kToolVersion << " config=" << cfg.hash << " units=" << (cfg.run.bits ? "bits" : "nats")
         << "\n";
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const ExperimentConfig& cfg, json body) {
  body["_meta"] = {{"tool", "hmrate"},
                   {"version", kToolVersion},
                   {"config_hash", cfg.hash},
                   {"units", cfg.run.bits ? "bits" : "nats"},
                   {"engineering_defaults",
                    {{"delta", cfg.run.delta}, {"eps_max", cfg.channel.eps_max()}, {"degree_budget", cfg.run.degree_budget}}},
                   {"reduction", "word-prefix blocks (exact) or 64 sample blocks (Monte Carlo), pairwise tree sum"}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Config, "output: cannot write '" + path.string() + "'");
  out << body.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands.

namespace detail {

struct Context {
  const ExperimentConfig& cfg;
  const Overrides& ov;
  std::filesystem::path dir;
  std::ostream& out;
  double scale;  // nats -> reported units
};

inline OmegaSet omegas(const Context& cx) { return build_omegas(cx.cfg.input, cx.cfg.channel, cx.cfg.run.degree_budget); }

inline std::vector<std::string> decomposition_row(const Context& cx, const EntropyDecomposition& d) {
  return {std::to_string(d.n), fmt(d.eps),          fmt(d.H * cx.scale),        fmt(d.F * cx.scale),
          fmt(d.G * cx.scale), fmt(d.residual * cx.scale), to_string(d.mode), std::to_string(d.samples),
          fmt(d.stderr_H * cx.scale)};
}

inline const std::vector<std::string>& decomposition_columns() {
  static const std::vector<std::string> c{"n", "eps", "H_n", "F_n", "G_n", "residual", "mode", "samples", "stderr"};
  return c;
}

inline EntropyDecomposition estimate(const Context& cx, const OmegaSet& os, int n, double eps, bool exact_only) {
  if (exact_only || cx.cfg.run.mode == "exact") return entropy_decomposition(os, n, eps, cx.cfg.run.word_budget);
  return entropy_monte_carlo(os, n, eps, cx.cfg.run.samples, cx.cfg.run.seed);
}

inline int cmd_constraint_info(const Context& cx) {
  const Constraint& c = *cx.cfg.constraint;
  const PerronData pd = perron(c);
  const JointProb parry = max_entropy_chain(cx.cfg.constraint);
  json pairs = json::array(), forbidden = json::array();
  for (const Word& w : c.forbidden()) forbidden.push_back(c.format_word(w));
  for (const auto& [x, y] : c.allowed_pairs()) pairs.push_back(c.alphabet()[x] + c.alphabet()[y]);
  json body{{"alphabet", c.alphabet()},
            {"forbidden", forbidden},
            {"allowed_pairs", pairs},
            {"order_bound", c.order_bound()},
            {"mixing", c.mixing()},
            {"primitivity_exponent", c.primitivity_exponent() ? json(*c.primitivity_exponent()) : json(nullptr)},
            {"perron_root", pd.root},
            {"capacity", std::log(pd.root) * cx.scale},
            {"chart_dimension", free_chart(parry).dimension()},
            {"parry_joint", parry.values()}};
  write_json(cx.dir / "constraint_info.json", cx.cfg, body);
  cx.out << "constraint-info: symbols=" << c.size() << " pairs=" << c.allowed_pairs().size()
         << " mixing=" << (c.mixing() ? "true" : "false") << " capacity=" << fmt(std::log(pd.root) * cx.scale) << "\n";
  return kExitOk;
}

inline int cmd_entropy(const Context& cx, bool exact_only, const std::string& name) {
  const OmegaSet os = omegas(cx);
  CsvWriter csv(cx.dir / (name + ".csv"), cx.cfg, decomposition_columns());
  EntropyDecomposition last;
  for (double eps : cx.cfg.run.eps_list)
    for (int n : cx.cfg.run.n_list) {
      last = estimate(cx, os, n, eps, exact_only);
      csv.row(decomposition_row(cx, last));
    }
  cx.out << name << ": n=" << last.n << " eps=" << fmt(last.eps) << " H_n=" << fmt(last.H * cx.scale)
         << " F_n=" << fmt(last.F * cx.scale) << " G_n=" << fmt(last.G * cx.scale) << "\n";
  return kExitOk;
}

inline void write_orders(const Context& cx, const OmegaSet& os) {
  const int len = cx.cfg.run.orders_length;
  const double eps = cx.cfg.run.eps_list.front();
  CsvWriter csv(cx.dir / "orders.csv", cx.cfg,
                {"word", "tropical_order", "series_order", "probability_at_eps", "leading_coeff"});
  for_each_word_series(
      os, len,
      [&](const Word& w, const EpsSeries& s, Order o) {
        csv.row({os.format_word(w), fmt(o), fmt(s.order()), fmt(word_probability(os, w, eps)),
                 fmt(s.is_zero() ? 0.0 : s.leading())});
      },
      cx.cfg.run.word_budget);
}

inline int cmd_decompose(const Context& cx) {
  const OmegaSet os = omegas(cx);
  write_orders(cx, os);
  return cmd_entropy(cx, true, "decompose");
}

inline int cmd_orders(const Context& cx) {
  const OmegaSet os = omegas(cx);
  write_orders(cx, os);
  std::uint64_t count = 1;
  for (int i = 0; i < cx.cfg.run.orders_length; ++i) count *= os.num_outputs();
  cx.out << "orders: " << count << " words of length " << cx.cfg.run.orders_length << "\n";
  return kExitOk;
}

inline int cmd_typical(const Context& cx) {
  const OmegaSet os = omegas(cx);
  const double eps = cx.cfg.run.eps_list.front();
  CsvWriter csv(cx.dir / "typical.csv", cx.cfg,
                {"n", "alpha", "eps", "typical_count", "atypical_count", "atypical_mass", "max_order_seen"});
  std::vector<double> xs, masses;
  for (int n : cx.cfg.run.n_list) {
    const auto r = classify_typical(os, n, cx.cfg.run.alpha, eps, cx.cfg.run.word_budget);
    csv.row({std::to_string(n), fmt(r.alpha), fmt(r.eps), std::to_string(r.typical_count),
             std::to_string(r.atypical_count), fmt(r.atypical_mass), std::to_string(r.max_order_seen)});
    xs.push_back(n);
    masses.push_back(r.atypical_mass);
  }
  cx.out << "typical: eps=" << fmt(eps) << " alpha=" << fmt(cx.cfg.run.alpha)
         << " fitted_ratio=" << fmt(geometric_ratio(xs, masses)) << "\n";
  return kExitOk;
}

inline json result_json(const Context& cx, const OptimizationResult& r) {
  return json{{"n", r.n},
              {"eps", r.eps},
              {"delta", r.delta},
              {"argmax_joint", r.argmax.values()},
              {"value_nats", r.value},
              {"value_bits", r.value / std::log(2.0)},
              {"value", r.value * cx.scale},
              {"grad_norm", r.grad_norm},
              {"raw_grad_norm", r.raw_grad_norm},
              {"hessian_eigs", r.hessian_eigs},
              {"iterations", r.iterations},
              {"status", to_string(r.status)},
              {"touches_boundary", r.touches_boundary},
              {"certified", r.certified}};
}

inline int cmd_optimize(const Context& cx) {
  const RunConfig& run = cx.cfg.run;
  const int n = run.n_list.front();
  const double eps = run.eps_list.front();
  MaximizeOptions opt;
  opt.delta = run.delta;
  opt.tol = run.tol;
  opt.max_iter = run.max_iter;
  opt.budget = run.word_budget;
  const auto multi = maximize_mi_multistart(cx.cfg.channel, cx.cfg.constraint, n, eps, run.starts, run.seed, opt);
  const OptimizationResult& best = multi.runs[multi.best];
  json body = result_json(cx, best);
  body["starts"] = run.starts;
  body["start_spread"] = multi.spread;
  bool certified = best.certified;
  if (cx.ov.require_certified) {
    const auto cert = certify_concavity(cx.cfg.channel, cx.cfg.constraint, n, eps, run.delta, run.grid, run.word_budget);
    body["concavity"] = {{"grid", run.grid},
                         {"points", cert.points.size()},
                         {"max_eigenvalue", cert.max_eigenvalue},
                         {"passed", cert.passed}};
    certified = certified && cert.passed && best.status == OptStatus::Converged;
  }
  body["certified"] = certified;
  write_json(cx.dir / "optimize.json", cx.cfg, body);
  cx.out << "optimize: n=" << n << " eps=" << fmt(eps) << " value=" << fmt(best.value * cx.scale)
         << " grad_norm=" << fmt(best.grad_norm) << " status=" << to_string(best.status)
         << " certified=" << (certified ? "true" : "false") << "\n";
  if (cx.ov.require_certified && !certified) return kExitCertification;
  return kExitOk;
}

inline int cmd_capacity(const Context& cx) {
  const RunConfig& run = cx.cfg.run;
  const double eps = run.eps_list.front();
  const auto study = capacity_sequence(cx.cfg.channel, cx.cfg.constraint, eps, run.n_list, run.delta, run.tol,
                                       run.max_iter, run.word_budget);
  CsvWriter csv(cx.dir / "capacity.csv", cx.cfg, {"n", "value_nats", "value_bits", "gap_to_prev", "grad_norm", "certified"});
  bool all_certified = true;
  for (std::size_t i = 0; i < study.entries.size(); ++i) {
    const auto& e = study.entries[i];
    all_certified = all_certified && e.certified && e.status == OptStatus::Converged;
    csv.row({std::to_string(e.n), fmt(e.value), fmt(e.value / std::log(2.0)),
             i == 0 ? std::string("nan") : fmt(study.gaps[i - 1]), fmt(e.grad_norm), e.certified ? "true" : "false"});
  }
  cx.out << "capacity: eps=" << fmt(eps) << " n_max=" << study.entries.back().n
         << " value=" << fmt(study.entries.back().value * cx.scale) << " fitted_rho=" << fmt(study.fitted_rho) << "\n";
  if (cx.ov.require_certified && !all_certified) return kExitCertification;
  return kExitOk;
}

inline int cmd_verify(const Context& cx) {
  const OmegaSet os = omegas(cx);
  json hay;
  bool hay_ok = true;
  if (os.channel().has_zero_entries() || !os.input().in_m_delta(0.0)) {
    hay = {{"applicable", false}, {"reason", "channel has zero kernel entries or input is not in M_0"}};
  } else {
    const int len = std::max(1, hay_length(os));
    std::uint64_t checked = 0, violations = 0;
    std::vector<std::string> failing;
    for_each_word_series(
        os, len,
        [&](const Word& w, const EpsSeries&, Order o) {
          if (o != Order(0)) return;
          ++checked;
          const auto r = verify_hay(os, w);
          if (!r.passed()) {
            violations += r.violations.size();
            if (failing.size() < 20) failing.push_back(os.format_word(w));
          }
        },
        cx.cfg.run.word_budget);
    hay_ok = violations == 0;
    hay = {{"applicable", true}, {"length", len}, {"words_checked", checked}, {"violations", violations},
           {"failing_words", failing}, {"passed", hay_ok}};
  }
  const auto& st = cx.cfg.run.stabilization;
  const auto pairs = stabilization_pairs(os, st.n, st.k, static_cast<std::size_t>(st.pairs));
  std::size_t passed = 0;
  double worst = 0.0;
  json details = json::array();
  for (const auto& [a, b] : pairs) {
    const auto r = verify_stabilization(os, a, b, st.n, st.k);
    double scale = 0.0, d = 0.0;
    for (std::size_t j = 0; j < r.deltas.size(); ++j) {
      scale = std::max({scale, std::abs(r.coeffs_a[j]), std::abs(r.coeffs_b[j])});
      d = std::max(d, r.deltas[j]);
    }
    worst = std::max(worst, scale > 0.0 ? d / scale : d);
    if (r.passed) ++passed;
    details.push_back({{"a", os.format_word(a)}, {"b", os.format_word(b)}, {"max_j", r.max_j}, {"passed", r.passed}});
  }
  const bool stab_ok = !pairs.empty() && passed == pairs.size();
  json body{{"hay", hay},
            {"stabilization",
             {{"n", st.n}, {"k", st.k}, {"requested", st.pairs}, {"found", pairs.size()}, {"passed_pairs", passed},
              {"max_relative_delta", worst}, {"passed", stab_ok}, {"pairs", details}}},
            {"passed", hay_ok && stab_ok}};
  write_json(cx.dir / "verify.json", cx.cfg, body);
  if (hay.value("applicable", false))
    cx.out << "verify hay: " << (hay_ok ? "PASS" : "FAIL") << " (" << hay["words_checked"].get<std::uint64_t>()
           << " Z-allowed words of length " << hay["length"].get<int>() << ")\n";
  else
    cx.out << "verify hay: SKIP (zero kernel entries)\n";
  cx.out << "verify stabilization: " << (stab_ok ? "PASS" : "FAIL") << " (" << passed << "/" << pairs.size()
         << " pairs)\n";
  return hay_ok && stab_ok ? kExitOk : kExitCertification;
}

inline int cmd_sweep(const Context& cx) {
  const OmegaSet os = omegas(cx);
  auto columns = decomposition_columns();
  columns.push_back("I_n");
  CsvWriter csv(cx.dir / "sweep.csv", cx.cfg, columns);
  std::size_t rows = 0;
  for (double eps : cx.cfg.run.eps_list) {
    const double hzx = conditional_entropy_given_input(os.input(), os.channel(), eps);
    for (int n : cx.cfg.run.n_list) {
      const auto d = estimate(cx, os, n, eps, false);
      auto row = decomposition_row(cx, d);
      row.push_back(fmt((d.H - hzx) * cx.scale));
      csv.row(row);
      ++rows;
    }
  }
  cx.out << "sweep: " << rows << " rows\n";
  return kExitOk;
}

}  // namespace detail

/// Runs one subcommand; returns the process exit code. Errors are reported
/// on `err` with the failing config key or check.
inline int run(const std::string& config_path, const std::string& subcommand, const Overrides& ov,
               std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
      fail(ErrorCode::Config, "unknown subcommand '" + subcommand + "'");
    const ExperimentConfig cfg = load_config(config_path, ov);
    std::filesystem::path dir(ov.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Config, "output-dir: cannot create '" + dir.string() + "'");
    const detail::Context cx{cfg, ov, dir, out, cfg.run.bits ? 1.0 / std::log(2.0) : 1.0};
    if (subcommand == "constraint-info") return detail::cmd_constraint_info(cx);
    if (subcommand == "entropy") return detail::cmd_entropy(cx, false, "entropy");
    if (subcommand == "decompose") return detail::cmd_decompose(cx);
    if (subcommand == "orders") return detail::cmd_orders(cx);
    if (subcommand == "typical") return detail::cmd_typical(cx);
    if (subcommand == "optimize") return detail::cmd_optimize(cx);
    if (subcommand == "capacity") return detail::cmd_capacity(cx);
    if (subcommand == "verify") return detail::cmd_verify(cx);
    return detail::cmd_sweep(cx);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "error: Config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace hmrate::harness
