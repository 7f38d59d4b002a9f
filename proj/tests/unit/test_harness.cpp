#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmrate/harness.hpp"
#include "support.hpp"

using namespace hmrate;
namespace fs = std::filesystem;
namespace h = hmrate::harness;

namespace {

const std::string kGolden = std::string(HMRATE_CONFIG_DIR) + "/golden_bsc.json";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hmrate_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

int run_cmd(const std::string& config, const std::string& sub, h::Overrides ov, const fs::path& dir,
            std::string* err = nullptr) {
  ov.output_dir = dir.string();
  std::ostringstream out, e;
  const int code = h::run(config, sub, ov, out, e);
  if (err) *err = e.str();
  return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const char* kMinimal = R"({"constraint": {"alphabet": ["0", "1"], "forbidden": ["11"]},
  "input": {"type": "parry"}, "channel": {"type": "bsc"}})";

}  // namespace

TEST(Config, DefaultsApply) {
  const auto cfg = h::load_config_text(kMinimal);
  EXPECT_EQ(cfg.run.n_list, std::vector<int>{8});
  EXPECT_DOUBLE_EQ(cfg.run.delta, kDefaultDelta);
  EXPECT_EQ(cfg.run.mode, "exact");
  EXPECT_EQ(cfg.hash.size(), 16u);
}

TEST(Config, OverridesChangeHash) {
  h::Overrides ov;
  ov.n_list = std::vector<int>{4, 5};
  const auto a = h::load_config_text(kMinimal);
  const auto b = h::load_config_text(kMinimal, ov);
  EXPECT_EQ(b.run.n_list, (std::vector<int>{4, 5}));
  EXPECT_NE(a.hash, b.hash);
  EXPECT_EQ(a.hash, h::load_config_text(kMinimal).hash);
}

TEST(Config, RejectsUnknownKeyWithPath) {
  const std::string text = R"({"constraint": {"alphabet": ["0","1"], "forbidden": []},
    "input": {"type": "parry"}, "channel": {"type": "bsc"}, "run": {"nn": [3]}})";
  try {
    h::load_config_text(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    EXPECT_NE(std::string(e.what()).find("run.nn"), std::string::npos);
  }
}

TEST(Config, RejectsBadValues) {
  auto code_of = [](const std::string& text) {
    try {
      h::load_config_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Config;
  };
  const std::string base = R"({"constraint": {"alphabet": ["0","1"], "forbidden": ["11"]}, "input": {"type": "parry"},)";
  EXPECT_EQ(code_of(base + R"("channel": {"type": "bsc"}, "run": {"eps": [-0.1]}})"), ErrorCode::Config);
  EXPECT_EQ(code_of(base + R"("channel": {"type": "bsc"}, "run": {"mode": "fast"}})"), ErrorCode::Config);
  EXPECT_EQ(code_of(base + R"("channel": {"type": "bsc"}, "run": {"n": 3}})"), ErrorCode::Config);
  EXPECT_EQ(code_of(base + R"("channel": {"type": "awgn"}})"), ErrorCode::Config);
  EXPECT_EQ(code_of(R"({"constraint": {"alphabet": ["0","1"], "forbidden": ["0", "1"]}, "input": {"type": "parry"},
    "channel": {"type": "bsc"}})"), ErrorCode::Degenerate);
  EXPECT_EQ(code_of(R"({"constraint": {"alphabet": ["0","1"], "forbidden": ["101"]}, "input": {"type": "parry"},
    "channel": {"type": "bsc"}})"), ErrorCode::OrderTooHigh);
}

TEST(Config, CustomChannelMatchesFactory) {
  const std::string text = R"({"constraint": {"alphabet": ["0","1"], "forbidden": ["11"]}, "input": {"type": "parry"},
    "channel": {"type": "custom", "outputs": ["0","1"], "map": ["0","1"],
                "table": [[[[1,-1],[0,1]]], [[[0,1],[1,-1]]]]}})";
  const auto cfg = h::load_config_text(text);
  const ChannelSpec ref = bsc();
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z)
      for (double eps : {0.0, 0.03, 0.1}) EXPECT_DOUBLE_EQ(cfg.channel.kernel(x, 0, z)(eps), ref.kernel(x, 0, z)(eps));
}

TEST(Config, RllShorthand) {
  const auto cfg = h::load_config_text(R"({"constraint": {"rll": {"d": 1, "k": null}}, "input": {"type": "parry"},
    "channel": {"type": "bsc"}})");
  EXPECT_EQ(cfg.constraint->allowed_pairs().size(), 3u);
}

TEST(Harness, MalformedJsonExitsTwo) {
  const auto dir = scratch("malformed");
  const auto cfg = write_config(dir, "{\"constraint\": [");
  std::string err;
  EXPECT_EQ(run_cmd(cfg.string(), "entropy", {}, dir, &err), h::kExitValidation);
  EXPECT_NE(err.find("byte"), std::string::npos);
}

TEST(Harness, UnknownSubcommandExitsTwo) {
  const auto dir = scratch("unknown");
  EXPECT_EQ(run_cmd(kGolden, "frobnicate", {}, dir), h::kExitValidation);
}

TEST(Harness, BudgetExceededExitsThree) {
  const auto dir = scratch("budget");
  h::Overrides ov;
  ov.n_list = std::vector<int>{30};
  EXPECT_EQ(run_cmd(kGolden, "entropy", ov, dir), h::kExitBudget);
}

TEST(Harness, MonteCarloAtZeroEpsIsRejected) {
  const auto dir = scratch("mc_zero");
  h::Overrides ov;
  ov.eps_list = std::vector<double>{0.0};
  ov.mode = "monte_carlo";
  std::string err;
  EXPECT_EQ(run_cmd(kGolden, "entropy", ov, dir, &err), h::kExitValidation);
  EXPECT_NE(err.find("NonpositiveEps"), std::string::npos);
}

TEST(Harness, EntropyCsvIsByteIdentical) {
  const auto a = scratch("repeat_a"), b = scratch("repeat_b");
  h::Overrides ov;
  ov.n_list = std::vector<int>{4, 6};
  ov.mode = "monte_carlo";
  ov.samples = 5000;
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, a), 0);
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, b), 0);
  EXPECT_EQ(slurp(a / "entropy.csv"), slurp(b / "entropy.csv"));
  ov.seed = 2;
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, b), 0);
  EXPECT_NE(slurp(a / "entropy.csv"), slurp(b / "entropy.csv"));
}

TEST(Harness, CsvHeaderCarriesVersionHashAndUnits) {
  const auto dir = scratch("header");
  h::Overrides ov;
  ov.bits = true;
  ov.n_list = std::vector<int>{3};
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, dir), 0);
  const std::string text = slurp(dir / "entropy.csv");
  const auto cfg = h::load_config(kGolden, ov);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            std::string("# hmrate ") + h::kToolVersion + " config=" + cfg.hash + " units=bits");
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Harness, BitsScaleEntropies) {
  const auto nats = scratch("nats"), bits = scratch("bits");
  h::Overrides ov;
  ov.n_list = std::vector<int>{5};
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, nats), 0);
  ov.bits = true;
  ASSERT_EQ(run_cmd(kGolden, "entropy", ov, bits), 0);
  const double hn = std::stod(read_csv(nats / "entropy.csv")[1][2]);
  const double hb = std::stod(read_csv(bits / "entropy.csv")[1][2]);
  EXPECT_NEAR(hb, hn / std::log(2.0), 1e-15);
}

TEST(Harness, OrdersCsvListsWord110) {
  const auto dir = scratch("orders");
  ASSERT_EQ(run_cmd(kGolden, "orders", {}, dir), 0);
  const auto rows = read_csv(dir / "orders.csv");
  ASSERT_EQ(rows.size(), 9u);
  // Parry chain on the golden mean shift: P(0 -> 1) = 1 / phi^2.
  const double p = 1.0 - (std::sqrt(5.0) - 1.0) / 2.0;
  bool found = false;
  for (const auto& r : rows)
    if (r[0] == "110") {
      found = true;
      EXPECT_EQ(r[1], "1");
      EXPECT_EQ(r[2], "1");
      EXPECT_NEAR(std::stod(r[4]), (2.0 * p - p * p) / (1.0 + p), 1e-12);
    }
  EXPECT_TRUE(found);
}

TEST(Harness, DecomposeResidualIsSmall) {
  const auto dir = scratch("decompose");
  ASSERT_EQ(run_cmd(kGolden, "decompose", {}, dir), 0);
  const auto rows = read_csv(dir / "decompose.csv");
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(std::abs(std::stod(rows[i][5])), 1e-10);
  EXPECT_TRUE(fs::exists(dir / "orders.csv"));
}

TEST(Harness, VerifyPasses) {
  const auto dir = scratch("verify");
  ASSERT_EQ(run_cmd(kGolden, "verify", {}, dir), 0);
  const auto j = h::json::parse(slurp(dir / "verify.json"));
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_TRUE(j["hay"]["applicable"].get<bool>());
  EXPECT_EQ(j["stabilization"]["passed_pairs"].get<int>(), 50);
  EXPECT_EQ(j["_meta"]["tool"], "hmrate");
}

TEST(Harness, VerifyMarksHayInapplicableForErasures) {
  const auto dir = scratch("verify_bec");
  ASSERT_EQ(run_cmd(std::string(HMRATE_CONFIG_DIR) + "/golden_bec.json", "verify", {}, dir), 0);
  const auto j = h::json::parse(slurp(dir / "verify.json"));
  EXPECT_FALSE(j["hay"]["applicable"].get<bool>());
}

TEST(Harness, OptimizeCertifiedAtZeroNoise) {
  const auto dir = scratch("optimize");
  h::Overrides ov;
  ov.eps_list = std::vector<double>{0.0};
  ov.n_list = std::vector<int>{4};
  ov.require_certified = true;
  ASSERT_EQ(run_cmd(kGolden, "optimize", ov, dir), 0);
  const auto j = h::json::parse(slurp(dir / "optimize.json"));
  EXPECT_NEAR(j["value_nats"].get<double>(), std::log((1.0 + std::sqrt(5.0)) / 2.0), 1e-8);
  EXPECT_TRUE(j["certified"].get<bool>());
  EXPECT_TRUE(j["concavity"]["passed"].get<bool>());
}

TEST(Harness, OptimizeUncertifiedExitsFour) {
  const auto dir = scratch("optimize_fail");
  h::Overrides ov;
  ov.n_list = std::vector<int>{4};
  ov.max_iter = 0;
  ov.require_certified = true;
  EXPECT_EQ(run_cmd(kGolden, "optimize", ov, dir), h::kExitCertification);
}

TEST(Harness, CapacityAndSweepShapes) {
  const auto dir = scratch("capacity");
  h::Overrides ov;
  ov.n_list = std::vector<int>{3, 4, 5};
  ASSERT_EQ(run_cmd(kGolden, "capacity", ov, dir), 0);
  const auto cap = read_csv(dir / "capacity.csv");
  ASSERT_EQ(cap.size(), 4u);
  EXPECT_EQ(cap[0][3], "gap_to_prev");
  EXPECT_EQ(cap[0][5], "certified");
  EXPECT_EQ(cap[1][3], "nan");
  ASSERT_EQ(run_cmd(kGolden, "sweep", ov, dir), 0);
  const auto sw = read_csv(dir / "sweep.csv");
  ASSERT_EQ(sw.size(), 4u);
  EXPECT_EQ(sw[0].back(), "I_n");
  for (std::size_t i = 1; i < sw.size(); ++i) EXPECT_LE(std::stod(sw[i].back()), std::stod(cap[i][1]) + 1e-9);
}

TEST(Harness, ConstraintInfoAndTypical) {
  const auto dir = scratch("info");
  ASSERT_EQ(run_cmd(kGolden, "constraint-info", {}, dir), 0);
  const auto j = h::json::parse(slurp(dir / "constraint_info.json"));
  EXPECT_TRUE(j["mixing"].get<bool>());
  EXPECT_EQ(j["primitivity_exponent"].get<int>(), 2);
  EXPECT_NEAR(j["capacity"].get<double>(), std::log((1.0 + std::sqrt(5.0)) / 2.0), 1e-12);
  ASSERT_EQ(run_cmd(kGolden, "typical", {}, dir), 0);
  EXPECT_EQ(read_csv(dir / "typical.csv").size(), 5u);
}
