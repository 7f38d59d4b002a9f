#include <gtest/gtest.h>

#include <functional>

#include "support.hpp"

using namespace hmrate;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Config;
}

KernelTable bsc_table() {
  return {{{Polynomial({1.0, -1.0}), Polynomial({0.0, 1.0})}}, {{Polynomial({0.0, 1.0}), Polynomial({1.0, -1.0})}}};
}

void expect_deterministic_at_zero(const ChannelSpec& ch) {
  for (std::size_t x = 0; x < ch.num_inputs(); ++x)
    for (std::size_t c = 0; c < ch.num_states(); ++c)
      for (std::size_t z = 0; z < ch.num_outputs(); ++z) {
        const double want = static_cast<int>(z) == ch.noiseless_map()[x] ? 1.0 : 0.0;
        EXPECT_EQ(ch.kernel(static_cast<int>(x), static_cast<int>(c), static_cast<int>(z))(0.0), want);
      }
}

}  // namespace

TEST(Bsc, Kernel) {
  const ChannelSpec ch = bsc();
  EXPECT_EQ(ch.kernel(0, 0, 0).coeffs(), (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(ch.kernel(0, 0, 1).order(), Order(1));
  EXPECT_EQ(ch.max_order(), 1);
  EXPECT_FALSE(ch.has_zero_entries());
  expect_deterministic_at_zero(ch);
  for (int x = 0; x < 2; ++x) EXPECT_EQ(ch.kernel(x, 0, 0) + ch.kernel(x, 0, 1), Polynomial::constant(1.0));
}

TEST(Bec, Kernel) {
  const ChannelSpec ch = bec();
  EXPECT_EQ(ch.outputs(), (std::vector<std::string>{"0", "1", "e"}));
  EXPECT_TRUE(ch.kernel(0, 0, 1).order().is_infinite());
  EXPECT_EQ(ch.kernel(0, 0, 2).order(), Order(1));
  EXPECT_TRUE(ch.has_zero_entries());
  EXPECT_EQ(ch.max_order(), 1);
  expect_deterministic_at_zero(ch);
}

TEST(GilbertElliott, Kernel) {
  const ChannelSpec ch = gilbert_elliott(0.5, 2.0);
  EXPECT_EQ(ch.num_states(), 2u);
  EXPECT_EQ(ch.kernel(0, 1, 1).order(), Order(1));
  EXPECT_DOUBLE_EQ(ch.kernel(0, 1, 1).coeff(1), 2.0);
  EXPECT_DOUBLE_EQ(ch.marginal_kernel(0, 1).coeff(1), 1.5);
  expect_deterministic_at_zero(ch);
  EXPECT_EQ(code_of([] { gilbert_elliott(0.0, 2.0); }), ErrorCode::BadParameter);
  EXPECT_EQ(code_of([] { gilbert_elliott(0.5, -1.0); }), ErrorCode::BadParameter);
  EXPECT_EQ(code_of([] { gilbert_elliott(0.5, 20.0); }), ErrorCode::BadParameter);
}

TEST(GilbertElliott, UnitRatioMatchesBsc) {
  const auto p = testing_support::golden_chain(0.4);
  const OmegaSet a = build_omegas(p, bsc());
  const OmegaSet b = build_omegas(p, gilbert_elliott(0.3, 1.0));
  for (int n = 1; n <= 6; ++n)
    for (std::size_t i = 0; i < (std::size_t{1} << n); ++i) {
      const Word w = testing_support::word_from_index(i, 2, n);
      const auto ca = word_probability_series(a, w).absolute_coeffs();
      const auto cb = word_probability_series(b, w).absolute_coeffs();
      for (std::size_t j = 0; j < ca.size(); ++j) EXPECT_NEAR(ca[j], cb[j], 1e-12);
    }
}

TEST(Custom, ExplicitBscEqualsFactory) {
  const ChannelSpec ch = custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, bsc_table(), {0, 1});
  EXPECT_EQ(ch.table(), bsc().table());
  EXPECT_EQ(ch.max_order(), bsc().max_order());
}

TEST(Custom, MaxOrder) {
  KernelTable t{{{Polynomial({1.0, 0.0, -1.0}), Polynomial({0.0, 0.0, 1.0})}},
                {{Polynomial({0.0, 1.0}), Polynomial({1.0, -1.0})}}};
  EXPECT_EQ(custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, t, {0, 1}).max_order(), 2);
}

TEST(Custom, Validation) {
  KernelTable bad_sum{{{Polynomial({1.0, -1.0, 1.0}), Polynomial({0.0, 1.0})}},
                      {{Polynomial({0.0, 1.0}), Polynomial({1.0, -1.0})}}};
  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, bad_sum, {0, 1}); }), ErrorCode::RowSumNotOne);

  KernelTable noisy{{{Polynomial({0.5, -1.0}), Polynomial({0.5, 1.0})}},
                    {{Polynomial({0.0, 1.0}), Polynomial({1.0, -1.0})}}};
  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, noisy, {0, 1}); }), ErrorCode::NoiselessViolation);

  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, bsc_table(), {0, 0}); }), ErrorCode::NotInjective);

  KernelTable negative{{{Polynomial({1.0, 1.0}), Polynomial({0.0, -1.0})}},
                       {{Polynomial({0.0, 1.0}), Polynomial({1.0, -1.0})}}};
  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, negative, {0, 1}); }), ErrorCode::BadParameter);

  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {0.9}, {"0", "1"}, bsc_table(), {0, 1}); }), ErrorCode::BadParameter);
  EXPECT_EQ(code_of([&] { custom({"0", "1"}, {"s"}, {1.0}, {"0", "1"}, bsc_table(), {0}); }), ErrorCode::BadParameter);
}
