#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace hmrate;
using testing_support::binary_entropy;
using testing_support::golden;
using testing_support::golden_chain;

namespace {

double quad(const Vector& t) { return -dot(t, t); }

double golden_noiseless(double p) { return binary_entropy(p) / (1.0 + p); }

ChartObjective mi_in_chart(const FreeChart& chart, std::shared_ptr<const Constraint> c, const ChannelSpec& ch, int n,
                           double eps) {
  return [=](const Vector& t) { return mutual_information_n(JointProb(c, chart.point(t)), ch, n, eps); };
}

}  // namespace

TEST(FdGradient, QuadraticCalibration) {
  const Vector t{0.3, -0.2, 0.7};
  const Vector g = fd_gradient(quad, t, unbounded_domain());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(g[i], -2.0 * t[i], 1e-10);
  // Central stencils are exact on quadratics; a wider step keeps rounding below 1e-8.
  const Matrix h = fd_hessian(quad, t, unbounded_domain(), 1e-3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(h(i, j), i == j ? -2.0 : 0.0, 1e-8);
}

TEST(FdGradient, LinearObjectiveIsExact) {
  const auto c = testing_support::full_binary();
  const JointProb anchor = max_entropy_chain(c);
  const FreeChart chart = free_chart(anchor);
  const ChannelSpec ge = gilbert_elliott(0.3, 2.0);
  const double e = 0.02;
  const ChartObjective f = [&](const Vector& t) { return conditional_entropy_given_input(JointProb(c, chart.point(t)), ge, e); };
  // H(Z0|X0) = sum_xy p(xy) h(x), so the chart slope is sum_i basis_i h(first_i).
  Vector hx(2, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) {
      const double m = ge.marginal_kernel(x, z)(e);
      hx[static_cast<std::size_t>(x)] -= m * std::log(m);
    }
  const Vector g = fd_gradient(f, chart, Vector(chart.dimension(), 0.0), 0.0);
  for (std::size_t k = 0; k < chart.dimension(); ++k) {
    double want = 0.0;
    for (std::size_t i = 0; i < c->allowed_pairs().size(); ++i) want += chart.basis[k][i] * hx[c->allowed_pairs()[i].first];
    EXPECT_NEAR(g[k], want, 1e-8);
  }
}

TEST(FdGradient, VanishesAtParryWhenNoiseless) {
  const JointProb parry = max_entropy_chain(golden());
  const FreeChart chart = free_chart(parry);
  const Vector g = fd_gradient(mi_in_chart(chart, golden(), bsc(), 5, 0.0), chart, Vector{0.0}, 0.0);
  EXPECT_LT(std::abs(g[0]), 1e-8);
}

TEST(FdGradient, ShrinksNearBoundaryAndUnderflows) {
  const ChartDomain half_line = [](const Vector& t) { return t[0] >= 0.0; };
  const ChartObjective cubic = [](const Vector& t) { return t[0] * t[0] * t[0] + t[0]; };
  const Vector g = fd_gradient(cubic, Vector{1e-5}, half_line);
  EXPECT_NEAR(g[0], 1.0, 1e-9);
  try {
    fd_gradient(cubic, Vector{1e-8}, half_line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepUnderflow);
  }
  EXPECT_THROW(fd_hessian(cubic, Vector{1e-8}, half_line), Error);
}

TEST(FdHessian, NoiselessSecondDerivativeMatchesClosedForm) {
  // p -> H_b(p) = (1 + p) * I_n(golden chain with transition p) at eps = 0.
  for (double p : {0.2, 0.382, 0.6, 0.8}) {
    const ChartObjective f = [](const Vector& t) { return (1.0 + t[0]) * mutual_information_n(golden_chain(t[0]), bsc(), 3, 0.0); };
    const Matrix h = fd_hessian(f, Vector{p}, unbounded_domain());
    EXPECT_NEAR(h(0, 0), -1.0 / p - 1.0 / (1.0 - p), 1e-4);
    const ChartObjective g = [](const Vector& t) { return golden_noiseless(t[0]); };
    EXPECT_LT(fd_hessian(g, Vector{p}, unbounded_domain())(0, 0), 0.0);
  }
}

TEST(FdHessian, EigenvaluesMatchCharacteristicPolynomial) {
  const auto c = testing_support::full_binary();
  const FreeChart chart = free_chart(max_entropy_chain(c));
  ASSERT_EQ(chart.dimension(), 2u);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector t{u(rng), u(rng)};
    const Matrix h = fd_hessian(mi_in_chart(chart, c, bsc(), 4, 0.01), chart, t, 0.0);
    EXPECT_EQ(h(0, 1), h(1, 0));
    const double a = h(0, 0), d = h(1, 1), b = h(0, 1);
    const double mid = 0.5 * (a + d), rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    const auto eig = symmetric_eigenvalues(h);
    EXPECT_NEAR(eig[0], mid - rad, 1e-10);
    EXPECT_NEAR(eig[1], mid + rad, 1e-10);
  }
}

TEST(FeasibleBox, GoldenMeanInterval) {
  const JointProb parry = max_entropy_chain(golden());
  const FreeChart chart = free_chart(parry);
  const double delta = 0.02;
  const ChartBox box = feasible_box(chart, delta);
  // Box ends are exactly where some entry reaches delta.
  for (double t : {box.lo[0], box.hi[0]}) {
    const Vector p = chart.point(Vector{t});
    EXPECT_NEAR(*std::min_element(p.begin(), p.end()), delta, 1e-12);
  }
  const auto pts = chart_grid(chart, delta, 9);
  EXPECT_EQ(pts.size(), 9u);
  for (const auto& t : pts) EXPECT_TRUE(JointProb(golden(), chart.point(t)).in_m_delta(delta));
  EXPECT_THROW(feasible_box(chart, 0.5), Error);
}

TEST(CertifyConcavity, GoldenMeanPassesAndConvexControlFails) {
  for (double e : {0.0, 0.01}) {
    const auto r = certify_concavity(bsc(), golden(), 6, e, 0.02, 9);
    EXPECT_TRUE(r.passed) << "eps=" << e;
    EXPECT_LT(r.max_eigenvalue, 0.0);
    EXPECT_EQ(r.points.size(), 9u);
  }
  const FreeChart chart = free_chart(max_entropy_chain(golden()));
  const auto control = certify_concavity_of([](const Vector& t) { return dot(t, t); }, chart, 0.02, 9);
  EXPECT_FALSE(control.passed);
  EXPECT_GT(control.max_eigenvalue, 0.0);
}

TEST(MaximizeMi, NoiselessGoldenMeanReachesLogPhi) {
  const auto r = maximize_mi(bsc(), golden(), 6, 0.0);
  EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_NEAR(r.value, std::log(perron(*golden()).root), 1e-8);
  const double p_star = testing_support::golden_section_max(golden_noiseless, 1e-6, 1.0 - 1e-6);
  const FreeChart chart = free_chart(max_entropy_chain(golden()));
  EXPECT_NEAR(r.t[0], chart.coords(golden_chain(p_star).values())[0], 1e-6);
  EXPECT_TRUE(r.certified);
  EXPECT_FALSE(r.touches_boundary);
}

TEST(MaximizeMi, NoiselessFullShiftIsUniform) {
  const auto r = maximize_mi(bsc(), testing_support::full_binary(), 4, 0.0);
  EXPECT_NEAR(r.value, std::log(2.0), 1e-10);
  for (double v : r.argmax.values()) EXPECT_NEAR(v, 0.25, 1e-6);
}

TEST(MaximizeMi, DominatesParryAndRandomPoints) {
  const int n = 8;
  const double e = 0.01;
  const auto r = maximize_mi(bsc(), golden(), n, e);
  EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_LE(r.grad_norm, kDefaultOptTol);
  EXPECT_LE(r.raw_grad_norm, kDefaultOptTol);
  EXPECT_GE(r.value, mutual_information_n(max_entropy_chain(golden()), bsc(), n, e));
  for (const auto& s : start_points(golden(), kDefaultDelta, 21, 99))
    EXPECT_GE(r.value, mutual_information_n(JointProb(golden(), s), bsc(), n, e));
  const auto cert = certify_concavity(bsc(), golden(), n, e, 0.02, 9);
  for (double v : cert.values) EXPECT_GE(r.value, v);
}

TEST(MaximizeMi, StartsAgreeUnderCertifiedConcavity) {
  const double tol = 1e-9;
  MaximizeOptions opt;
  opt.tol = tol;
  const auto m = maximize_mi_multistart(gilbert_elliott(0.5, 2.0), golden(), 6, 0.01, 5, 17, opt);
  ASSERT_EQ(m.runs.size(), 5u);
  for (const auto& r : m.runs) EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_LE(m.spread, 10.0 * tol);
}

TEST(MaximizeMi, BoundaryArgmaxIsProjection) {
  const auto c = testing_support::full_binary();
  const FreeChart chart = free_chart(max_entropy_chain(c));
  const Vector target{0.5, 0.0, 0.0, 0.5};
  const ChartObjective f = [&](const Vector& t) {
    const Vector p = chart.point(t);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s -= (p[i] - target[i]) * (p[i] - target[i]);
    return s;
  };
  AscentOptions opt;
  opt.delta = 0.05;
  opt.tol = 1e-10;
  const auto r = ascend(f, c, chart, Vector(2, 0.0), opt);
  EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_TRUE(r.touches_boundary);
  const JointProb want = project_to_feasible(c, target, 0.05);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.argmax.values()[i], want.values()[i], 1e-8);
}

TEST(MaximizeMi, NoProgressOnMisleadingGradient) {
  const auto c = testing_support::full_binary();
  const FreeChart chart = free_chart(max_entropy_chain(c));
  const ChartObjective f = [](const Vector& t) { return t[0] > 0.0 ? t[0] - 1.0 : t[0]; };
  const auto r = ascend(f, c, chart, Vector(2, 0.0), AscentOptions{});
  EXPECT_EQ(r.status, OptStatus::NoProgress);
}

TEST(MaximizeMi, Errors) {
  MaximizeOptions opt;
  opt.delta = 0.5;
  try {
    maximize_mi(bsc(), golden(), 4, 0.01, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleDelta);
  }
  opt.delta = 1e-3;
  opt.tol = 0.0;
  EXPECT_THROW(maximize_mi(bsc(), golden(), 4, 0.01, opt), Error);
}

TEST(CapacitySequence, NoiselessArgmaxIsFixed) {
  const double tol = 1e-9;
  const auto s = capacity_sequence(bsc(), golden(), 0.0, {2, 4, 6}, kDefaultDelta, tol);
  for (double g : s.gaps) EXPECT_LE(g, 2.0 * tol);
}

TEST(CapacitySequence, GapsContractAndValuesDecrease) {
  const auto s = capacity_sequence(bsc(), golden(), 0.01, {4, 6, 8}, kDefaultDelta, 1e-11);
  ASSERT_EQ(s.gaps.size(), 2u);
  EXPECT_GT(s.gaps[0], s.gaps[1]);
  EXPECT_LT(s.fitted_rho, 1.0);
  EXPECT_TRUE(s.contracting);
  for (std::size_t i = 1; i < s.entries.size(); ++i) EXPECT_LE(s.entries[i].value, s.entries[i - 1].value + 1e-11);
}
