#include <cmath>

#include <gtest/gtest.h>

#include "proxdiv/proximal.hpp"

using namespace proxdiv;

namespace {

using GObjective = Objective<GaussianMixture2>;
using WObjective = Objective<WeibullMixture2>;

const ParamVector kTruth(0.35, -2.0, 1.5);

Sample gaussian_sample(std::uint64_t seed = 42) { return GaussianMixture2().sample(kTruth, 100, seed); }

ProximalConfig mkl_config() {
  ProximalConfig c;
  c.psi = ProximalGenerator(DivergenceSpec::modified_kl());
  c.optimizer.x_tol = 1e-10;
  c.optimizer.f_tol = 1e-14;
  return c;
}

}  // namespace

TEST(DPsi, ZeroOnDiagonalAndForCounterexamplePair) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const ProximalGenerator psi;
  EXPECT_EQ(d_psi(m, kTruth, kTruth, s, psi), 0.0);
  const ParamVector a(2.0 / 3.0, 0.0, 1.0), b(2.0 / (2.0 + std::exp(0.5)), 0.5, 1.5);
  EXPECT_NEAR(d_psi(m, a, b, s, psi), 0.0, 1e-12);
  EXPECT_NEAR(d_psi(m, b, a, s, psi), 0.0, 1e-12);
}

TEST(DPsi, PositiveForGenericPair) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const ParamVector a(0.4, -1.0, 2.0), b(0.6, -2.5, 1.0);
  // The pair does not satisfy mu1 - mu2 = mu1' - mu2'.
  ASSERT_NE(a.theta(0) - a.theta(1), b.theta(0) - b.theta(1));
  EXPECT_GT(d_psi(m, a, b, s, ProximalGenerator()), 1e-8);
}

TEST(DPsi, RejectsVanishingReference) {
  const WeibullMixture2 m;
  const Sample s{{-1.0, 1.0}};
  EXPECT_THROW(d_psi(m, {0.35, 1.2, 2.0}, {0.35, 1.2, 2.0}, s, ProximalGenerator()), DegeneracyError);
}

// With the modified KL objective and generator a proximal step is an EM step.
TEST(ProximalStep, ModifiedKlReproducesEmStep) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const auto obj = GObjective::neg_loglik(m, s);
  const auto cfg = mkl_config();
  const ParamVector p(0.5, -1.0, 1.0);
  const auto step = proximal_step(obj, p, obj(p), 0, cfg);
  EXPECT_LT(max_abs_difference(step.next, m.em_step(p, s)), 1e-5);
}

TEST(ProximalStep, FixedPointStaysPut) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const auto obj = GObjective::neg_loglik(m, s);
  const auto mle = em_fit(m, s, {0.5, -1, 1}, 1e-13, 20000).estimate;
  const auto step = proximal_step(obj, mle, obj(mle), 0, mkl_config());
  EXPECT_LT(max_abs_difference(step.next, mle), 1e-5);
  EXPECT_LT(step.dpsi, 1e-9);
}

TEST(ProximalStep, ZeroBetaIsPlainMinimization) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const auto obj = GObjective::mdpd(m, s, 0.5);
  ProximalConfig cfg;
  cfg.beta0 = 0.0;
  const ParamVector p(0.5, -1.0, 1.0);
  const auto step = proximal_step(obj, p, obj(p), 0, cfg);
  const auto direct = minimize([&](const ParamVector& x) { return obj(x); }, p, m.bounds(), cfg.optimizer);
  EXPECT_LT(max_abs_difference(step.next, ParamVector(direct.argmin)), 1e-12);
}

TEST(Run, KernelDualTraceIsMonotoneAndImproves) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const auto obj = GObjective::kernel_dual(m, s, DivergenceSpec::hellinger());
  const ParamVector start(0.5, -1.0, 1.0);
  const auto trace = run(obj, start);
  EXPECT_TRUE(trace.monotone());
  EXPECT_TRUE(trace.within_initial_level_set());
  EXPECT_GT(trace.iterations(), 0u);
  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    EXPECT_LE(std::log1p(trace.records[k].objective), std::log1p(trace.records[k - 1].objective));
  }
  QuadratureConfig q;
  auto tvd = [&](const ParamVector& a) {
    const ParamVector pts[] = {a, kTruth};
    return integrate([&](double y) { return std::abs(m.density(a, y) - m.density(kTruth, y)); },
                     m.integration_range(pts), q)
        .value;
  };
  EXPECT_LT(tvd(trace.last().phi), tvd(start));
}

TEST(Run, StopsQuicklyAtEmFixedPoint) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const auto obj = GObjective::classical_dual(m, s, DivergenceSpec::modified_kl());
  const auto mle = em_fit(m, s, {0.5, -1, 1}, 1e-13, 20000).estimate;
  const auto trace = run(obj, mle, mkl_config());
  EXPECT_LE(trace.iterations(), 2u);
}

TEST(Run, ObjectiveDifferencesSettle) {
  const GaussianMixture2 m;
  const auto obj = GObjective::kernel_dual(m, gaussian_sample(), DivergenceSpec::hellinger());
  ProximalConfig cfg;
  cfg.patience = 5;
  const auto trace = run(obj, {0.5, -1.0, 1.0}, cfg);
  if (trace.stop == StopReason::ObjectiveConverged) {
    ASSERT_GE(trace.records.size(), 6u);
    for (std::size_t k = trace.records.size() - 5; k < trace.records.size(); ++k) {
      EXPECT_LT(std::abs(trace.records[k].objective - trace.records[k - 1].objective), cfg.eps_objective);
    }
  }
  EXPECT_TRUE(trace.monotone());
}

TEST(Run, StationarityResidualAtTermination) {
  const GaussianMixture2 m;
  const auto obj = GObjective::kernel_dual(m, gaussian_sample(), DivergenceSpec::hellinger());
  ProximalConfig cfg;
  cfg.optimizer.x_tol = 1e-10;
  cfg.eps_objective = 1e-12;
  cfg.eps_step = 1e-9;
  const auto trace = run(obj, {0.5, -1.0, 1.0}, cfg);
  const ParamVector phi = trace.last().phi;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < ParamVector::kSize; ++i) {
    const double h = 1e-5;
    ParamVector up = phi, down = phi;
    up[i] += h;
    down[i] -= h;
    const double g = (obj(up) - obj(down)) / (2 * h);
    norm2 += g * g;
  }
  EXPECT_LT(std::sqrt(norm2), 1e-3);
}

TEST(Run, DecreasingBetaFullArginfStaysInLevelSet) {
  const GaussianMixture2 m;
  const auto obj = GObjective::mdpd(m, gaussian_sample(7), 0.5);
  ProximalConfig cfg;
  cfg.decreasing_beta = true;
  cfg.accept = AcceptRule::FullArginf;
  cfg.max_iter = 30;
  const auto trace = run(obj, {0.6, -0.5, 0.5}, cfg);
  EXPECT_TRUE(trace.within_initial_level_set());
  EXPECT_TRUE(trace.monotone());
}

TEST(Run, WeibullMdpdMonotone) {
  const WeibullMixture2 m;
  const auto s = m.sample({0.35, 1.2, 2.0}, 100, 3);
  const auto obj = WObjective::mdpd(m, s, 0.5);
  const auto trace = run(obj, {0.5, 1.0, 1.5});
  EXPECT_TRUE(trace.monotone());
  EXPECT_TRUE(trace.within_initial_level_set());
}

TEST(Run, RejectsInvalidStartAndConfig) {
  const GaussianMixture2 m;
  const auto obj = GObjective::mdpd(m, gaussian_sample(), 0.5);
  EXPECT_THROW(run(obj, {0.0, 0.0, 0.0}), InvalidArgument);
  ProximalConfig cfg;
  cfg.eps_step = 0.0;
  EXPECT_THROW(run(obj, {0.5, 0.0, 0.0}, cfg), InvalidArgument);
}

TEST(InitLikelihood, AcceptsMomentStartRejectsFarField) {
  const GaussianMixture2 m;
  const auto s = gaussian_sample();
  const double ybar = mean(s.values), sd = stddev(s.values);
  EXPECT_TRUE(check_init_likelihood(m, {0.5, ybar - sd, ybar + sd}, s));
  EXPECT_FALSE(check_init_likelihood(m, {0.5, 100.0, 100.0}, s));
  // Both components on the sample mean reproduce the single-component bound.
  const auto boundary = check_init_likelihood_detail(m, {m.eta(), ybar, ybar}, s);
  EXPECT_NEAR(boundary.value, boundary.threshold, 1e-9);
  EXPECT_FALSE(boundary.accepted && boundary.value - boundary.threshold > 1e-9);
}

TEST(InitKernel, AcceptsNearTruthRejectsGrossMisplacement) {
  const GaussianMixture2 m;
  const auto obj = GObjective::kernel_dual(m, gaussian_sample(), DivergenceSpec::hellinger());
  const auto near = check_init_kernel_dual(obj, {0.4, -1.8, 1.4});
  EXPECT_TRUE(near.accepted);
  EXPECT_LT(near.value, near.profile_inf);
  EXPECT_DOUBLE_EQ(near.all_components_limit, 1.0);
  const auto far = check_init_kernel_dual(obj, {0.5, 50.0, 60.0});
  EXPECT_FALSE(far.accepted);
}

TEST(InitKernel, RequiresKernelObjective) {
  const GaussianMixture2 m;
  const auto obj = GObjective::mdpd(m, gaussian_sample(), 0.5);
  EXPECT_THROW(check_init_kernel_dual(obj, kTruth), InvalidArgument);
}
