#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "proxdiv/quadrature.hpp"
#include "proxdiv/random.hpp"

using namespace proxdiv;

namespace {
double normal_pdf(double y, double m) { return std::exp(-0.5 * (y - m) * (y - m)) / std::sqrt(2 * std::numbers::pi); }
}  // namespace

TEST(Quadrature, StandardNormalOverRealLine) {
  const auto r = integrate([](double y) { return normal_pdf(y, 0.0); }, Domain::RealLine);
  EXPECT_NEAR(r.value, 1.0, 1e-8);
  EXPECT_FALSE(r.used_fallback);
}

TEST(Quadrature, MixtureAndMean) {
  auto mix = [](double y) { return 0.35 * normal_pdf(y, -2.0) + 0.65 * normal_pdf(y, 1.5); };
  EXPECT_NEAR(integrate(mix, Domain::RealLine).value, 1.0, 1e-6);
  EXPECT_NEAR(integrate([](double y) { return y * normal_pdf(y, 1.5); }, Domain::RealLine).value, 1.5, 1e-6);
}

TEST(Quadrature, PositiveHalfLine) {
  const auto r = integrate([](double x) { return std::exp(-x); }, Domain::PositiveHalfLine);
  EXPECT_NEAR(r.value, 1.0, 1e-8);
}

TEST(GaussLegendre, PolynomialExactness) {
  Rng rng(1);
  for (std::size_t m : {2u, 3u, 5u, 8u, 16u}) {
    const auto rule = gauss_legendre_rule(m);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> c(2 * m);
      for (auto& x : c) x = rng.uniform(-1.0, 1.0);
      double exact = 0.0;
      for (std::size_t k = 0; k < c.size(); k += 2) exact += 2.0 * c[k] / static_cast<double>(k + 1);
      double approx = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double p = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) p = p * rule.nodes[i] + c[k];
        approx += rule.weights[i] * p;
      }
      EXPECT_NEAR(approx, exact, 1e-12) << "order " << m;
    }
  }
  EXPECT_THROW(gauss_legendre_rule(1), InvalidArgument);
}

TEST(Quadrature, FallbackWhenIntegrandThrowsInAdaptivePass) {
  int calls = 0;
  auto f = [&](double y) {
    if (++calls == 1) throw std::runtime_error("transient");
    return normal_pdf(y, 0.0);
  };
  const auto r = integrate(f, Interval::real_line(-10, 10));
  EXPECT_TRUE(r.used_fallback);
  EXPECT_NEAR(r.value, 1.0, 1e-8);
}

TEST(Quadrature, FailureCarriesDiagnostics) {
  auto f = [](double y) { return y > 0.0 ? std::nan("") : 1.0; };
  try {
    integrate(f, Interval::real_line(-1, 1));
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_FALSE(e.failed_panels().empty());
    for (double p : e.failed_panels()) EXPECT_GE(p, -1e-12);
  }
}

TEST(Quadrature, TruncationLosesLessThanTolerance) {
  auto f = [](double y) { return 0.35 * normal_pdf(y, -2.0) + 0.65 * normal_pdf(y, 1.5); };
  QuadratureConfig narrow, wide;
  wide.truncation_radius = 2 * narrow.truncation_radius;
  EXPECT_NEAR(integrate(f, Domain::RealLine, narrow).value, integrate(f, Domain::RealLine, wide).value,
              narrow.abs_tol);
}

TEST(QuadratureConfig, Validation) {
  QuadratureConfig c;
  c.abs_tol = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.fallback_order = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
