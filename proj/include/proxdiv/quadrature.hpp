#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <numbers>
#include <queue>
#include <utility>
#include <vector>

#include "proxdiv/errors.hpp"

namespace proxdiv {

enum class Domain { RealLine, PositiveHalfLine };

/// A finite integration interval. Intervals on the positive half-line are
/// integrated in the variable u = log(x), which resolves the behaviour of
/// Weibull-type integrands near zero and their long right tails.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  Domain domain = Domain::RealLine;

  static Interval real_line(double lo, double hi) { return {lo, hi, Domain::RealLine}; }
  static Interval positive(double lo, double hi) { return {lo, hi, Domain::PositiveHalfLine}; }
};

struct QuadratureConfig {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  std::size_t max_subdivisions = 200;
  std::size_t initial_panels = 8;
  /// Order and panel count of the composite Gauss-Legendre fallback.
  std::size_t fallback_order = 64;
  std::size_t fallback_panels = 16;
  /// Truncation used when integrating over a whole Domain: [-R, R] for the
  /// real line, [tiny, R] for the positive half-line.
  double truncation_radius = 40.0;
  double positive_tiny = 1e-30;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw InvalidArgument("quadrature tolerances must be > 0");
    if (fallback_order < 2) throw InvalidArgument("Gauss-Legendre order must be >= 2");
    if (max_subdivisions < initial_panels || initial_panels == 0 || fallback_panels == 0) {
      throw InvalidArgument("quadrature panel counts are inconsistent");
    }
  }
};

struct QuadratureResult {
  double value = 0.0;
  double est_error = 0.0;
  std::size_t evaluations = 0;
  bool used_fallback = false;
};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendreRule gauss_legendre_rule(std::size_t n) {
  if (n < 2) throw InvalidArgument("Gauss-Legendre order must be >= 2");
  GaussLegendreRule rule{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class G>
Panel kronrod_panel(G& g, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = g(c);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kKronrodNodes[j];
    const double f1 = g(c - dx);
    const double f2 = g(c + dx);
    kronrod += kKronrodWeights[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * (f1 + f2);
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

template <class G>
double composite_gauss_legendre(G& g, double a, double b, const GaussLegendreRule& rule,
                                std::size_t panels) {
  const double width = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    const double c = lo + 0.5 * width;
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * g(c + 0.5 * width * rule.nodes[i]);
    total += 0.5 * width * s;
  }
  return total;
}

}  // namespace detail

/// Integrate f over a finite interval: global adaptive Gauss-Kronrod (7/15)
/// bisection, falling back to composite Gauss-Legendre when the adaptive pass
/// does not converge, hits a non-finite value, or the integrand throws.
template <class F>
QuadratureResult integrate(F&& f, const Interval& interval, const QuadratureConfig& config = {}) {
  if (!(interval.hi > interval.lo)) {
    if (interval.hi == interval.lo) return {};
    throw InvalidArgument("integration interval has hi < lo");
  }
  std::size_t evaluations = 0;
  const bool log_scale = interval.domain == Domain::PositiveHalfLine;
  if (log_scale && !(interval.lo > 0.0)) throw InvalidArgument("positive-domain interval must have lo > 0");
  const double a = log_scale ? std::log(interval.lo) : interval.lo;
  const double b = log_scale ? std::log(interval.hi) : interval.hi;
  auto g = [&](double u) {
    ++evaluations;
    if (log_scale) {
      const double x = std::exp(u);
      return f(x) * x;
    }
    return static_cast<double>(f(u));
  };

  double last_estimate = std::nan("");
  try {
    std::priority_queue<detail::Panel> heap;
    double total = 0.0;
    double error = 0.0;
    const double width = (b - a) / static_cast<double>(config.initial_panels);
    for (std::size_t p = 0; p < config.initial_panels; ++p) {
      const double lo = a + width * static_cast<double>(p);
      const double hi = p + 1 == config.initial_panels ? b : lo + width;
      auto panel = detail::kronrod_panel(g, lo, hi);
      total += panel.value;
      error += panel.error;
      heap.push(panel);
    }
    bool finite = std::isfinite(total) && std::isfinite(error);
    while (finite && error > std::max(config.abs_tol, config.rel_tol * std::abs(total)) &&
           heap.size() < config.max_subdivisions) {
      const auto worst = heap.top();
      heap.pop();
      const double mid = 0.5 * (worst.a + worst.b);
      const auto left = detail::kronrod_panel(g, worst.a, mid);
      const auto right = detail::kronrod_panel(g, mid, worst.b);
      total += left.value + right.value - worst.value;
      error += left.error + right.error - worst.error;
      heap.push(left);
      heap.push(right);
      finite = std::isfinite(total) && std::isfinite(error);
    }
    last_estimate = total;
    if (finite && error <= std::max(config.abs_tol, config.rel_tol * std::abs(total))) {
      // Re-sum to shed the drift of the incremental updates.
      double value = 0.0;
      double err = 0.0;
      while (!heap.empty()) {
        value += heap.top().value;
        err += heap.top().error;
        heap.pop();
      }
      return {value, err, evaluations, false};
    }
  } catch (const std::exception&) {
    // Fall through to the fixed rule.
  }

  std::vector<double> failed;
  try {
    const auto rule = gauss_legendre_rule(config.fallback_order);
    const double fine = detail::composite_gauss_legendre(g, a, b, rule, config.fallback_panels);
    const double coarse = detail::composite_gauss_legendre(g, a, b, rule, std::max<std::size_t>(1, config.fallback_panels / 2));
    if (std::isfinite(fine)) return {fine, std::abs(fine - coarse), evaluations, true};
  } catch (const std::exception&) {
  }
  // Locate panels where the integrand is not finite for the diagnostics.
  const double width = (b - a) / static_cast<double>(config.fallback_panels);
  for (std::size_t p = 0; p < config.fallback_panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    bool ok = true;
    try {
      ok = std::isfinite(g(lo + 0.5 * width));
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) failed.push_back(log_scale ? std::exp(lo) : lo);
  }
  throw IntegrationError("adaptive and Gauss-Legendre quadrature both failed on [" +
                             std::to_string(interval.lo) + ", " + std::to_string(interval.hi) + "]",
                         std::move(failed), last_estimate);
}

/// Integrate over a whole domain using the configured truncation.
template <class F>
QuadratureResult integrate(F&& f, Domain domain, const QuadratureConfig& config = {}) {
  const Interval interval = domain == Domain::RealLine
                                ? Interval::real_line(-config.truncation_radius, config.truncation_radius)
                                : Interval::positive(config.positive_tiny, config.truncation_radius);
  return integrate(std::forward<F>(f), interval, config);
}

}  // namespace proxdiv
