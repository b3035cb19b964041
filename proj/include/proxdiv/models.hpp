#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "proxdiv/errors.hpp"
#include "proxdiv/param.hpp"
#include "proxdiv/quadrature.hpp"
#include "proxdiv/random.hpp"

namespace proxdiv {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; -inf when both are -inf.
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == kNegInf) return kNegInf;
  return a + std::log1p(std::exp(b - a));
}

/// log(1 + exp(x)).
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Conditional label probabilities h(1|phi, y), h(2|phi, y).
struct Responsibilities {
  double first;
  double second;
};

/// Conditional label probabilities on the log scale.
struct LogResponsibilities {
  double first;
  double second;
};

/// Shared two-component mixture machinery. Derived supplies
///   double log_component(std::size_t c, double theta, double y) const;
///   double draw_component(std::size_t c, double theta, Rng&) const;
/// and the family-specific pieces (EM step, integration range, starts).
template <class Derived>
class TwoComponentMixture {
 public:
  explicit TwoComponentMixture(double eta) : eta_(eta) {
    if (!(eta > 0.0 && eta < 0.5)) throw InvalidArgument("eta must lie in (0, 0.5)");
  }

  double eta() const noexcept { return eta_; }

  /// Throws InvalidArgument unless lambda is in [eta, 1 - eta] and theta is
  /// admissible for the family.
  void validate(const ParamVector& phi) const {
    const double lambda = phi.lambda();
    if (!(lambda >= eta_ && lambda <= 1.0 - eta_)) {
      throw InvalidArgument("lambda=" + std::to_string(lambda) + " outside [eta, 1-eta]");
    }
    for (std::size_t c = 0; c < 2; ++c) {
      if (!self().theta_admissible(phi.theta(c))) {
        throw InvalidArgument(std::string(Derived::kThetaName) + std::to_string(c + 1) + "=" +
                              std::to_string(phi.theta(c)) + " is not admissible");
      }
    }
  }

  double clamp_lambda(double lambda) const { return std::clamp(lambda, eta_, 1.0 - eta_); }

  double log_density(const ParamVector& phi, double y) const {
    return log_add_exp(std::log(phi.lambda()) + self().log_component(0, phi.theta(0), y),
                       std::log1p(-phi.lambda()) + self().log_component(1, phi.theta(1), y));
  }

  double density(const ParamVector& phi, double y) const {
    validate(phi);
    return std::exp(log_density(phi, y));
  }

  /// Log-responsibilities via the logistic of the component log-odds.
  LogResponsibilities log_conditional(const ParamVector& phi, double y) const {
    const double a1 = std::log(phi.lambda()) + self().log_component(0, phi.theta(0), y);
    const double a2 = std::log1p(-phi.lambda()) + self().log_component(1, phi.theta(1), y);
    if (a1 == kNegInf && a2 == kNegInf) {
      throw DegeneracyError("mixture density vanishes at y=" + std::to_string(y));
    }
    const double d = a1 - a2;
    return {-softplus(-d), -softplus(d)};
  }

  /// h(1|phi,y), h(2|phi,y); the larger one is the complement of the smaller
  /// so that the pair sums to one.
  Responsibilities conditional(const ParamVector& phi, double y) const {
    const auto lr = log_conditional(phi, y);
    if (lr.first <= lr.second) {
      const double h1 = std::exp(lr.first);
      return {h1, 1.0 - h1};
    }
    const double h2 = std::exp(lr.second);
    return {1.0 - h2, h2};
  }

  /// n i.i.d. draws: label ~ Bernoulli(lambda), then the component.
  Sample sample(const ParamVector& phi, std::size_t n, Rng& rng) const {
    validate(phi);
    if (n == 0) throw InvalidArgument("sample size must be >= 1");
    Sample s;
    s.provenance = Provenance::Model;
    s.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.bernoulli(phi.lambda()) ? 0 : 1;
      s.values.push_back(self().draw_component(c, phi.theta(c), rng));
    }
    return s;
  }

  Sample sample(const ParamVector& phi, std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    return sample(phi, n, rng);
  }

  /// Sample log-likelihood J(phi).
  double log_likelihood(const ParamVector& phi, std::span<const double> ys) const {
    double s = 0.0;
    for (double y : ys) s += log_density(phi, y);
    return s;
  }

  /// Optimization box: [eta, 1-eta] x theta box x theta box.
  Box bounds() const {
    const auto [lo, hi] = self().theta_bounds();
    return Box{{eta_, lo, lo}, {1.0 - eta_, hi, hi}};
  }

  /// Start at which the likelihood is well defined for any sample; used to
  /// seed the reference EM fit.
  ParamVector moment_start(const Sample& s) const { return self().default_start(s); }

  /// Draw a random start: lambda ~ U(0.1, 0.9), theta from the family.
  ParamVector random_start(const Sample& s, Rng& rng) const {
    const double lambda = rng.uniform(0.1, 0.9);
    const auto [t1, t2] = self().random_theta(s, rng);
    return self().canonicalize(ParamVector(lambda, t1, t2));
  }

  ParamVector project(const ParamVector& phi) const {
    ParamVector out = phi;
    bounds().project(out.values());
    return out;
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }

  double eta_;
};

/// lambda N(mu1, 1) + (1 - lambda) N(mu2, 1).
class GaussianMixture2 : public TwoComponentMixture<GaussianMixture2> {
 public:
  static constexpr const char* kName = "gaussian2";
  static constexpr const char* kThetaName = "mu";
  static constexpr double kSigma[2] = {1.0, 1.0};

  explicit GaussianMixture2(double eta = 0.01, double mu_min = -10.0, double mu_max = 10.0)
      : TwoComponentMixture(eta), mu_min_(mu_min), mu_max_(mu_max) {
    if (!(mu_min < mu_max)) throw InvalidArgument("mean box must satisfy mu_min < mu_max");
  }

  double log_component(std::size_t /*c*/, double mu, double y) const {
    const double z = y - mu;
    return -0.5 * z * z - kLogSqrt2Pi;
  }

  double draw_component(std::size_t /*c*/, double mu, Rng& rng) const { return rng.normal(mu, 1.0); }

  bool theta_admissible(double mu) const { return std::isfinite(mu); }
  std::pair<double, double> theta_bounds() const { return {mu_min_, mu_max_}; }

  /// Closed-form EM update; lambda is clamped to [eta, 1 - eta].
  ParamVector em_step(const ParamVector& phi, const Sample& s) const {
    double w1 = 0.0, w2 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double y : s.values) {
      const auto h = conditional(phi, y);
      w1 += h.first;
      w2 += h.second;
      s1 += h.first * y;
      s2 += h.second * y;
    }
    if (!(w1 > 0.0) || !(w2 > 0.0)) {
      throw DegeneracyError("EM step: a component received zero total responsibility");
    }
    return {clamp_lambda(w1 / static_cast<double>(s.size())), s1 / w1, s2 / w2};
  }

  /// Interval holding all but a negligible amount of the mass of every
  /// component of every given parameter point, widened to [extra_lo, extra_hi].
  Interval integration_range(std::span<const ParamVector> points, double extra_lo, double extra_hi,
                             double radius = 10.0) const {
    double lo = extra_lo, hi = extra_hi;
    for (const auto& p : points) {
      lo = std::min({lo, p.theta(0), p.theta(1)});
      hi = std::max({hi, p.theta(0), p.theta(1)});
    }
    return Interval::real_line(lo - radius, hi + radius);
  }

  Interval integration_range(std::span<const ParamVector> points) const {
    return integration_range(points, HUGE_VAL, -HUGE_VAL);
  }

  /// Best single-component log-likelihood: a lone N(mean(y), 1). Both
  /// boundary cases (one mean sent to infinity) have this value.
  double single_component_loglik(const Sample& s) const {
    const double m = mean(s.values);
    double j = 0.0;
    for (double y : s.values) j += log_component(0, m, y);
    return j;
  }

  ParamVector default_start(const Sample& s) const {
    const double m = mean(s.values);
    const double sd = std::max(stddev(s.values), 1e-3);
    return {0.5, std::clamp(m - sd, mu_min_, mu_max_), std::clamp(m + sd, mu_min_, mu_max_)};
  }

  /// Means uniform between the 10% and 90% sample quantiles, so that a few
  /// extreme observations do not attract a start component.
  std::pair<double, double> random_theta(const Sample& s, Rng& rng) const {
    const double a = std::clamp(quantile(s.values, 0.1), mu_min_, mu_max_);
    const double b = std::clamp(quantile(s.values, 0.9), mu_min_, mu_max_);
    return {rng.uniform(a, b), rng.uniform(a, b)};
  }

  /// Range of means scanned when profiling a single component.
  std::pair<double, double> profile_theta_range(const Sample& s) const {
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    return {std::max(*lo, mu_min_), std::min(*hi, mu_max_)};
  }

  /// Components are exchangeable; report them with mu1 <= mu2.
  ParamVector canonicalize(const ParamVector& phi) const {
    if (phi.theta(0) <= phi.theta(1)) return phi;
    return {1.0 - phi.lambda(), phi.theta(1), phi.theta(0)};
  }

 private:
  static constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
  double mu_min_;
  double mu_max_;
};

namespace detail {

/// argmax over shape of sum_i w_i log f(y_i | shape, scale) for a Weibull
/// component; the objective is concave in the shape, so a bracketed Newton
/// iteration on the score is enough.
inline double weighted_weibull_shape(std::span<const double> ys, std::span<const double> ws,
                                     double scale, double lo, double hi) {
  auto score = [&](double nu, double* curvature) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (ws[i] == 0.0) continue;
      const double l = std::log(ys[i] / scale);
      const double p = std::exp(nu * l);
      g += ws[i] * (1.0 / nu + l - p * l);
      h += ws[i] * (-1.0 / (nu * nu) - p * l * l);
    }
    if (curvature) *curvature = h;
    return g;
  };
  if (score(lo, nullptr) <= 0.0) return lo;
  if (score(hi, nullptr) >= 0.0) return hi;
  double a = lo, b = hi;
  double nu = 0.5 * (a + b);
  for (int iter = 0; iter < 200; ++iter) {
    double h = 0.0;
    const double g = score(nu, &h);
    if (g > 0.0) a = nu; else b = nu;
    double next = nu - g / h;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - nu) < 1e-13 * std::max(1.0, nu) || b - a < 1e-14) return next;
    nu = next;
  }
  return nu;
}

}  // namespace detail

/// lambda W(nu1, 0.5) + (1 - lambda) W(nu2, 2) with unknown shapes nu and
/// fixed scales; W(nu, s) has density (nu/s)(y/s)^(nu-1) exp(-(y/s)^nu).
class WeibullMixture2 : public TwoComponentMixture<WeibullMixture2> {
 public:
  static constexpr const char* kName = "weibull2";
  static constexpr const char* kThetaName = "nu";
  static constexpr double kScale[2] = {0.5, 2.0};

  explicit WeibullMixture2(double eta = 0.01, double shape_min = 0.5, double shape_max = 10.0)
      : TwoComponentMixture(eta), shape_min_(shape_min), shape_max_(shape_max) {
    if (!(shape_min > 0.0 && shape_min < shape_max)) {
      throw InvalidArgument("shape box must satisfy 0 < shape_min < shape_max");
    }
  }

  double log_component(std::size_t c, double nu, double y) const {
    if (!(y > 0.0)) return kNegInf;
    const double z = std::log(y / kScale[c]);
    return std::log(nu / kScale[c]) + (nu - 1.0) * z - std::exp(nu * z);
  }

  double draw_component(std::size_t c, double nu, Rng& rng) const { return rng.weibull(nu, kScale[c]); }

  bool theta_admissible(double nu) const { return std::isfinite(nu) && nu > 0.0; }
  std::pair<double, double> theta_bounds() const { return {shape_min_, shape_max_}; }

  /// EM update: lambda in closed form, each shape by a weighted 1-d Weibull
  /// likelihood maximization over the shape box.
  ParamVector em_step(const ParamVector& phi, const Sample& s) const {
    std::vector<double> w1(s.size()), w2(s.size());
    double sum1 = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto h = conditional(phi, s[i]);
      w1[i] = h.first;
      w2[i] = h.second;
      sum1 += h.first;
      sum2 += h.second;
    }
    if (!(sum1 > 0.0) || !(sum2 > 0.0)) {
      throw DegeneracyError("EM step: a component received zero total responsibility");
    }
    return {clamp_lambda(sum1 / static_cast<double>(s.size())),
            detail::weighted_weibull_shape(s.values, w1, kScale[0], shape_min_, shape_max_),
            detail::weighted_weibull_shape(s.values, w2, kScale[1], shape_min_, shape_max_)};
  }

  /// Positive-support interval covering the [1e-13, 1 - 1e-13] quantile range
  /// of every component of every given point, widened to [extra_lo, extra_hi].
  Interval integration_range(std::span<const ParamVector> points, double extra_lo, double extra_hi,
                             double tail = 1e-13) const {
    double lo = extra_lo > 0.0 ? extra_lo : HUGE_VAL;
    double hi = extra_hi;
    for (const auto& p : points) {
      for (std::size_t c = 0; c < 2; ++c) {
        const double nu = p.theta(c);
        lo = std::min(lo, kScale[c] * std::pow(tail, 1.0 / nu));
        hi = std::max(hi, kScale[c] * std::pow(-std::log(tail), 1.0 / nu));
      }
    }
    lo = std::max(lo, 1e-300);
    return Interval::positive(lo, hi);
  }

  Interval integration_range(std::span<const ParamVector> points) const {
    return integration_range(points, HUGE_VAL, -HUGE_VAL);
  }

  /// max over c of the profile log-likelihood of component c alone.
  double single_component_loglik(const Sample& s) const {
    const std::vector<double> ones(s.size(), 1.0);
    double best = kNegInf;
    for (std::size_t c = 0; c < 2; ++c) {
      const double nu = detail::weighted_weibull_shape(s.values, ones, kScale[c], shape_min_, shape_max_);
      double j = 0.0;
      for (double y : s.values) j += log_component(c, nu, y);
      best = std::max(best, j);
    }
    return best;
  }

  ParamVector default_start(const Sample& /*s*/) const {
    return {0.5, std::clamp(1.0, shape_min_, shape_max_), std::clamp(1.5, shape_min_, shape_max_)};
  }

  std::pair<double, double> random_theta(const Sample& /*s*/, Rng& rng) const {
    const double lo = std::max(shape_min_, 0.5), hi = std::min(shape_max_, 3.0);
    return {rng.uniform(lo, hi), rng.uniform(lo, hi)};
  }

  std::pair<double, double> profile_theta_range(const Sample& /*s*/) const {
    return {shape_min_, std::min(shape_max_, 5.0)};
  }

  ParamVector canonicalize(const ParamVector& phi) const { return phi; }

 private:
  double shape_min_;
  double shape_max_;
};

/// Iterate em_step until the largest coordinate change drops below tol.
struct EmFit {
  ParamVector estimate;
  std::size_t iterations = 0;
  bool converged = false;
};

template <class Model>
EmFit em_fit(const Model& model, const Sample& s, ParamVector start, double tol = 1e-10,
             std::size_t max_iter = 5000) {
  EmFit fit{start, 0, false};
  for (std::size_t k = 0; k < max_iter; ++k) {
    const ParamVector next = model.em_step(fit.estimate, s);
    const double change = max_abs_difference(next, fit.estimate);
    fit.estimate = next;
    fit.iterations = k + 1;
    if (change < tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

}  // namespace proxdiv
