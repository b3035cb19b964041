#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxdiv/divergence.hpp"
#include "proxdiv/errors.hpp"
#include "proxdiv/kde.hpp"
#include "proxdiv/models.hpp"
#include "proxdiv/optimizer.hpp"
#include "proxdiv/param.hpp"
#include "proxdiv/quadrature.hpp"

namespace proxdiv {

enum class ObjectiveKind { ClassicalDual, KernelDual, NegLogLikelihood, Mdpd };

inline const char* to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::ClassicalDual: return "classical-dual";
    case ObjectiveKind::KernelDual: return "kernel-dual";
    case ObjectiveKind::NegLogLikelihood: return "neg-loglik";
    case ObjectiveKind::Mdpd: return "mdpd";
  }
  return "unknown";
}

struct ObjectiveConfig {
  QuadratureConfig quadrature;
  /// Optimizer used for the inner supremum over alpha of the classical dual.
  NelderMeadConfig inner{.x_tol = 1e-6, .f_tol = 1e-11, .max_iter = 1000};
  /// Also run the inner maximization from alpha = phi (besides the reference
  /// maximum-likelihood start).
  bool inner_start_at_phi = true;
  /// The kernel-dual integration range extends this many bandwidths beyond
  /// the extreme observations.
  double kernel_pad = 10.0;
};

namespace detail {

inline constexpr double kLogMinRatio = -690.7755278982137;  // log(1e-300)

/// phi'(p/q) p from log p and log q, written per generator so that the ratio
/// itself is never formed (a kernel estimate decays much faster than a
/// Weibull tail). The ratio is floored at 1e-300.
inline double dual_integrand(const DivergenceSpec& spec, double log_p, double log_q) {
  if (std::max(log_p, log_q) < -745.0) return 0.0;
  const double lp = log_q + std::max(log_p - log_q, kLogMinRatio);
  double v = 0.0;
  switch (spec.kind()) {
    case DivergenceSpec::Kind::CressieRead: {
      const double g = spec.gamma();
      v = (std::exp(g * lp - (g - 1.0) * log_q) - std::exp(lp)) / (g - 1.0);
      break;
    }
    case DivergenceSpec::Kind::ModifiedKL: v = std::exp(lp) - std::exp(log_q); break;
    case DivergenceSpec::Kind::KL: v = (lp - log_q) * std::exp(lp); break;
    case DivergenceSpec::Kind::Hellinger: v = 0.5 * (std::exp(lp) - std::exp(0.5 * (lp + log_q))); break;
  }
  if (!std::isfinite(v)) throw EvaluationError("dual integrand is not finite");
  return v;
}

/// phi#(p/q) from log p and log q, with the ratio floored at 1e-300.
inline double dual_sharp(const DivergenceSpec& spec, double log_p, double log_q) {
  const double d = std::max(log_p - log_q, kLogMinRatio);
  double v = 0.0;
  switch (spec.kind()) {
    case DivergenceSpec::Kind::CressieRead: v = std::expm1(spec.gamma() * d) / spec.gamma(); break;
    case DivergenceSpec::Kind::ModifiedKL: v = d; break;
    case DivergenceSpec::Kind::KL: v = std::expm1(d); break;
    case DivergenceSpec::Kind::Hellinger: v = 0.5 * std::expm1(0.5 * d); break;
  }
  if (!std::isfinite(v)) throw EvaluationError("density ratio overflows at an observation");
  return v;
}

}  // namespace detail

/// Integral term minus sample term of the dual representation for a given
/// pair of log-densities (the model p and the reference q).
template <class LogP, class LogQ>
double dual_formula(const DivergenceSpec& spec, LogP&& log_p, LogQ&& log_q, std::span<const double> log_p_at_sample,
                    std::span<const double> log_q_at_sample, const Interval& range, const QuadratureConfig& quad) {
  const auto integral = integrate(
      [&](double x) { return detail::dual_integrand(spec, log_p(x), log_q(x)); }, range, quad);
  double sample_term = 0.0;
  for (std::size_t i = 0; i < log_p_at_sample.size(); ++i) {
    sample_term += detail::dual_sharp(spec, log_p_at_sample[i], log_q_at_sample[i]);
  }
  return integral.value - sample_term / static_cast<double>(log_p_at_sample.size());
}

/// Result of the classical dual: the supremum and where it was attained.
struct DualSupremum {
  double value = 0.0;
  ParamVector alpha;
  std::size_t evaluations = 0;
};

/// An estimation criterion over a two-component mixture, minimized in phi.
///
/// value() is what the proximal algorithm decreases: the classical or kernel
/// dual divergence estimate, the MDPD criterion, or the mean negative
/// log-likelihood -J(phi)/n.
template <class Model>
class Objective {
 public:
  static Objective classical_dual(Model model, Sample sample, DivergenceSpec spec, ObjectiveConfig config = {}) {
    Objective o(ObjectiveKind::ClassicalDual, std::move(model), std::move(sample), config);
    o.spec_ = spec;
    o.alpha_ref_ = em_fit(o.model_, o.sample_, o.model_.project(o.model_.moment_start(o.sample_)), 1e-10, 2000).estimate;
    o.alpha_ref_ = o.model_.project(o.alpha_ref_);
    return o;
  }

  static Objective kernel_dual(Model model, Sample sample, DivergenceSpec spec,
                               std::optional<double> bandwidth = std::nullopt, ObjectiveConfig config = {}) {
    Objective o(ObjectiveKind::KernelDual, std::move(model), std::move(sample), config);
    o.spec_ = spec;
    o.kde_.emplace(o.sample_, bandwidth);
    o.log_kde_at_sample_.reserve(o.sample_.size());
    for (double y : o.sample_.values) o.log_kde_at_sample_.push_back(o.kde_->log_eval(y));
    return o;
  }

  static Objective neg_loglik(Model model, Sample sample, ObjectiveConfig config = {}) {
    return Objective(ObjectiveKind::NegLogLikelihood, std::move(model), std::move(sample), config);
  }

  static Objective mdpd(Model model, Sample sample, double a, ObjectiveConfig config = {}) {
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("MDPD tradeoff a must lie in (0, 1]");
    Objective o(ObjectiveKind::Mdpd, std::move(model), std::move(sample), config);
    o.a_ = a;
    return o;
  }

  ObjectiveKind kind() const noexcept { return kind_; }
  const Model& model() const noexcept { return model_; }
  const Sample& sample() const noexcept { return sample_; }
  const ObjectiveConfig& config() const noexcept { return config_; }
  const std::optional<DivergenceSpec>& divergence() const noexcept { return spec_; }
  const std::optional<KernelDensity>& kernel() const noexcept { return kde_; }
  double mdpd_a() const noexcept { return a_; }
  /// Reference maximum-likelihood point used to start the inner supremum.
  const ParamVector& reference_alpha() const noexcept { return alpha_ref_; }

  /// False when a Cressie-Read kernel dual violates gamma (w^2 - 1) > -1.
  bool window_condition_ok() const {
    if (kind_ != ObjectiveKind::KernelDual) return true;
    return check_window_condition(spec_->gamma(), kde_->bandwidth());
  }

  double operator()(const ParamVector& phi) const { return value(phi); }

  double value(const ParamVector& phi) const {
    switch (kind_) {
      case ObjectiveKind::ClassicalDual: return classical_dual_sup(phi).value;
      case ObjectiveKind::KernelDual: return kernel_dual_value(phi);
      case ObjectiveKind::NegLogLikelihood: return neg_loglik_sum(phi) / static_cast<double>(sample_.size());
      case ObjectiveKind::Mdpd: return mdpd_value(phi, a_);
    }
    return 0.0;
  }

  /// Two-term dual expression at a fixed alpha (no supremum).
  double classical_dual_at(const ParamVector& phi, const ParamVector& alpha) const {
    require(ObjectiveKind::ClassicalDual);
    const auto lp = log_density_at_sample(phi);
    return classical_dual_at(phi, lp, alpha);
  }

  /// sup over alpha of the two-term dual expression. Candidates: alpha = phi
  /// (value 0), a Nelder-Mead run from the reference MLE and, optionally,
  /// one from phi itself.
  DualSupremum classical_dual_sup(const ParamVector& phi) const {
    require(ObjectiveKind::ClassicalDual);
    const auto lp = log_density_at_sample(phi);
    DualSupremum best{classical_dual_at(phi, lp, phi), phi, 1};
    if (!std::isfinite(best.value)) throw EvaluationError("classical dual is not finite at alpha = phi");
    const Box box = model_.bounds();
    auto negated = [&](const ParamVector& alpha) {
      try {
        return -classical_dual_at(phi, lp, alpha);
      } catch (const Error&) {
        return HUGE_VAL;
      }
    };
    std::vector<ParamVector> starts{alpha_ref_};
    if (config_.inner_start_at_phi) starts.push_back(model_.project(phi));
    for (const auto& start : starts) {
      if (!std::isfinite(negated(start))) continue;
      const auto r = minimize(negated, start, box, config_.inner);
      best.evaluations += r.evaluations;
      if (-r.f_min > best.value) {
        best.value = -r.f_min;
        best.alpha = ParamVector(r.argmin);
      }
    }
    return best;
  }

  double kernel_dual_value(const ParamVector& phi) const {
    require(ObjectiveKind::KernelDual);
    const auto lp = log_density_at_sample(phi);
    return kernel_dual_for([&](double x) { return model_.log_density(phi, x); }, lp, {&phi, 1});
  }

  /// Kernel dual formula for an arbitrary (sub-)density given on the log
  /// scale; `support` are parameter points whose components the integration
  /// range must cover.
  template <class LogP>
  double kernel_dual_for(LogP&& log_p, std::span<const double> log_p_at_sample,
                         std::span<const ParamVector> support) const {
    require(ObjectiveKind::KernelDual);
    const double pad = config_.kernel_pad * kde_->bandwidth();
    Interval range = range_for(support, kde_->support_lo() - pad, kde_->support_hi() + pad);
    return dual_formula(
        *spec_, log_p, [&](double x) { return kde_->log_eval(x); }, log_p_at_sample, log_kde_at_sample_, range,
        config_.quadrature);
  }

  double mdpd_value(const ParamVector& phi, double a) const {
    const ParamVector pts[1] = {phi};
    const Interval range = range_for(pts, HUGE_VAL, -HUGE_VAL);
    const auto power = integrate([&](double x) { return std::exp((1.0 + a) * model_.log_density(phi, x)); }, range,
                                 config_.quadrature);
    double s = 0.0;
    for (double y : sample_.values) s += std::exp(a * model_.log_density(phi, y));
    return power.value - (a + 1.0) / a * s / static_cast<double>(sample_.size());
  }

  /// -J(phi) = -sum log p_phi(y_i).
  double neg_loglik_sum(const ParamVector& phi) const {
    double s = 0.0;
    for (double y : sample_.values) {
      const double l = model_.log_density(phi, y);
      if (l == kNegInf) throw DegeneracyError("zero density at observation y=" + std::to_string(y));
      s -= l;
    }
    return s;
  }

  std::vector<double> log_density_at_sample(const ParamVector& phi) const {
    std::vector<double> out;
    out.reserve(sample_.size());
    for (double y : sample_.values) out.push_back(model_.log_density(phi, y));
    return out;
  }

 private:
  Objective(ObjectiveKind kind, Model model, Sample sample, ObjectiveConfig config)
      : kind_(kind), model_(std::move(model)), sample_(std::move(sample)), config_(config) {
    if (sample_.empty()) throw InvalidArgument("objective needs a non-empty sample");
    config_.quadrature.validate();
    config_.inner.validate();
  }

  void require(ObjectiveKind kind) const {
    if (kind_ != kind) {
      throw InvalidArgument(std::string("operation requires a ") + to_string(kind) + " objective, got " +
                            to_string(kind_));
    }
  }

  Interval range_for(std::span<const ParamVector> points, double extra_lo, double extra_hi) const {
    return model_.integration_range(points, extra_lo, extra_hi);
  }

  double classical_dual_at(const ParamVector& phi, std::span<const double> lp, const ParamVector& alpha) const {
    std::vector<double> la;
    la.reserve(sample_.size());
    for (double y : sample_.values) la.push_back(model_.log_density(alpha, y));
    const ParamVector pts[2] = {phi, alpha};
    const Interval range = range_for(pts, HUGE_VAL, -HUGE_VAL);
    return dual_formula(
        *spec_, [&](double x) { return model_.log_density(phi, x); },
        [&](double x) { return model_.log_density(alpha, x); }, lp, la, range, config_.quadrature);
  }

  ObjectiveKind kind_;
  Model model_;
  Sample sample_;
  ObjectiveConfig config_;
  std::optional<DivergenceSpec> spec_;
  std::optional<KernelDensity> kde_;
  std::vector<double> log_kde_at_sample_;
  ParamVector alpha_ref_;
  double a_ = 0.5;
};

template <class Model>
double eval_classical_dual(const Objective<Model>& obj, const ParamVector& phi) {
  return obj.classical_dual_sup(phi).value;
}

template <class Model>
double eval_kernel_dual(const Objective<Model>& obj, const ParamVector& phi) {
  return obj.kernel_dual_value(phi);
}

template <class Model>
double eval_mdpd(const Objective<Model>& obj, const ParamVector& phi, double a) {
  if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("MDPD tradeoff a must lie in (0, 1]");
  return obj.mdpd_value(phi, a);
}

template <class Model>
double eval_neg_loglik(const Objective<Model>& obj, const ParamVector& phi) {
  return obj.neg_loglik_sum(phi);
}

}  // namespace proxdiv
