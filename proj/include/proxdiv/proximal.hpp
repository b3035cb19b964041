#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxdiv/divergence.hpp"
#include "proxdiv/errors.hpp"
#include "proxdiv/estimators.hpp"
#include "proxdiv/models.hpp"
#include "proxdiv/optimizer.hpp"
#include "proxdiv/param.hpp"

namespace proxdiv {

/// Proximal penalty
///   D_psi(phi, phi') = (1/n) sum_i sum_{x in {1,2}} psi(h_i(x|phi) / h_i(x|phi')) h_i(x|phi').
/// Ratios are formed on the log scale so that responsibilities close to 0
/// do not lose precision.
template <class Model>
double d_psi(const Model& model, const ParamVector& phi, const ParamVector& phi_prime, const Sample& sample,
             const ProximalGenerator& psi) {
  if (sample.empty()) throw InvalidArgument("D_psi needs a non-empty sample");
  double total = 0.0;
  for (double y : sample.values) {
    const auto lh = model.log_conditional(phi, y);
    const auto lh_prev = model.log_conditional(phi_prime, y);
    if (lh_prev.first == kNegInf || lh_prev.second == kNegInf) {
      throw DegeneracyError("D_psi: reference responsibility vanishes at y=" + std::to_string(y));
    }
    total += psi(std::exp(lh.first - lh_prev.first)) * std::exp(lh_prev.first);
    total += psi(std::exp(lh.second - lh_prev.second)) * std::exp(lh_prev.second);
  }
  return total / static_cast<double>(sample.size());
}

enum class AcceptRule {
  /// Take the best of a run from phi^k and one perturbed restart.
  FullArginf,
  /// Accept a local minimizer only if it does not increase the objective;
  /// otherwise stop with phi^{k+1} = phi^k.
  LocalDecrease,
};

enum class StopReason { ObjectiveConverged, StepConverged, Stationary, NoDecrease, MaxIterations };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::ObjectiveConverged: return "objective-converged";
    case StopReason::StepConverged: return "step-converged";
    case StopReason::Stationary: return "stationary";
    case StopReason::NoDecrease: return "no-decrease";
    case StopReason::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

struct ProximalConfig {
  ProximalGenerator psi;
  /// beta_k = beta0 for a constant schedule, beta0 / (k + 1) when decreasing.
  double beta0 = 1.0;
  bool decreasing_beta = false;
  AcceptRule accept = AcceptRule::LocalDecrease;
  std::size_t max_iter = 500;
  double eps_objective = 1e-8;
  double eps_step = 1e-6;
  /// Number of consecutive objective changes below eps_objective required
  /// before stopping.
  std::size_t patience = 1;
  NelderMeadConfig optimizer;

  double beta(std::size_t k) const { return decreasing_beta ? beta0 / static_cast<double>(k + 1) : beta0; }

  void validate() const {
    if (!(beta0 >= 0.0) || !std::isfinite(beta0)) throw InvalidArgument("beta0 must be finite and >= 0");
    if (!(eps_objective > 0.0) || !(eps_step > 0.0)) throw InvalidArgument("stopping tolerances must be > 0");
    if (max_iter == 0 || patience == 0) throw InvalidArgument("max_iter and patience must be >= 1");
    optimizer.validate();
  }
};

/// One row of a proximal trace. dpsi and step_norm relate phi^k to phi^{k-1}
/// and are 0 on the first row.
struct TraceRecord {
  std::size_t k = 0;
  ParamVector phi;
  double objective = 0.0;
  double dpsi = 0.0;
  double step_norm = 0.0;
  /// objective(phi^k) <= objective(phi^{k-1}) + 1e-10.
  bool monotone_ok = true;
};

struct ProximalTrace {
  std::vector<TraceRecord> records;
  StopReason stop = StopReason::MaxIterations;
  std::size_t evaluations = 0;

  const TraceRecord& last() const { return records.back(); }
  std::size_t iterations() const { return records.empty() ? 0 : records.size() - 1; }

  bool monotone() const {
    return std::all_of(records.begin(), records.end(), [](const TraceRecord& r) { return r.monotone_ok; });
  }
  /// Every iterate stays in the sublevel set of the start.
  bool within_initial_level_set() const {
    return std::all_of(records.begin(), records.end(),
                       [&](const TraceRecord& r) { return r.objective <= records.front().objective; });
  }
};

inline constexpr double kMonotoneSlack = 1e-10;

struct StepResult {
  ParamVector next;
  double objective = 0.0;
  double dpsi = 0.0;
  bool accepted = true;
  std::size_t evaluations = 0;
};

/// One proximal iteration phi^{k+1} = arginf objective(phi) + beta_k D_psi(phi, phi^k).
/// `objective_at_current` is objective(phi^k), already known to the caller.
template <class Model>
StepResult proximal_step(const Objective<Model>& objective, const ParamVector& current, double objective_at_current,
                         std::size_t k, const ProximalConfig& config) {
  const auto& model = objective.model();
  const auto& sample = objective.sample();
  const double beta = config.beta(k);
  auto penalized = [&](const ParamVector& phi) {
    try {
      const double value = objective(phi);
      return beta == 0.0 ? value : value + beta * d_psi(model, phi, current, sample, config.psi);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const Box box = model.bounds();
  MinimizeResult best;
  try {
    best = minimize(penalized, current, box, config.optimizer);
  } catch (const OptimizerError& e) {
    throw OptimizerError(std::string("proximal step ") + std::to_string(k) + ": " + e.what());
  }
  std::size_t evaluations = best.evaluations;
  if (config.accept == AcceptRule::FullArginf) {
    ParamVector restart = current;
    restart[0] = current.lambda() + (current.lambda() < 0.5 ? 0.05 : -0.05);
    for (std::size_t c = 1; c < ParamVector::kSize; ++c) restart[c] += 0.1 * std::max(1.0, std::abs(current[c]));
    restart = model.project(restart);
    if (std::isfinite(penalized(restart))) {
      const auto other = minimize(penalized, restart, box, config.optimizer);
      evaluations += other.evaluations;
      if (other.f_min < best.f_min) best = other;
    }
  }
  StepResult step;
  step.next = ParamVector(best.argmin);
  step.evaluations = evaluations;
  if (step.next == current) {
    step.objective = objective_at_current;
    return step;
  }
  step.objective = objective(step.next);
  step.dpsi = d_psi(model, step.next, current, sample, config.psi);
  if (!(step.objective <= objective_at_current)) {
    // The penalized minimum cannot exceed its value at phi^k, so this only
    // happens through round-off in the penalty; keep the current point.
    step.accepted = false;
    step.next = current;
    step.objective = objective_at_current;
    step.dpsi = 0.0;
  }
  return step;
}

/// Run the proximal iteration from phi0 until a stopping rule fires.
template <class Model>
ProximalTrace run(const Objective<Model>& objective, const ParamVector& phi0, const ProximalConfig& config = {}) {
  config.validate();
  objective.model().validate(phi0);
  ProximalTrace trace;
  TraceRecord first;
  first.phi = phi0;
  try {
    first.objective = objective(phi0);
  } catch (const Error& e) {
    throw EvaluationError(std::string("objective cannot be evaluated at the start: ") + e.what());
  }
  if (!std::isfinite(first.objective)) throw EvaluationError("objective is not finite at the start");
  trace.records.push_back(first);

  std::size_t quiet = 0;
  for (std::size_t k = 0;; ++k) {
    const TraceRecord& cur = trace.records.back();
    StepResult step;
    try {
      step = proximal_step(objective, cur.phi, cur.objective, k, config);
    } catch (const Error& e) {
      throw EvaluationError("iteration " + std::to_string(k) + ": " + e.what());
    }
    trace.evaluations += step.evaluations;
    if (!step.accepted) {
      trace.stop = StopReason::NoDecrease;
      break;
    }
    const double change = cur.objective - step.objective;
    const double norm = distance(step.next, cur.phi);
    if (norm < config.eps_step && std::abs(change) < config.eps_objective) {
      trace.stop = StopReason::Stationary;
      break;
    }
    TraceRecord rec;
    rec.k = k + 1;
    rec.phi = step.next;
    rec.objective = step.objective;
    rec.dpsi = step.dpsi;
    rec.step_norm = norm;
    rec.monotone_ok = step.objective <= cur.objective + kMonotoneSlack;
    trace.records.push_back(rec);

    quiet = std::abs(change) < config.eps_objective ? quiet + 1 : 0;
    if (quiet >= config.patience) {
      trace.stop = StopReason::ObjectiveConverged;
      break;
    }
    if (norm < config.eps_step) {
      trace.stop = StopReason::StepConverged;
      break;
    }
    if (k + 1 >= config.max_iter) {
      trace.stop = StopReason::MaxIterations;
      break;
    }
  }
  return trace;
}

/// Outcome of an initialization check: accepted iff value compares
/// favourably with threshold.
struct InitCheck {
  bool accepted = false;
  double value = 0.0;
  double threshold = 0.0;
  explicit operator bool() const noexcept { return accepted; }
};

/// J(phi0) > max[J(0, inf, ybar), J(1, ybar, inf)]: the start must beat the
/// best single-component fit, which keeps the likelihood sublevel set bounded.
template <class Model>
InitCheck check_init_likelihood_detail(const Model& model, const ParamVector& phi0, const Sample& sample) {
  InitCheck check;
  check.threshold = model.single_component_loglik(sample);
  check.value = model.log_likelihood(phi0, sample.values);
  check.accepted = std::isfinite(check.value) && check.value > check.threshold;
  return check;
}

template <class Model>
bool check_init_likelihood(const Model& model, const ParamVector& phi0, const Sample& sample) {
  return check_init_likelihood_detail(model, phi0, sample).accepted;
}

struct KernelInitCheck {
  bool accepted = false;
  double value = 0.0;
  /// Limit of the kernel dual when every component is sent to infinity:
  /// phi(0) + lim phi(t)/t.
  double all_components_limit = 0.0;
  /// inf over (weight, theta) with one component sent to infinity.
  double profile_inf = 0.0;
  double threshold = 0.0;
  explicit operator bool() const noexcept { return accepted; }
};

/// Kernel-dual analogue of the likelihood gate: the start must have a lower
/// estimated divergence than every configuration in which a component
/// escapes to infinity. The one-component profile infimum is computed
/// numerically (grid, then Nelder-Mead over weight and theta).
template <class Model>
KernelInitCheck check_init_kernel_dual(const Objective<Model>& objective, const ParamVector& phi0) {
  if (objective.kind() != ObjectiveKind::KernelDual) {
    throw InvalidArgument("check_init_kernel_dual needs a kernel-dual objective");
  }
  const auto& model = objective.model();
  const auto& sample = objective.sample();
  KernelInitCheck check;
  check.value = objective(phi0);
  const DivergenceSpec& spec = *objective.divergence();
  check.all_components_limit = spec.singular_limit();
  const double escaped_slope = spec.slope_at_infinity();

  const Box box = model.bounds();
  auto single = [&](std::size_t comp, double weight, double theta) {
    const double log_w = std::log(weight);
    auto log_p = [&](double x) { return log_w + model.log_component(comp, theta, x); };
    std::vector<double> lp;
    lp.reserve(sample.size());
    for (double y : sample.values) lp.push_back(log_p(y));
    const ParamVector support(0.5, theta, theta);
    // The escaped component carries mass 1 - weight where the kernel estimate
    // vanishes, which adds (1 - weight) lim phi(t)/t to the integral term.
    return objective.kernel_dual_for(log_p, lp, {&support, 1}) + (1.0 - weight) * escaped_slope;
  };

  check.profile_inf = std::numeric_limits<double>::infinity();
  const double t_lo = box.lower[1], t_hi = box.upper[1];
  const auto [g_lo, g_hi] = model.profile_theta_range(sample);
  constexpr int kThetaGrid = 9;
  const double weights[] = {model.eta(), 0.2, 0.4, 0.6, 0.8, 1.0 - model.eta()};
  for (std::size_t comp = 0; comp < 2; ++comp) {
    double best = std::numeric_limits<double>::infinity();
    ParamVector best_start(0.5, 0.5 * (g_lo + g_hi), 0.0);
    for (double w : weights) {
      for (int i = 0; i < kThetaGrid; ++i) {
        const double theta = g_lo + (g_hi - g_lo) * i / (kThetaGrid - 1);
        double v;
        try {
          v = single(comp, w, theta);
        } catch (const Error&) {
          continue;
        }
        if (v < best) {
          best = v;
          best_start = ParamVector(w, theta, 0.0);
        }
      }
    }
    if (!std::isfinite(best)) continue;
    const Box sub{{box.lower[0], t_lo}, {box.upper[0], t_hi}};
    const std::vector<double> start{best_start[0], best_start[1]};
    const auto r = minimize(
        [&](std::span<const double> x) {
          try {
            return single(comp, x[0], x[1]);
          } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
          }
        },
        start, sub, NelderMeadConfig{.x_tol = 1e-6, .f_tol = 1e-10, .max_iter = 500});
    check.profile_inf = std::min({check.profile_inf, best, r.f_min});
  }
  // Both bounds are infinite when phi is superlinear or unbounded at zero;
  // escaping components are then never competitive.
  check.threshold = std::min(check.all_components_limit, check.profile_inf);
  check.accepted = std::isfinite(check.value) && check.value < check.threshold;
  return check;
}

}  // namespace proxdiv
