#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "proxdiv/divergence.hpp"
#include "proxdiv/errors.hpp"
#include "proxdiv/estimators.hpp"
#include "proxdiv/models.hpp"
#include "proxdiv/param.hpp"
#include "proxdiv/proximal.hpp"
#include "proxdiv/quadrature.hpp"
#include "proxdiv/random.hpp"

namespace proxdiv {

namespace detail {

inline std::vector<std::size_t> order_statistics(const Sample& s) {
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  return order;
}

}  // namespace detail

/// Replace the 5 smallest observations by U[-5, -2] draws and the 5 largest
/// by U[2, 5] draws. The sample size is unchanged.
inline Sample contaminate_gaussian(const Sample& s, Rng& rng) {
  if (s.size() < 10) throw InvalidArgument("Gaussian contamination needs n >= 10");
  const auto order = detail::order_statistics(s);
  Sample out = s;
  out.provenance = Provenance::Contaminated;
  for (std::size_t k = 0; k < 5; ++k) out.values[order[k]] = rng.uniform(-5.0, -2.0);
  for (std::size_t k = 0; k < 5; ++k) out.values[order[order.size() - 1 - k]] = rng.uniform(2.0, 5.0);
  return out;
}

/// Add a U[-5, -2] draw to each of the 5 smallest observations and a U[2, 5]
/// draw to each of the 5 largest, pushing them further into the tails.
inline Sample contaminate_gaussian_shift(const Sample& s, Rng& rng) {
  if (s.size() < 10) throw InvalidArgument("Gaussian contamination needs n >= 10");
  const auto order = detail::order_statistics(s);
  Sample out = s;
  out.provenance = Provenance::Contaminated;
  for (std::size_t k = 0; k < 5; ++k) out.values[order[k]] += rng.uniform(-5.0, -2.0);
  for (std::size_t k = 0; k < 5; ++k) out.values[order[order.size() - 1 - k]] += rng.uniform(2.0, 5.0);
  return out;
}

/// Replace 10 indices chosen without replacement by Weibull(0.9, 3) draws.
inline Sample contaminate_weibull(const Sample& s, Rng& rng) {
  if (s.size() < 10) throw InvalidArgument("Weibull contamination needs n >= 10");
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: the first 10 slots end up a uniform 10-subset.
  for (std::size_t k = 0; k < 10; ++k) std::swap(idx[k], idx[k + rng.index(idx.size() - k)]);
  Sample out = s;
  out.provenance = Provenance::Contaminated;
  for (std::size_t k = 0; k < 10; ++k) out.values[idx[k]] = rng.weibull(0.9, 3.0);
  return out;
}

/// Total variation distance 0.5 * int |p_a - p_b|.
template <class Model>
double tvd(const Model& model, const ParamVector& a, const ParamVector& b, const QuadratureConfig& quad = {}) {
  model.validate(a);
  model.validate(b);
  const ParamVector points[] = {a, b};
  const Interval range = model.integration_range(points);
  const auto r = integrate(
      [&](double y) { return std::abs(std::exp(model.log_density(a, y)) - std::exp(model.log_density(b, y))); },
      range, quad);
  return std::clamp(0.5 * r.value, 0.0, 1.0);
}

enum class ModelKind { Gaussian2, Weibull2 };
/// Gaussian replaces the extreme order statistics, GaussianShift moves them
/// outward; see contaminate_gaussian and contaminate_gaussian_shift.
enum class Contamination { None, Gaussian, GaussianShift, Weibull };
enum class EstimatorKind { ClassicalDual, KernelDual, Mdpd, Em };

inline const char* to_string(ModelKind m) { return m == ModelKind::Gaussian2 ? "gaussian2" : "weibull2"; }

inline const char* to_string(Contamination c) {
  switch (c) {
    case Contamination::None: return "none";
    case Contamination::Gaussian: return "gaussian";
    case Contamination::GaussianShift: return "gaussian-shift";
    case Contamination::Weibull: return "weibull";
  }
  return "unknown";
}

inline const char* to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::ClassicalDual: return "classical-dual";
    case EstimatorKind::KernelDual: return "kernel-dual";
    case EstimatorKind::Mdpd: return "mdpd";
    case EstimatorKind::Em: return "em";
  }
  return "unknown";
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::KernelDual;
  DivergenceSpec divergence = DivergenceSpec::hellinger();
  double a = 0.5;
  std::optional<double> bandwidth;

  std::string label() const {
    switch (kind) {
      case EstimatorKind::ClassicalDual: return "classical-" + divergence.name();
      case EstimatorKind::KernelDual: return "kernel-" + divergence.name();
      case EstimatorKind::Mdpd: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "mdpd-%g", a);
        return buf;
      }
      case EstimatorKind::Em: return "em";
    }
    return "unknown";
  }
};

struct ExperimentPlan {
  std::string name;
  ModelKind model = ModelKind::Gaussian2;
  ParamVector truth{0.35, -2.0, 1.5};
  std::size_t n = 100;
  std::size_t replications = 20;
  Contamination contamination = Contamination::None;
  std::vector<EstimatorSpec> estimators;
  std::uint64_t master_seed = 42;
  double eta = 0.01;
  /// Box for the component parameters; the family default when unset.
  std::optional<std::pair<double, double>> theta_box;
  /// Random starts drawn until the likelihood gate accepts one.
  std::size_t max_start_draws = 100;
  /// Documented start used when an estimate ends on the lambda bound.
  std::optional<ParamVector> fallback_start;
  ProximalConfig proximal;
  ObjectiveConfig objective;
  double em_tol = 1e-8;
  std::size_t em_max_iter = 5000;
  std::size_t jobs = 1;

  /// Throws InvalidArgument naming the offending field.
  void validate() const {
    if (replications < 1) throw InvalidArgument("replications: must be >= 1");
    if (n < 2) throw InvalidArgument("n: must be >= 2");
    if (contamination != Contamination::None && n < 10) throw InvalidArgument("n: contamination needs n >= 10");
    if (estimators.empty()) throw InvalidArgument("estimators: list must not be empty");
    if (!(eta > 0.0 && eta < 0.5)) throw InvalidArgument("eta: must lie in (0, 0.5)");
    if (max_start_draws < 1) throw InvalidArgument("max_start_draws: must be >= 1");
    if (jobs < 1) throw InvalidArgument("jobs: must be >= 1");
    if (!(em_tol > 0.0)) throw InvalidArgument("em_tol: must be > 0");
    if (theta_box && !(theta_box->first < theta_box->second)) {
      throw InvalidArgument("theta_box: lower bound must be below upper bound");
    }
    for (const auto& e : estimators) {
      if (e.kind == EstimatorKind::Mdpd && !(e.a > 0.0 && e.a <= 1.0)) {
        throw InvalidArgument("estimators.a: MDPD tradeoff must lie in (0, 1]");
      }
      if (e.bandwidth && !(*e.bandwidth > 0.0)) throw InvalidArgument("estimators.bandwidth: must be > 0");
    }
    try {
      proximal.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("proximal: ") + e.what());
    }
    try {
      objective.quadrature.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("quadrature: ") + e.what());
    }
  }
};

/// Outcome of one estimator on one replication.
struct RunRecord {
  std::size_t replication = 0;
  std::string estimator;
  bool ok = false;
  ParamVector estimate;
  double tvd = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::string stop;
  bool used_fallback = false;
  std::string failure;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
};

/// mean and sample standard deviation; sd is 0 for fewer than two values.
inline Summary summarize(std::span<const double> xs) {
  if (xs.empty()) return {};
  return {mean(xs), xs.size() > 1 ? stddev(xs) : 0.0};
}

struct EstimatorSummary {
  std::string estimator;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::array<Summary, ParamVector::kSize> params{};
  Summary tvd;
};

struct ExperimentReport {
  std::string plan;
  ModelKind model = ModelKind::Gaussian2;
  Contamination contamination = Contamination::None;
  std::size_t n = 0;
  std::size_t replications = 0;
  std::uint64_t master_seed = 0;
  std::vector<EstimatorSummary> summaries;
  /// Sorted by (replication, estimator order in the plan).
  std::vector<RunRecord> records;

  const EstimatorSummary& summary(const std::string& estimator) const {
    for (const auto& s : summaries) {
      if (s.estimator == estimator) return s;
    }
    throw InvalidArgument("no estimator named " + estimator + " in the report");
  }
};

namespace detail {

inline constexpr double kLambdaEdgeTol = 1e-6;

template <class Model>
bool on_lambda_edge(const Model& model, const ParamVector& phi) {
  return phi.lambda() <= model.eta() + kLambdaEdgeTol || phi.lambda() >= 1.0 - model.eta() - kLambdaEdgeTol;
}

template <class Model>
Objective<Model> make_objective(const Model& model, const Sample& s, const EstimatorSpec& e,
                                const ObjectiveConfig& config) {
  switch (e.kind) {
    case EstimatorKind::ClassicalDual: return Objective<Model>::classical_dual(model, s, e.divergence, config);
    case EstimatorKind::KernelDual: return Objective<Model>::kernel_dual(model, s, e.divergence, e.bandwidth, config);
    case EstimatorKind::Mdpd: return Objective<Model>::mdpd(model, s, e.a, config);
    case EstimatorKind::Em: break;
  }
  throw InvalidArgument("EM has no objective");
}

struct Fit {
  ParamVector estimate;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::string stop;
};

template <class Model>
Fit fit_once(const Model& model, const Sample& s, const EstimatorSpec& e, const ParamVector& start,
             const ExperimentPlan& plan) {
  if (e.kind == EstimatorKind::Em) {
    const auto em = em_fit(model, s, start, plan.em_tol, plan.em_max_iter);
    return {em.estimate, -model.log_likelihood(em.estimate, s.values) / static_cast<double>(s.size()),
            em.iterations, em.converged ? "converged" : "max-iterations"};
  }
  const auto objective = make_objective(model, s, e, plan.objective);
  const auto trace = run(objective, start, plan.proximal);
  return {trace.last().phi, trace.last().objective, trace.iterations(), to_string(trace.stop)};
}

/// Draw random starts until one passes the likelihood gate.
template <class Model>
std::optional<ParamVector> draw_start(const Model& model, const Sample& s, Rng& rng, std::size_t max_draws) {
  for (std::size_t d = 0; d < max_draws; ++d) {
    const ParamVector phi0 = model.project(model.random_start(s, rng));
    if (check_init_likelihood(model, phi0, s)) return phi0;
  }
  return std::nullopt;
}

template <class Model>
std::vector<RunRecord> run_replication(const Model& model, const ExperimentPlan& plan, std::size_t r) {
  Rng rng(derive_seed(plan.master_seed, r));
  Sample s = model.sample(plan.truth, plan.n, rng);
  if (plan.contamination == Contamination::Gaussian) s = contaminate_gaussian(s, rng);
  if (plan.contamination == Contamination::GaussianShift) s = contaminate_gaussian_shift(s, rng);
  if (plan.contamination == Contamination::Weibull) s = contaminate_weibull(s, rng);

  std::vector<RunRecord> out;
  const auto start = draw_start(model, s, rng, plan.max_start_draws);
  for (const auto& e : plan.estimators) {
    RunRecord rec;
    rec.replication = r;
    rec.estimator = e.label();
    try {
      if (!start) {
        throw EvaluationError("no random start passed the likelihood gate after " +
                              std::to_string(plan.max_start_draws) + " draws");
      }
      Fit fit = fit_once(model, s, e, *start, plan);
      if (on_lambda_edge(model, fit.estimate) && plan.fallback_start) {
        fit = fit_once(model, s, e, model.project(*plan.fallback_start), plan);
        rec.used_fallback = true;
      }
      rec.estimate = model.canonicalize(fit.estimate);
      rec.objective = fit.objective;
      rec.iterations = fit.iterations;
      rec.stop = fit.stop;
      rec.tvd = tvd(model, rec.estimate, plan.truth, plan.objective.quadrature);
      rec.ok = true;
    } catch (const Error& err) {
      rec.ok = false;
      rec.failure = err.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

template <class Model>
ExperimentReport run_experiment_for(const Model& model, const ExperimentPlan& plan,
                                    const std::function<void(std::size_t, std::size_t)>& progress) {
  model.validate(plan.truth);
  std::vector<std::vector<RunRecord>> per_rep(plan.replications);
  std::atomic<std::size_t> next{0}, done{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < plan.replications;) {
      per_rep[r] = run_replication(model, plan, r);
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) progress(d, plan.replications);
    }
  };
  const std::size_t jobs = std::min(plan.jobs, plan.replications);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  ExperimentReport report;
  report.plan = plan.name;
  report.model = plan.model;
  report.contamination = plan.contamination;
  report.n = plan.n;
  report.replications = plan.replications;
  report.master_seed = plan.master_seed;
  for (auto& rep : per_rep) {
    for (auto& rec : rep) report.records.push_back(std::move(rec));
  }
  for (const auto& e : plan.estimators) {
    EstimatorSummary sum;
    sum.estimator = e.label();
    std::array<std::vector<double>, ParamVector::kSize> params;
    std::vector<double> tvds;
    for (const auto& rec : report.records) {
      if (rec.estimator != sum.estimator) continue;
      if (!rec.ok) {
        ++sum.failed;
        continue;
      }
      ++sum.succeeded;
      for (std::size_t c = 0; c < ParamVector::kSize; ++c) params[c].push_back(rec.estimate[c]);
      tvds.push_back(rec.tvd);
    }
    if (sum.succeeded == 0) {
      throw EvaluationError("estimator " + sum.estimator + " failed on every replication");
    }
    for (std::size_t c = 0; c < ParamVector::kSize; ++c) sum.params[c] = summarize(params[c]);
    sum.tvd = summarize(tvds);
    report.summaries.push_back(std::move(sum));
  }
  return report;
}

}  // namespace detail

/// Run every replication of the plan. Replication r uses the child seed
/// derive_seed(master_seed, r) for sampling, contamination and its random
/// start, so the report does not depend on the number of worker threads.
/// `progress` is called after each finished replication.
inline ExperimentReport run_experiment(const ExperimentPlan& plan,
                                       const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  plan.validate();
  if (plan.model == ModelKind::Gaussian2) {
    const auto box = plan.theta_box.value_or(std::pair{-10.0, 10.0});
    return detail::run_experiment_for(GaussianMixture2(plan.eta, box.first, box.second), plan, progress);
  }
  const auto box = plan.theta_box.value_or(std::pair{0.5, 10.0});
  return detail::run_experiment_for(WeibullMixture2(plan.eta, box.first, box.second), plan, progress);
}

}  // namespace proxdiv
