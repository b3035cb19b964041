#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "proxdiv/errors.hpp"
#include "proxdiv/param.hpp"
#include "proxdiv/proximal.hpp"
#include "proxdiv/simulation.hpp"

namespace proxdiv {

using Json = nlohmann::json;

/// Fixed-width formatting used by every CSV writer: 6 significant digits.
inline std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// One number per line; blank lines and anything after '#' are ignored.
/// Throws ParseError carrying the 1-based line number.
inline Sample parse_sample(std::istream& in, std::size_t min_size = 2) {
  Sample s;
  s.provenance = Provenance::External;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": not a number: '" + token + "'", lineno);
    }
    if (used != token.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": trailing characters in '" + token + "'", lineno);
    }
    if (!std::isfinite(v)) throw ParseError("line " + std::to_string(lineno) + ": value is not finite", lineno);
    s.values.push_back(v);
  }
  if (s.size() < min_size) {
    throw ParseError("expected at least " + std::to_string(min_size) + " observations, found " +
                         std::to_string(s.size()),
                     lineno);
  }
  return s;
}

inline Sample read_sample(const std::string& path, std::size_t min_size = 2) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file '" + path + "'", 0);
  return parse_sample(in, min_size);
}

inline void write_sample(std::ostream& out, const Sample& s) {
  char buf[40];
  for (double y : s.values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", y);
    out << buf;
  }
}

// ---- traces -----------------------------------------------------------

inline void write_trace_csv(std::ostream& out, const ProximalTrace& trace, std::string_view theta_name) {
  out << "k,lambda," << theta_name << "1," << theta_name << "2,objective,log1p_objective,dpsi,step_norm\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << fmt6(r.phi[0]) << ',' << fmt6(r.phi[1]) << ',' << fmt6(r.phi[2]) << ','
        << fmt6(r.objective) << ',' << fmt6(std::log1p(r.objective)) << ',' << fmt6(r.dpsi) << ','
        << fmt6(r.step_norm) << '\n';
  }
}

inline Json trace_to_json(const ProximalTrace& trace) {
  Json rows = Json::array();
  for (const auto& r : trace.records) {
    rows.push_back({{"k", r.k},
                    {"phi", {r.phi[0], r.phi[1], r.phi[2]}},
                    {"objective", r.objective},
                    {"log1p_objective", std::log1p(r.objective)},
                    {"dpsi", r.dpsi},
                    {"step_norm", r.step_norm},
                    {"monotone_ok", r.monotone_ok}});
  }
  return {{"stop", to_string(trace.stop)}, {"evaluations", trace.evaluations}, {"records", rows}};
}

// ---- reports ----------------------------------------------------------

inline const char* theta_name(ModelKind m) { return m == ModelKind::Gaussian2 ? "mu" : "nu"; }

/// One row per estimator: mean and sd of every parameter, then of the TVD.
inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  const std::string t = theta_name(report.model);
  out << "estimator,succeeded,failed,lambda,lambda_sd," << t << "1," << t << "1_sd," << t << "2," << t
      << "2_sd,tvd,tvd_sd\n";
  for (const auto& s : report.summaries) {
    out << s.estimator << ',' << s.succeeded << ',' << s.failed;
    for (const auto& p : s.params) out << ',' << fmt6(p.mean) << ',' << fmt6(p.sd);
    out << ',' << fmt6(s.tvd.mean) << ',' << fmt6(s.tvd.sd) << '\n';
  }
}

inline Json report_to_json(const ExperimentReport& report) {
  Json summaries = Json::array();
  for (const auto& s : report.summaries) {
    Json params = Json::array();
    for (const auto& p : s.params) params.push_back({{"mean", p.mean}, {"sd", p.sd}});
    summaries.push_back({{"estimator", s.estimator},
                         {"succeeded", s.succeeded},
                         {"failed", s.failed},
                         {"params", params},
                         {"tvd", {{"mean", s.tvd.mean}, {"sd", s.tvd.sd}}}});
  }
  Json records = Json::array();
  for (const auto& r : report.records) {
    Json rec = {{"replication", r.replication}, {"estimator", r.estimator}, {"ok", r.ok}};
    if (r.ok) {
      rec["estimate"] = {r.estimate[0], r.estimate[1], r.estimate[2]};
      rec["tvd"] = r.tvd;
      rec["objective"] = r.objective;
      rec["iterations"] = r.iterations;
      rec["stop"] = r.stop;
      rec["used_fallback"] = r.used_fallback;
    } else {
      rec["failure"] = r.failure;
    }
    records.push_back(std::move(rec));
  }
  return {{"plan", report.plan},
          {"model", to_string(report.model)},
          {"contamination", to_string(report.contamination)},
          {"n", report.n},
          {"replications", report.replications},
          {"seed", report.master_seed},
          {"summaries", summaries},
          {"records", records}};
}

namespace detail {

[[noreturn]] inline void field_error(const std::string& field, const std::string& what) {
  throw InvalidArgument(field + ": " + what);
}

inline const Json& require_field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) field_error(path + key, "missing");
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    field_error(field, "has the wrong type");
  }
}

inline ParamVector param_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != ParamVector::kSize) field_error(field, "must be an array of 3 numbers");
  std::array<double, ParamVector::kSize> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = get_as<double>(j[i], field);
  return ParamVector(v);
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const std::string& path) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) field_error(path + key, "unknown field");
  }
}

}  // namespace detail

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "gaussian2") return ModelKind::Gaussian2;
  if (s == "weibull2") return ModelKind::Weibull2;
  throw InvalidArgument("unknown model '" + std::string(s) + "' (expected gaussian2 or weibull2)");
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  if (s == "classical-dual") return EstimatorKind::ClassicalDual;
  if (s == "kernel-dual") return EstimatorKind::KernelDual;
  if (s == "mdpd") return EstimatorKind::Mdpd;
  if (s == "em") return EstimatorKind::Em;
  throw InvalidArgument("unknown estimator '" + std::string(s) + "'");
}

inline Contamination parse_contamination(std::string_view s) {
  if (s == "none") return Contamination::None;
  if (s == "gaussian") return Contamination::Gaussian;
  if (s == "gaussian-shift") return Contamination::GaussianShift;
  if (s == "weibull") return Contamination::Weibull;
  throw InvalidArgument("unknown contamination '" + std::string(s) + "'");
}

/// Build a plan from its JSON form. Structural problems raise
/// InvalidArgument naming the offending field; the result is validated.
inline ExperimentPlan plan_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) field_error("plan", "must be a JSON object");
  reject_unknown(j,
                 {"name", "model", "truth", "n", "replications", "contamination", "seed", "eta", "theta_box",
                  "max_start_draws", "fallback_start", "estimators", "proximal", "quadrature", "em", "jobs"},
                 "");
  ExperimentPlan p;
  if (j.contains("name")) p.name = get_as<std::string>(j["name"], "name");
  try {
    p.model = parse_model_kind(get_as<std::string>(require_field(j, "model", ""), "model"));
  } catch (const InvalidArgument& e) {
    field_error("model", e.what());
  }
  p.truth = param_from_json(require_field(j, "truth", ""), "truth");
  p.n = get_as<std::size_t>(require_field(j, "n", ""), "n");
  p.replications = get_as<std::size_t>(require_field(j, "replications", ""), "replications");
  if (j.contains("contamination")) {
    try {
      p.contamination = parse_contamination(get_as<std::string>(j["contamination"], "contamination"));
    } catch (const InvalidArgument& e) {
      field_error("contamination", e.what());
    }
  }
  if (j.contains("seed")) p.master_seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("eta")) p.eta = get_as<double>(j["eta"], "eta");
  if (j.contains("theta_box")) {
    const auto& b = j["theta_box"];
    if (!b.is_array() || b.size() != 2) field_error("theta_box", "must be an array [lower, upper]");
    p.theta_box = std::pair{get_as<double>(b[0], "theta_box"), get_as<double>(b[1], "theta_box")};
  }
  if (j.contains("max_start_draws")) p.max_start_draws = get_as<std::size_t>(j["max_start_draws"], "max_start_draws");
  if (j.contains("fallback_start")) p.fallback_start = param_from_json(j["fallback_start"], "fallback_start");
  if (j.contains("jobs")) p.jobs = get_as<std::size_t>(j["jobs"], "jobs");

  const auto& est = require_field(j, "estimators", "");
  if (!est.is_array()) field_error("estimators", "must be an array");
  for (std::size_t i = 0; i < est.size(); ++i) {
    const std::string path = "estimators[" + std::to_string(i) + "].";
    const auto& e = est[i];
    if (!e.is_object()) field_error(path.substr(0, path.size() - 1), "must be an object");
    reject_unknown(e, {"kind", "divergence", "a", "bandwidth"}, path);
    EstimatorSpec spec;
    try {
      spec.kind = parse_estimator_kind(get_as<std::string>(require_field(e, "kind", path), path + "kind"));
    } catch (const InvalidArgument& ex) {
      field_error(path + "kind", ex.what());
    }
    if (e.contains("divergence")) {
      try {
        spec.divergence = DivergenceSpec::parse(get_as<std::string>(e["divergence"], path + "divergence"));
      } catch (const Error& ex) {
        field_error(path + "divergence", ex.what());
      }
    }
    if (e.contains("a")) spec.a = get_as<double>(e["a"], path + "a");
    if (e.contains("bandwidth") && !e["bandwidth"].is_null()) {
      spec.bandwidth = get_as<double>(e["bandwidth"], path + "bandwidth");
    }
    p.estimators.push_back(spec);
  }

  if (j.contains("proximal")) {
    const auto& q = j["proximal"];
    reject_unknown(q,
                   {"psi", "beta0", "decreasing_beta", "accept", "max_iter", "eps_objective", "eps_step", "patience",
                    "x_tol", "f_tol", "optimizer_max_iter"},
                   "proximal.");
    auto& c = p.proximal;
    if (q.contains("psi")) {
      try {
        c.psi = ProximalGenerator::parse(get_as<std::string>(q["psi"], "proximal.psi"));
      } catch (const Error& ex) {
        field_error("proximal.psi", ex.what());
      }
    }
    if (q.contains("beta0")) c.beta0 = get_as<double>(q["beta0"], "proximal.beta0");
    if (q.contains("decreasing_beta")) c.decreasing_beta = get_as<bool>(q["decreasing_beta"], "proximal.decreasing_beta");
    if (q.contains("accept")) {
      const auto a = get_as<std::string>(q["accept"], "proximal.accept");
      if (a == "local-decrease") c.accept = AcceptRule::LocalDecrease;
      else if (a == "full-arginf") c.accept = AcceptRule::FullArginf;
      else field_error("proximal.accept", "expected local-decrease or full-arginf");
    }
    if (q.contains("max_iter")) c.max_iter = get_as<std::size_t>(q["max_iter"], "proximal.max_iter");
    if (q.contains("eps_objective")) c.eps_objective = get_as<double>(q["eps_objective"], "proximal.eps_objective");
    if (q.contains("eps_step")) c.eps_step = get_as<double>(q["eps_step"], "proximal.eps_step");
    if (q.contains("patience")) c.patience = get_as<std::size_t>(q["patience"], "proximal.patience");
    if (q.contains("x_tol")) c.optimizer.x_tol = get_as<double>(q["x_tol"], "proximal.x_tol");
    if (q.contains("f_tol")) c.optimizer.f_tol = get_as<double>(q["f_tol"], "proximal.f_tol");
    if (q.contains("optimizer_max_iter")) {
      c.optimizer.max_iter = get_as<std::size_t>(q["optimizer_max_iter"], "proximal.optimizer_max_iter");
    }
  }
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    reject_unknown(q, {"abs_tol", "rel_tol", "max_subdivisions", "fallback_order"}, "quadrature.");
    auto& c = p.objective.quadrature;
    if (q.contains("abs_tol")) c.abs_tol = get_as<double>(q["abs_tol"], "quadrature.abs_tol");
    if (q.contains("rel_tol")) c.rel_tol = get_as<double>(q["rel_tol"], "quadrature.rel_tol");
    if (q.contains("max_subdivisions")) {
      c.max_subdivisions = get_as<std::size_t>(q["max_subdivisions"], "quadrature.max_subdivisions");
    }
    if (q.contains("fallback_order")) c.fallback_order = get_as<std::size_t>(q["fallback_order"], "quadrature.fallback_order");
  }
  if (j.contains("em")) {
    const auto& q = j["em"];
    reject_unknown(q, {"tol", "max_iter"}, "em.");
    if (q.contains("tol")) p.em_tol = get_as<double>(q["tol"], "em.tol");
    if (q.contains("max_iter")) p.em_max_iter = get_as<std::size_t>(q["max_iter"], "em.max_iter");
  }
  p.validate();
  return p;
}

/// Read a plan file. Malformed JSON raises ParseError (with the line);
/// semantic problems raise InvalidArgument naming the field.
inline ExperimentPlan read_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plan file '" + path + "'", 0);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("plan file '") + path + "': " + e.what(), 0);
  }
  return plan_from_json(j);
}

/// Check that a JSON document has the shape written by report_to_json.
/// Throws InvalidArgument naming the first offending field.
inline void validate_report_json(const Json& j) {
  using namespace detail;
  for (const char* key : {"plan", "model", "contamination", "n", "replications", "seed", "summaries", "records"}) {
    require_field(j, key, "");
  }
  parse_model_kind(get_as<std::string>(j["model"], "model"));
  parse_contamination(get_as<std::string>(j["contamination"], "contamination"));
  if (!j["summaries"].is_array() || j["summaries"].empty()) field_error("summaries", "must be a non-empty array");
  for (const auto& s : j["summaries"]) {
    get_as<std::string>(require_field(s, "estimator", "summaries[]."), "summaries[].estimator");
    const auto& params = require_field(s, "params", "summaries[].");
    if (!params.is_array() || params.size() != ParamVector::kSize) field_error("summaries[].params", "needs 3 entries");
    for (const auto& p : params) {
      if (get_as<double>(require_field(p, "sd", "summaries[].params[]."), "summaries[].params[].sd") < 0.0) {
        field_error("summaries[].params[].sd", "must be >= 0");
      }
    }
    const double t = get_as<double>(require_field(require_field(s, "tvd", "summaries[]."), "mean", "summaries[].tvd."),
                                    "summaries[].tvd.mean");
    if (!(t >= 0.0 && t <= 1.0)) field_error("summaries[].tvd.mean", "must lie in [0, 1]");
  }
  if (!j["records"].is_array()) field_error("records", "must be an array");
  for (const auto& r : j["records"]) {
    get_as<std::size_t>(require_field(r, "replication", "records[]."), "records[].replication");
    if (get_as<bool>(require_field(r, "ok", "records[]."), "records[].ok")) {
      param_from_json(require_field(r, "estimate", "records[]."), "records[].estimate");
      const double t = get_as<double>(require_field(r, "tvd", "records[]."), "records[].tvd");
      if (!(t >= 0.0 && t <= 1.0)) field_error("records[].tvd", "must lie in [0, 1]");
    }
  }
}

}  // namespace proxdiv
