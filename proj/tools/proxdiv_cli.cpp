// proxdiv command-line front end.
//
//   proxdiv estimate --data FILE [options]   fit a two-component mixture
//   proxdiv trace    --data FILE [options]   per-iteration proximal trace
//   proxdiv simulate --plan FILE [options]   run a Monte Carlo plan
//   proxdiv check-report FILE                validate a JSON report
//
// Exit codes: 0 success, 1 usage error, 2 input parse error,
// 3 estimation failure, 4 plan or report validation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "proxdiv/io.hpp"
#include "proxdiv/kde.hpp"
#include "proxdiv/proxdiv.hpp"

namespace {

using namespace proxdiv;

enum Exit : int { kOk = 0, kUsage = 1, kParse = 2, kEstimation = 3, kValidation = 4 };

struct FitOptions {
  std::string data;
  std::string model = "gaussian2";
  std::string estimator = "kernel-dual";
  std::string divergence = "hellinger";
  std::optional<double> gamma;
  double a = 0.5;
  double eta = 0.01;
  std::optional<double> bandwidth;
  std::vector<double> theta_box;
  std::vector<double> start;
  std::uint64_t seed = 42;
  std::string psi = "hellinger";
  std::size_t max_iter = 500;
  double eps_objective = 1e-8;
  double eps_step = 1e-6;
  double x_tol = 1e-8;
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  bool check_init = false;
  std::string format = "csv";
  std::string out;
};

struct SimulateOptions {
  std::string plan;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string format = "csv";
  std::string out;
  bool quiet = false;
};

/// Failures the caller maps to an exit code.
struct CliFailure {
  int code;
  std::string message;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--data", o.data, "Data file: one number per line, '#' starts a comment")->required();
  cmd->add_option("--model", o.model, "gaussian2 or weibull2")->capture_default_str();
  cmd->add_option("--estimator", o.estimator, "kernel-dual, classical-dual, mdpd, neg-loglik or em")
      ->capture_default_str();
  cmd->add_option("--divergence", o.divergence, "kl, mkl, hellinger or cressie-read:<gamma>")->capture_default_str();
  cmd->add_option("--gamma", o.gamma, "Cressie-Read index; overrides --divergence");
  cmd->add_option("--a", o.a, "MDPD tradeoff parameter")->capture_default_str();
  cmd->add_option("--eta", o.eta, "Lower bound on the proportion")->capture_default_str();
  cmd->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth (default: Silverman's rule)");
  cmd->add_option("--mu-box,--theta-box", o.theta_box, "Component parameter box lo,hi")->delimiter(',')->expected(2);
  cmd->add_option("--start", o.start, "Start point lambda,theta1,theta2 (default: seeded random start)")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--seed", o.seed, "Seed for the random start")->capture_default_str();
  cmd->add_option("--psi", o.psi, "Proximal generator")->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "Maximum proximal iterations")->capture_default_str();
  cmd->add_option("--eps-objective", o.eps_objective, "Objective-change tolerance")->capture_default_str();
  cmd->add_option("--eps-step", o.eps_step, "Step-norm tolerance")->capture_default_str();
  cmd->add_option("--x-tol", o.x_tol, "Inner simplex tolerance")->capture_default_str();
  cmd->add_option("--abs-tol", o.abs_tol, "Quadrature absolute tolerance")->capture_default_str();
  cmd->add_option("--rel-tol", o.rel_tol, "Quadrature relative tolerance")->capture_default_str();
  cmd->add_flag("--check-init", o.check_init, "Report the initialization checks on standard error");
  cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--out", o.out, "Output file (default: standard output)");
}

/// Writes to --out when given, standard output otherwise.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw CliFailure{kUsage, "cannot write '" + path + "'"};
  f << text;
}

DivergenceSpec divergence_of(const FitOptions& o) {
  try {
    return o.gamma ? DivergenceSpec::cressie_read(*o.gamma) : DivergenceSpec::parse(o.divergence);
  } catch (const Error& e) {
    throw CliFailure{kUsage, e.what()};
  }
}

struct FitOutcome {
  ParamVector start;
  ParamVector estimate;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::string stop;
  std::optional<ProximalTrace> trace;
};

template <class Model>
FitOutcome fit(const Model& model, const Sample& sample, const FitOptions& o, bool want_trace) {
  FitOutcome out;
  if (!o.start.empty()) {
    out.start = ParamVector(o.start[0], o.start[1], o.start[2]);
    try {
      model.validate(out.start);
    } catch (const Error& e) {
      throw CliFailure{kUsage, std::string("--start: ") + e.what()};
    }
  } else {
    Rng rng(derive_seed(o.seed, 0));
    const auto s = detail::draw_start(model, sample, rng, 100);
    if (!s) throw CliFailure{kEstimation, "no random start passed the likelihood gate after 100 draws"};
    out.start = *s;
  }

  ObjectiveConfig oc;
  oc.quadrature.abs_tol = o.abs_tol;
  oc.quadrature.rel_tol = o.rel_tol;
  ProximalConfig pc;
  pc.max_iter = o.max_iter;
  pc.eps_objective = o.eps_objective;
  pc.eps_step = o.eps_step;
  pc.optimizer.x_tol = o.x_tol;
  try {
    pc.psi = ProximalGenerator::parse(o.psi);
    pc.validate();
    oc.quadrature.validate();
  } catch (const Error& e) {
    throw CliFailure{kUsage, e.what()};
  }

  if (o.check_init) {
    const auto like = check_init_likelihood_detail(model, out.start, sample);
    std::cerr << "init: likelihood gate " << (like.accepted ? "accepts" : "rejects") << " (J=" << like.value
              << ", bound=" << like.threshold << ")\n";
  }

  if (o.estimator == "em") {
    if (want_trace) throw CliFailure{kUsage, "trace needs a proximal estimator, not em"};
    const auto em = em_fit(model, sample, out.start, 1e-10, 5000);
    out.estimate = em.estimate;
    out.objective = -model.log_likelihood(em.estimate, sample.values) / static_cast<double>(sample.size());
    out.iterations = em.iterations;
    out.stop = em.converged ? "converged" : "max-iterations";
    out.estimate = model.canonicalize(out.estimate);
    return out;
  }

  std::optional<Objective<Model>> objective;
  if (o.estimator == "kernel-dual") {
    const auto spec = divergence_of(o);
    objective.emplace(Objective<Model>::kernel_dual(model, sample, spec, o.bandwidth, oc));
    if (!objective->window_condition_ok()) {
      std::cerr << "warning: window condition gamma (w^2 - 1) > -1 fails for gamma=" << spec.gamma()
                << " and bandwidth " << objective->kernel()->bandwidth() << "\n";
    }
    if (o.check_init) {
      const auto k = check_init_kernel_dual(*objective, out.start);
      std::cerr << "init: kernel gate " << (k.accepted ? "accepts" : "rejects") << " (value=" << k.value
                << ", limit=" << k.all_components_limit << ", profile inf=" << k.profile_inf << ")\n";
    }
  } else if (o.estimator == "classical-dual") {
    objective.emplace(Objective<Model>::classical_dual(model, sample, divergence_of(o), oc));
  } else if (o.estimator == "mdpd") {
    try {
      objective.emplace(Objective<Model>::mdpd(model, sample, o.a, oc));
    } catch (const InvalidArgument& e) {
      throw CliFailure{kUsage, std::string("--a: ") + e.what()};
    }
  } else if (o.estimator == "neg-loglik") {
    objective.emplace(Objective<Model>::neg_loglik(model, sample, oc));
  } else {
    throw CliFailure{kUsage, "unknown estimator '" + o.estimator + "'"};
  }

  auto trace = run(*objective, out.start, pc);
  out.estimate = model.canonicalize(trace.last().phi);
  out.objective = trace.last().objective;
  out.iterations = trace.iterations();
  out.stop = to_string(trace.stop);
  if (want_trace) out.trace = std::move(trace);
  return out;
}

FitOutcome fit_any(const Sample& sample, const FitOptions& o, bool want_trace) {
  const bool box = o.theta_box.size() == 2;
  try {
    if (o.model == "gaussian2") {
      const GaussianMixture2 m(o.eta, box ? o.theta_box[0] : -10.0, box ? o.theta_box[1] : 10.0);
      return fit(m, sample, o, want_trace);
    }
    if (o.model == "weibull2") {
      const WeibullMixture2 m(o.eta, box ? o.theta_box[0] : 0.5, box ? o.theta_box[1] : 10.0);
      return fit(m, sample, o, want_trace);
    }
  } catch (const InvalidArgument& e) {
    throw CliFailure{kUsage, e.what()};
  } catch (const Error& e) {
    throw CliFailure{kEstimation, e.what()};
  }
  throw CliFailure{kUsage, "unknown model '" + o.model + "'"};
}

Sample load_sample(const std::string& path) {
  try {
    return read_sample(path);
  } catch (const ParseError& e) {
    throw CliFailure{kParse, e.what()};
  }
}

int cmd_estimate(const FitOptions& o) {
  const Sample sample = load_sample(o.data);
  const auto r = fit_any(sample, o, false);
  const std::string t = o.model == "gaussian2" ? "mu" : "nu";
  std::ostringstream s;
  if (o.format == "json") {
    const Json j = {{"model", o.model},
                    {"estimator", o.estimator},
                    {"n", sample.size()},
                    {"start", {r.start[0], r.start[1], r.start[2]}},
                    {"estimate", {r.estimate[0], r.estimate[1], r.estimate[2]}},
                    {"objective", r.objective},
                    {"iterations", r.iterations},
                    {"stop", r.stop}};
    s << j.dump(2) << '\n';
  } else {
    s << "lambda," << t << "1," << t << "2,objective,iterations,stop\n"
      << fmt6(r.estimate[0]) << ',' << fmt6(r.estimate[1]) << ',' << fmt6(r.estimate[2]) << ','
      << fmt6(r.objective) << ',' << r.iterations << ',' << r.stop << '\n';
  }
  emit(o.out, s.str());
  return kOk;
}

int cmd_trace(const FitOptions& o) {
  const Sample sample = load_sample(o.data);
  const auto r = fit_any(sample, o, true);
  std::ostringstream s;
  if (o.format == "json") {
    s << trace_to_json(*r.trace).dump(2) << '\n';
  } else {
    write_trace_csv(s, *r.trace, o.model == "gaussian2" ? "mu" : "nu");
  }
  emit(o.out, s.str());
  return kOk;
}

int cmd_simulate(const SimulateOptions& o) {
  ExperimentPlan plan;
  try {
    plan = read_plan(o.plan);
  } catch (const ParseError& e) {
    throw CliFailure{kParse, e.what()};
  } catch (const InvalidArgument& e) {
    throw CliFailure{kValidation, std::string("plan validation failed: ") + e.what()};
  }
  if (o.replications) plan.replications = *o.replications;
  if (o.seed) plan.master_seed = *o.seed;
  plan.jobs = o.jobs;
  try {
    plan.validate();
  } catch (const InvalidArgument& e) {
    throw CliFailure{kValidation, std::string("plan validation failed: ") + e.what()};
  }
  ExperimentReport report;
  try {
    report = run_experiment(plan, [&](std::size_t done, std::size_t total) {
      if (!o.quiet) std::cerr << "[" << plan.name << "] replication " << done << "/" << total << " done\n";
    });
  } catch (const Error& e) {
    throw CliFailure{kEstimation, e.what()};
  }
  std::ostringstream csv;
  write_report_csv(csv, report);
  const std::string json = report_to_json(report).dump(2) + "\n";
  if (!o.out.empty()) {
    emit(o.out + ".csv", csv.str());
    emit(o.out + ".json", json);
  } else {
    emit("", o.format == "json" ? json : csv.str());
  }
  return kOk;
}

int cmd_check_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{kParse, "cannot open report '" + path + "'"};
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw CliFailure{kParse, e.what()};
  }
  try {
    validate_report_json(j);
  } catch (const Error& e) {
    throw CliFailure{kValidation, std::string("report validation failed: ") + e.what()};
  }
  std::cout << "ok\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximal-point minimum divergence estimation for two-component mixtures"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file with default option values")->envname("PROXDIV_CONFIG");

  FitOptions est_opts, trace_opts;
  SimulateOptions sim_opts;
  std::string report_path;

  auto* est = app.add_subcommand("estimate", "Estimate a mixture from a data file");
  add_fit_options(est, est_opts);
  auto* tr = app.add_subcommand("trace", "Write the per-iteration proximal trace");
  add_fit_options(tr, trace_opts);
  auto* sim = app.add_subcommand("simulate", "Run an experiment plan");
  sim->add_option("--plan", sim_opts.plan, "Plan file (JSON)")->required();
  sim->add_option("--replications,-R", sim_opts.replications, "Override the plan's replication count");
  sim->add_option("--seed", sim_opts.seed, "Override the plan's master seed");
  sim->add_option("--jobs,-j", sim_opts.jobs, "Worker threads")->capture_default_str();
  sim->add_option("--format", sim_opts.format, "csv or json when writing to standard output")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sim->add_option("--out", sim_opts.out, "Output prefix: writes PREFIX.csv and PREFIX.json");
  sim->add_flag("--quiet,-q", sim_opts.quiet, "No progress on standard error");
  auto* chk = app.add_subcommand("check-report", "Validate a JSON report written by simulate");
  chk->add_option("report", report_path, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (est->parsed()) return cmd_estimate(est_opts);
    if (tr->parsed()) return cmd_trace(trace_opts);
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (chk->parsed()) return cmd_check_report(report_path);
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimation;
  }
  return kUsage;
}
