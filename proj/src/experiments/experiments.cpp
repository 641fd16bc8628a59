#include "experiments/experiments.hpp"

#include "common.hpp"
#include "decomposition/family.hpp"
#include "fem/mesh.hpp"
#include "fem/norms.hpp"
#include "problems/problem.hpp"
#include "solver/solver.hpp"
#include "theory/theory.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace ssc::experiments {

namespace {

using Eigen::VectorXd;
using fem::DualVector;
using fem::FeFunction;
using fem::MeshPtr;
using problems::Problem;

nlohmann::json section(const nlohmann::json& config, const char* key) {
  if (!config.contains(key)) return nlohmann::json::object();
  if (!config.at(key).is_object()) throw ConfigError(std::string(key) + " must be an object");
  return config.at(key);
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

VectorXd gaussian(std::uint64_t seed, int n, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = scale * dist(rng);
  return z;
}

struct Setup {
  MeshPtr mesh;
  Problem prob;
  decomposition::SubspaceFamily family;
  solver::SolverConfig cfg;
  bool use_ssc = false;
  FeFunction u0;
  nlohmann::json problem_json;  // echoed into summaries
};

Problem build_problem(const nlohmann::json& pj, const MeshPtr& mesh, double eps_override = -1.0) {
  const std::string kind = get_or<std::string>(pj, "kind", "slaplace");
  const double s = get_or<double>(pj, "s", 2.0);
  const double eps = eps_override >= 0.0 ? eps_override : get_or<double>(pj, "eps", 0.0);

  DualVector f{mesh, VectorXd::Zero(mesh->n_vertices())};
  const auto fspec = pj.contains("f") ? pj.at("f") : nlohmann::json("zero");
  if (fspec.is_string()) {
    const std::string name = fspec.get<std::string>();
    if (name == "zero") {
      // keep zeros
    } else if (name == "random-compatible") {
      f.values = gaussian(get_or<std::uint64_t>(pj, "f_seed", 1), mesh->n_vertices(),
                          get_or<double>(pj, "f_scale", 1.0));
      f = fem::make_compatible(f);
    } else {
      throw ConfigError("problem.f must be \"zero\", \"random-compatible\", or a vector");
    }
  } else if (fspec.is_array()) {
    if (static_cast<int>(fspec.size()) != mesh->n_vertices())
      throw ConfigError("explicit f has the wrong length");
    for (int i = 0; i < mesh->n_vertices(); ++i) f.values[i] = fspec.at(i).get<double>();
  } else {
    throw ConfigError("problem.f must be \"zero\", \"random-compatible\", or a vector");
  }

  if (kind == "slaplace") return problems::make_slaplace(mesh, s, std::move(f));
  if (kind == "perturbed") return problems::make_perturbed(mesh, s, eps, std::move(f));
  if (kind == "quadratic") {
    // s = 2 stiffness as the default SPSD matrix; §2-style custom matrices
    // enter through the library API rather than the config file
    const Problem tmp = problems::make_slaplace(mesh, 2.0, f);
    Eigen::SparseMatrix<double> A = tmp.hessian(VectorXd::Zero(mesh->n_vertices()), 0.0);
    return problems::make_quadratic(mesh, std::move(A), std::move(f),
                                    {FeFunction{mesh, VectorXd::Ones(mesh->n_vertices())}});
  }
  throw ConfigError("problem.kind must be quadratic, slaplace, or perturbed");
}

Setup build_setup(const nlohmann::json& config, bool override_tau, double eps_override = -1.0) {
  Setup setup;
  const auto pj = section(config, "problem");
  const int dim = get_or<int>(pj, "dim", 1);
  const int resolution = get_or<int>(pj, "resolution", 64);
  try {
    setup.mesh = dim == 1 ? fem::build_interval_mesh(resolution)
               : dim == 2 ? fem::build_square_mesh(resolution)
                          : throw ConfigError("problem.dim must be 1 or 2");
    setup.prob = build_problem(pj, setup.mesh, eps_override);

    const auto dj = section(config, "decomposition");
    const int per_axis = get_or<int>(dj, "per_axis", 4);
    const int overlap = get_or<int>(dj, "overlap_layers", 1);
    setup.family = decomposition::build_overlapping_dd(setup.mesh, per_axis, overlap);
    const int coarse_factor = get_or<int>(dj, "coarse_factor", 0);
    if (coarse_factor > 0)
      setup.family =
          decomposition::add_coarse_space(setup.family, fem::coarsen(setup.mesh, coarse_factor));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }

  const auto sj = section(config, "solver");
  setup.cfg.tau = get_or<double>(sj, "tau", -1.0);
  setup.cfg.max_outer_iters = get_or<int>(sj, "max_outer_iters", 500);
  setup.cfg.outer_tol = get_or<double>(sj, "outer_tol", 1e-8);
  const std::string local = get_or<std::string>(sj, "local_kind", "exact");
  if (local == "exact")
    setup.cfg.local_kind = solver::LocalKind::exact;
  else if (local == "inexact_power")
    setup.cfg.local_kind = solver::LocalKind::inexact_power;
  else
    throw ConfigError("solver.local_kind must be exact or inexact_power");
  setup.cfg.inexact_M = get_or<double>(sj, "inexact_M", 1.0);
  setup.cfg.inexact_s = get_or<double>(sj, "inexact_s", 2.0);
  if (setup.cfg.local_kind == solver::LocalKind::inexact_power &&
      (setup.cfg.inexact_M <= 0.0 || setup.cfg.inexact_s <= 1.0))
    throw ConfigError("inexact_power needs M > 0 and s_loc > 1");
  setup.cfg.inner_max_iters = get_or<int>(sj, "inner_max_iters", 200);
  setup.cfg.inner_grad_tol = get_or<double>(sj, "inner_grad_tol", 1e-10);
  setup.cfg.newton_gamma = get_or<double>(sj, "newton_gamma", 0.0);
  setup.cfg.seed = get_or<std::uint64_t>(sj, "seed", 0);
  setup.cfg.log_local_steps = get_or<bool>(sj, "log_local_steps", false);
  setup.cfg.override_tau = override_tau || get_or<bool>(sj, "override_tau", false);
  const std::string method = get_or<std::string>(sj, "method", "psc");
  if (method != "psc" && method != "ssc") throw ConfigError("solver.method must be psc or ssc");
  setup.use_ssc = method == "ssc";

  VectorXd u0 = VectorXd::Zero(setup.mesh->n_vertices());
  if (config.contains("u0")) {
    const auto& uj = config.at("u0");
    const std::string kind =
        uj.is_string() ? uj.get<std::string>() : get_or<std::string>(uj, "kind", "zero");
    if (kind == "random")
      u0 = gaussian(uj.is_object() ? get_or<std::uint64_t>(uj, "seed", 7) : 7,
                    setup.mesh->n_vertices(),
                    uj.is_object() ? get_or<double>(uj, "scale", 1.0) : 1.0);
    else if (kind != "zero")
      throw ConfigError("u0 must be \"zero\" or \"random\"");
  }
  setup.u0 = FeFunction{setup.mesh, std::move(u0)};

  setup.problem_json = {{"kind", get_or<std::string>(pj, "kind", "slaplace")},
                        {"s", setup.prob.s},
                        {"eps", setup.prob.eps},
                        {"p", setup.prob.p},
                        {"q", setup.prob.q},
                        {"dim", dim},
                        {"resolution", resolution}};
  return setup;
}

solver::RunRecord run_solver(const Setup& setup) {
  return setup.use_ssc ? solver::run_ssc(setup.prob, setup.family, setup.cfg, setup.u0)
                       : solver::run_psc(setup.prob, setup.family, setup.cfg, setup.u0);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

nlohmann::json run_summary(const Setup& setup, const solver::RunRecord& rec,
                           const nlohmann::json& config) {
  nlohmann::json j = solver::record_summary_json(rec);
  j["problem"] = setup.problem_json;
  j["decomposition"] = setup.family.summary_json();
  j["tau_lower"] = decomposition::color_subdomains(setup.family).tau_lower;
  j["config"] = config;
  return j;
}

theory::SampleSpec sample_spec_from(const nlohmann::json& config, const Setup& setup) {
  const auto sj = section(config, "samples");
  theory::SampleSpec spec;
  spec.count = get_or<int>(sj, "count", 100);
  spec.seed = get_or<std::uint64_t>(sj, "seed", 1);
  spec.radius = get_or<double>(sj, "radius", 1.0);
  spec.u0 = setup.u0;
  return spec;
}

ExperimentResult cmd_solve(const nlohmann::json& config, bool override_tau) {
  const Setup setup = build_setup(config, override_tau);
  const auto rec = run_solver(setup);
  ExperimentResult res;
  res.artifacts.push_back({"run.csv", solver::record_to_csv(rec)});
  res.artifacts.push_back({"summary.json", run_summary(setup, rec, config).dump(2) + "\n"});
  res.numerical_success = rec.reached_tol && solver::descent_check(rec);
  res.message = res.numerical_success
                    ? "converged in " + std::to_string(rec.iters_to_tol) + " iterations"
                    : "did not reach the target tolerance";
  return res;
}

ExperimentResult cmd_rates(const nlohmann::json& config, bool override_tau) {
  const Setup setup = build_setup(config, override_tau);
  const auto rec = run_solver(setup);

  theory::SampleSpec spec = sample_spec_from(config, setup);
  for (const auto& it : rec.iterates) spec.trajectory.push_back(setup.prob.fe(it));

  bool re_estimated = false;
  double c_k0 = 0.0, mu_k0 = 0.0;
  bool pass = false;
  theory::RateParams params;
  for (int attempt = 0; attempt < 2 && !pass; ++attempt) {
    if (attempt == 1) {
      spec.count *= 10;  // constants are sampled proxies; retry once, denser
      re_estimated = true;
    }
    c_k0 = theory::estimate_ck0(setup.prob, setup.family, spec);
    mu_k0 = theory::estimate_muk0(setup.prob, *rec.u_ref, spec);
    params = {setup.prob.p, setup.prob.q, rec.tau_used, c_k0,
              mu_k0,        rec.r0_empirical, rec.zetas[0]};
    pass = true;
    for (size_t n = 0; n < rec.zetas.size() && pass; ++n)
      pass = rec.zetas[n] <=
             theory::bound_thm_conv_sharp(params, static_cast<int>(n)) * (1.0 + 1e-9);
  }

  std::string csv = "n,zeta_observed,zeta_bound,branch\n";
  for (size_t n = 0; n < rec.zetas.size(); ++n) {
    const auto pt = theory::bound_thm_conv_sharp_point(params, static_cast<int>(n));
    csv += std::to_string(n) + "," + fmt(rec.zetas[n]) + "," + fmt(pt.value) + "," + pt.branch +
           "\n";
  }

  nlohmann::json j;
  j["pass"] = pass;
  j["re_estimated"] = re_estimated;
  j["params"] = {{"p", params.p},       {"q", params.q},   {"tau", params.tau},
                 {"c_k0", params.c_k0}, {"mu_k0", params.mu_k0}, {"r0", params.r0},
                 {"zeta0", params.zeta0}};
  j["constants_are_proxies"] = true;
  j["sample_count"] = spec.count;
  j["seed"] = spec.seed;
  j["summary"] = run_summary(setup, rec, config);

  ExperimentResult res;
  res.artifacts.push_back({"run.csv", solver::record_to_csv(rec)});
  res.artifacts.push_back({"rates.csv", std::move(csv)});
  res.artifacts.push_back({"rates.json", j.dump(2) + "\n"});
  res.numerical_success = pass && solver::descent_check(rec);
  res.message = pass ? "observed gaps stay below the theoretical envelope"
                     : "bound violated even after re-estimation";
  return res;
}

ExperimentResult cmd_sweep_eps(const nlohmann::json& config, bool override_tau) {
  if (!config.contains("eps_list") || !config.at("eps_list").is_array() ||
      config.at("eps_list").size() < 2)
    throw ConfigError("sweep-eps needs eps_list with at least two values");
  const std::string kind = get_or<std::string>(section(config, "problem"), "kind", "perturbed");
  if (kind != "perturbed") throw ConfigError("sweep-eps requires problem.kind = perturbed");

  ExperimentResult res;
  std::map<double, solver::RunRecord> records;
  bool kernel_assumption = true;
  for (const auto& ej : config.at("eps_list")) {
    const double eps = ej.get<double>();
    if (eps <= 0.0) throw ConfigError("eps values must be positive");
    const Setup setup = build_setup(config, override_tau, eps);
    kernel_assumption = decomposition::kernel_decomposition_check(setup.family, setup.prob);
    auto rec = run_solver(setup);
    char name[64];
    std::snprintf(name, sizeof(name), "run_eps_%g.csv", eps);
    res.artifacts.push_back({name, solver::record_to_csv(rec)});
    records.emplace(eps, std::move(rec));
  }

  const double ratio_tol = get_or<double>(config, "ratio_tol", 2.0);
  const auto report = theory::eps_independence_report(records, ratio_tol, kernel_assumption);
  res.artifacts.push_back({"eps_report.json", report.to_json().dump(2) + "\n"});
  res.numerical_success = !kernel_assumption || report.pass;
  res.message = kernel_assumption
                    ? (report.pass ? "iteration counts are eps-independent within tolerance"
                                   : "eps-independence ratio exceeded tolerance")
                    : "kernel decomposition assumption violated; observation only";
  return res;
}

ExperimentResult cmd_constants(const nlohmann::json& config, bool override_tau) {
  const Setup setup = build_setup(config, override_tau);
  const theory::SampleSpec spec = sample_spec_from(config, setup);

  theory::ConstantEstimates est;
  est.sample_count = spec.count;
  est.seed = spec.seed;
  est.c_k0 = theory::estimate_ck0(setup.prob, setup.family, spec);
  const FeFunction u = solver::global_newton_oracle(setup.prob, setup.u0, 1e-10);
  est.mu_k0 = theory::estimate_muk0(setup.prob, u, spec);
  est.c_tri = theory::estimate_triangle_constant(setup.prob, spec);
  est.c_q = std::pow(2.0, setup.prob.q) + 1.0;
  if (setup.cfg.local_kind == solver::LocalKind::inexact_power) {
    const auto ot = theory::estimate_omega_theta(setup.prob, setup.family, setup.cfg.inexact_M,
                                                 setup.cfg.inexact_s, spec);
    est.omega = ot.omega;
    est.rho = ot.rho;
    est.theta = ot.theta;
    est.omega_valid = ot.valid;
  } else {
    est.omega = 1.0;  // exact local problems: d_j is d_F restricted
    est.rho = 1.0;
    est.theta = 1.0;
    est.omega_valid = true;
  }

  nlohmann::json j = est.to_json();
  j["tau_lower"] = decomposition::color_subdomains(setup.family).tau_lower;
  j["problem"] = setup.problem_json;
  j["decomposition"] = setup.family.summary_json();

  ExperimentResult res;
  res.artifacts.push_back({"constants.json", j.dump(2) + "\n"});
  res.message = "constants estimated (sampled proxies)";
  return res;
}

}  // namespace

ExperimentResult run_experiment(const std::string& command, const nlohmann::json& config,
                                bool override_tau) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (config.contains("experiment") &&
      config.at("experiment").get<std::string>() != command)
    throw ConfigError("config experiment kind does not match the requested command");
  if (command == "solve") return cmd_solve(config, override_tau);
  if (command == "rates") return cmd_rates(config, override_tau);
  if (command == "sweep-eps") return cmd_sweep_eps(config, override_tau);
  if (command == "constants") return cmd_constants(config, override_tau);
  throw ConfigError("unknown experiment: " + command);
}

}  // namespace ssc::experiments
