#include <doctest.h>

#include "common.hpp"
#include "fem/norms.hpp"
#include "solver/newton.hpp"
#include "solver/solver.hpp"

#include <cmath>
#include <random>

using namespace ssc;
using namespace ssc::solver;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_coeffs(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd c(n);
  for (int i = 0; i < c.size(); ++i) c[i] = scale * dist(rng);
  return c;
}

fem::DualVector compatible_load(const fem::MeshPtr& mesh, std::uint64_t seed, double scale = 1.0) {
  return fem::make_compatible({mesh, random_coeffs(mesh->n_vertices(), seed, scale)});
}

problems::Problem quadratic_neumann(const fem::MeshPtr& mesh, std::uint64_t seed) {
  auto base = problems::make_slaplace(mesh, 2.0, compatible_load(mesh, seed));
  return problems::make_quadratic(
      mesh, base.hessian(VectorXd::Zero(mesh->n_vertices()), 0.0), base.f,
      {fem::FeFunction{mesh, VectorXd::Ones(mesh->n_vertices())}});
}

}  // namespace

TEST_CASE("dense damped Newton on a quadratic") {
  MatrixXd H(2, 2);
  H << 4.0, 1.0, 1.0, 3.0;
  const VectorXd b = Eigen::Vector2d(1.0, -2.0);
  DenseObjective obj;
  obj.value = [&](const VectorXd& x) { return 0.5 * x.dot(H * x) - b.dot(x); };
  obj.grad = [&](const VectorXd& x) { return VectorXd(H * x - b); };
  obj.hess = [&](const VectorXd&) { return H; };
  const auto res = newton_minimize(obj, VectorXd::Zero(2), {});
  CHECK(res.converged);
  CHECK((H * res.x - b).norm() <= 1e-9);
}

TEST_CASE("dense damped Newton on a quartic") {
  DenseObjective obj;
  obj.value = [](const VectorXd& x) { return 0.25 * std::pow(x[0] - 2.0, 4) + x[0]; };
  obj.grad = [](const VectorXd& x) {
    return VectorXd(Eigen::VectorXd::Constant(1, std::pow(x[0] - 2.0, 3) + 1.0));
  };
  obj.hess = [](const VectorXd& x) {
    return MatrixXd(Eigen::MatrixXd::Constant(1, 1, 3.0 * std::pow(x[0] - 2.0, 2)));
  };
  NewtonOptions opts;
  opts.grad_tol_abs = 1e-12;
  opts.max_iters = 200;
  const auto res = newton_minimize(obj, VectorXd::Zero(1), opts);
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-8));  // (x-2)^3 = -1
}

TEST_CASE("exact local solve matches a dense subsystem solve (quadratic)") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = quadratic_neumann(mesh, 3);
  auto family = decomposition::build_overlapping_dd(mesh, 4, 2);
  const auto v = prob.fe(random_coeffs(17, 7));
  SolverConfig cfg;
  for (int j = 0; j < family.n_local(); ++j) {
    const auto w = local_solve_exact(prob, family, j, v, cfg);
    const Eigen::SparseMatrix<double> B = family.basis(j);
    const MatrixXd Hl = MatrixXd(B.transpose() * prob.A * B);
    const VectorXd gl = B.transpose() * prob.gradient(v).values;
    const VectorXd c = Hl.ldlt().solve(-gl);
    CHECK((w.coeffs - B * c).norm() <= 1e-10 * (1.0 + c.norm()));
    // support confined to the subspace
    for (int i = 0; i < 17; ++i) {
      const auto& idx = family.subspaces[j];
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) CHECK(w.coeffs[i] == 0.0);
    }
  }
}

TEST_CASE("exact local solve decreases a nonquadratic energy") {
  auto mesh = fem::build_interval_mesh(8);
  auto prob = problems::make_slaplace(mesh, 4.0, compatible_load(mesh, 5));
  auto family = decomposition::build_overlapping_dd(mesh, 2, 1);
  const auto v = prob.fe(random_coeffs(9, 9));
  SolverConfig cfg;
  const auto w = local_solve_exact(prob, family, 0, v, cfg);
  CHECK(prob.energy(prob.fe(v.coeffs + w.coeffs)) <
        prob.energy(v) + 1e-12 * (1.0 + std::abs(prob.energy(v))));
  // restricted gradient nearly zero at the local minimizer
  const Eigen::SparseMatrix<double> B = family.basis(0);
  const VectorXd gl = B.transpose() * prob.gradient(prob.fe(v.coeffs + w.coeffs)).values;
  CHECK(gl.norm() <= 1e-7 * (1.0 + prob.gradient(v).values.norm()));
}

TEST_CASE("inexact power local solve with s_loc = 2 is a Gram solve") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = problems::make_slaplace(mesh, 2.0, compatible_load(mesh, 13));
  auto family = decomposition::build_overlapping_dd(mesh, 4, 2);
  const auto v = prob.fe(random_coeffs(17, 15));
  SolverConfig cfg;
  const double M = 2.5;
  const auto w = local_solve_inexact_power(prob, family, 1, v, M, 2.0, cfg);

  // model minimizer solves M (K + Mass) w = -g on the subspace
  const Eigen::SparseMatrix<double> B = family.basis(1);
  const Eigen::SparseMatrix<double> K = prob.hessian(VectorXd::Zero(17), 0.0);
  const MatrixXd G = MatrixXd(B.transpose() * (K + mesh->mass) * B);
  const VectorXd gl = B.transpose() * prob.gradient(v).values;
  const VectorXd c = (M * G).ldlt().solve(-gl);
  CHECK((w.coeffs - B * c).norm() <= 1e-8 * (1.0 + c.norm()));

  // monotone damping in M
  const auto w10 = local_solve_inexact_power(prob, family, 1, v, 10.0 * M, 2.0, cfg);
  CHECK(w10.coeffs.norm() < w.coeffs.norm());
}

TEST_CASE("inexact model dj scales with the s_loc power") {
  auto mesh = fem::build_interval_mesh(8);
  auto prob = problems::make_slaplace(mesh, 3.0, compatible_load(mesh, 1));
  const VectorXd w = random_coeffs(9, 2);
  const double d1 = inexact_model_dj(prob, w, 1.5, 3.0);
  const double d2 = inexact_model_dj(prob, (2.0 * w).eval(), 1.5, 3.0);
  CHECK(d2 == doctest::Approx(8.0 * d1).epsilon(1e-12));
}

TEST_CASE("global oracle matches dense solves") {
  auto mesh = fem::build_interval_mesh(16);
  // coercive: perturbed s=2 solves (K + eps M) u = f
  auto pert = problems::make_perturbed(mesh, 2.0, 1.0, {mesh, random_coeffs(17, 21)});
  const auto u = global_newton_oracle(pert, pert.fe(VectorXd::Zero(17)), 1e-12);
  const MatrixXd A = MatrixXd(pert.hessian(VectorXd::Zero(17), 0.0));
  const VectorXd expect = A.ldlt().solve(pert.f.values);
  CHECK((u.coeffs - expect).norm() <= 1e-9 * (1.0 + expect.norm()));

  // singular slaplace with f = 0: mean-normalized answer is 0
  auto sing = problems::make_slaplace(mesh, 2.0, {mesh, VectorXd::Zero(17)});
  const auto u0 = global_newton_oracle(sing, sing.fe(random_coeffs(17, 23)), 1e-12);
  CHECK(u0.coeffs.norm() <= 1e-10);

  // nonquadratic sanity: gradient nearly zero at the reported minimizer
  auto s4 = problems::make_slaplace(mesh, 4.0, compatible_load(mesh, 25));
  const auto u4 = global_newton_oracle(s4, s4.fe(VectorXd::Zero(17)), 1e-11);
  VectorXd g = s4.gradient(u4).values;
  g.array() -= g.mean();
  CHECK(g.norm() <= 1e-10 * (1.0 + s4.f.values.norm()));
}

TEST_CASE("PSC on a singular quadratic reaches the oracle energy") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = quadratic_neumann(mesh, 31);
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  cfg.outer_tol = 1e-10;
  cfg.max_outer_iters = 400;
  const auto rec = run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17)));
  CHECK(rec.reached_tol);
  CHECK(descent_check(rec));
  CHECK(rec.energies.back() <=
        rec.f_ref + 1e-8 * (1.0 + std::abs(rec.f_ref)));
  CHECK(rec.seminorm_errors.back() <= 1e-4);
  CHECK(rec.tau_used == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("SSC with a single subspace converges in one sweep") {
  auto mesh = fem::build_interval_mesh(8);
  auto prob = quadratic_neumann(mesh, 35);
  auto family = decomposition::build_overlapping_dd(mesh, 1, 1);
  SolverConfig cfg;
  cfg.outer_tol = 1e-12;
  const auto rec = run_ssc(prob, family, cfg, prob.fe(random_coeffs(9, 37)));
  CHECK(rec.reached_tol);
  CHECK(rec.iters_to_tol <= 1);
}

TEST_CASE("kernel-shift equivariance of PSC") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = problems::make_slaplace(mesh, 2.0, compatible_load(mesh, 41));
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  cfg.max_outer_iters = 10;
  cfg.outer_tol = 1e-14;
  const VectorXd u0 = random_coeffs(17, 43);
  const auto a = run_psc(prob, family, cfg, prob.fe(u0));
  const auto b = run_psc(prob, family, cfg,
                         prob.fe(u0 + VectorXd::Constant(17, 2.75)));
  REQUIRE(a.iterates.size() == b.iterates.size());
  for (size_t n = 0; n < a.iterates.size(); ++n) {
    CHECK((b.iterates[n] - a.iterates[n] - VectorXd::Constant(17, 2.75)).norm() <= 1e-10);
    CHECK(a.energies[n] == doctest::Approx(b.energies[n]).epsilon(1e-10));
  }
}

TEST_CASE("step size validation") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = quadratic_neumann(mesh, 47);
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  cfg.tau = 0.4;  // above 1/(2 colors + coarse)
  CHECK_THROWS_AS(run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17))), ConfigError);
  cfg.override_tau = true;
  cfg.max_outer_iters = 50;
  CHECK_NOTHROW(run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17))));
  cfg.tau = 1.5;
  CHECK_THROWS_AS(run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17))), ConfigError);
}

TEST_CASE("incompatible load is refused") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = problems::make_slaplace(mesh, 2.0, {mesh, fem::load_of_one(*mesh)});
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  CHECK_THROWS_AS(run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17))), PreconditionError);
}

TEST_CASE("singular one-level decomposition is refused") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = problems::make_slaplace(mesh, 2.0, compatible_load(mesh, 51));
  auto family = decomposition::build_overlapping_dd(mesh, 4, 2);
  SolverConfig cfg;
  CHECK_THROWS_AS(run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17))), PreconditionError);
}

TEST_CASE("descent check flags a bump") {
  RunRecord rec;
  CHECK(descent_check(rec));
  rec.energies = {3.0, 2.0, 1.0};
  CHECK(descent_check(rec));
  rec.energies = {3.0, 2.0, 2.5};
  CHECK_FALSE(descent_check(rec));
}

TEST_CASE("CSV serialization is deterministic") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = quadratic_neumann(mesh, 55);
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  cfg.max_outer_iters = 30;
  const auto a = run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17)));
  const auto b = run_psc(prob, family, cfg, prob.fe(VectorXd::Zero(17)));
  const std::string csv_a = record_to_csv(a), csv_b = record_to_csv(b);
  CHECK(csv_a == csv_b);
  CHECK(csv_a.rfind("n,F,zeta,seminorm_err,wall_ms\n", 0) == 0);
}

TEST_CASE("local step log satisfies the inexact descent inequality") {
  auto mesh = fem::build_interval_mesh(16);
  auto prob = problems::make_slaplace(mesh, 2.0, compatible_load(mesh, 61));
  auto family = decomposition::add_coarse_space(
      decomposition::build_overlapping_dd(mesh, 4, 2), fem::coarsen(mesh, 4));
  SolverConfig cfg;
  cfg.local_kind = LocalKind::inexact_power;
  cfg.inexact_M = 4.0;  // strong damping: omega <= 1 for this quadratic energy
  cfg.inexact_s = 2.0;
  cfg.log_local_steps = true;
  cfg.max_outer_iters = 5;
  const auto rec = run_psc(prob, family, cfg, prob.fe(random_coeffs(17, 63)));
  REQUIRE(!rec.local_log.empty());
  const double omega = 1.0 / cfg.inexact_M;  // d_F = (1/2)|w|_K^2 <= (1/M) d_j
  const double rho = cfg.inexact_s;
  for (const auto& log : rec.local_log)
    CHECK(log.decrease >= (1.0 - omega / rho) * log.dj_prime_pairing - 1e-10);
}
