#include "theory/theory.hpp"

#include "common.hpp"
#include "fem/norms.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ssc::theory {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double problem_eps(const Problem& prob) {
  return prob.kind == problems::ProblemKind::perturbed ? prob.eps : 1.0;
}

// gradient of half the squared norm (the duality mapping for these norms)
VectorXd apply_J(const Problem& prob, NormKind kind, const VectorXd& xi) {
  if (kind == NormKind::l2) return prob.mesh->mass * xi;
  const double q = prob.q;
  const double eps = problem_eps(prob);
  const double reg = 1e-14;
  const auto sd = prob.seminorm_pow_diff(xi, q, reg);
  const auto ld = prob.l2_pow_diff(xi, q, reg);
  const double ab = sd.value + eps * ld.value;
  if (ab <= 0.0) return VectorXd::Zero(xi.size());
  return (std::pow(ab, 2.0 / q - 1.0) / q) * (sd.grad + eps * ld.grad);
}

VectorXd gaussian(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = dist(rng);
  return z;
}

// Sample inside {F <= level}: random direction from the center, shrunk
// toward the center until the level constraint holds.
std::vector<VectorXd> sample_level_set(const Problem& prob, const VectorXd& center, double level,
                                       const SampleSpec& spec, std::mt19937_64& rng) {
  const double slack = 1e-12 * (1.0 + std::abs(level));
  std::vector<VectorXd> out;
  for (int i = 0; i < spec.count; ++i) {
    VectorXd dir = gaussian(rng, static_cast<int>(center.size()));
    dir *= spec.radius / std::max(dir.norm(), 1e-300);
    double t = 1.0;
    VectorXd v = center + dir;
    int tries = 0;
    while (prob.energy(prob.fe(v)) > level + slack && tries++ < 80) {
      t *= 0.5;
      v = center + t * dir;
    }
    if (prob.energy(prob.fe(v)) <= level + slack) out.push_back(std::move(v));
  }
  return out;
}

void remove_kernel_mean(const Problem& prob, VectorXd& w) {
  if (prob.kernel_basis.empty()) return;
  const VectorXd m = fem::load_of_one(*prob.mesh);
  w -= (m.dot(w) / m.sum()) * VectorXd::Ones(w.size());
}

// |w| for the C_K / mu_K denominators: the problem seminorm, or the
// eps-weighted full norm for the nearly semicoercive kind.
double gap_norm(const Problem& prob, const VectorXd& w) {
  const FeFunction v = prob.fe(w);
  if (prob.kind != problems::ProblemKind::perturbed) return prob.seminorm(v);
  return decomposition_norm(prob, NormKind::eps_q, v);
}

std::pair<VectorXd, double> level_set_center(const Problem& prob, const SampleSpec& spec) {
  const FeFunction u0 =
      spec.u0 ? *spec.u0 : prob.fe(VectorXd::Zero(prob.mesh->n_vertices()));
  const FeFunction u = solver::global_newton_oracle(prob, u0, 1e-10);
  return {u.coeffs, prob.energy(u0)};
}

}  // namespace

double decomposition_norm(const Problem& prob, NormKind kind, const FeFunction& v) {
  if (kind == NormKind::l2) return fem::norm_l2(v);
  const double q = prob.q;
  const double sem = prob.seminorm(v);
  return std::pow(std::pow(sem, q) + problem_eps(prob) * std::pow(fem::norm_l2(v), q), 1.0 / q);
}

DualityDecomposition duality_decompose(const FeFunction& v, const Problem& prob, NormKind kind) {
  DualityDecomposition dec;
  dec.norm_kind = kind;
  const int N = static_cast<int>(v.coeffs.size());
  if (prob.kernel_basis.empty()) {
    dec.phi = prob.fe(VectorXd::Zero(N));
    dec.xi = v;
    return dec;
  }

  // L2 projection onto the kernel; exact for the Hilbert case and the
  // starting point for the 1D search otherwise
  const int k = static_cast<int>(prob.kernel_basis.size());
  MatrixXd Phi(N, k);
  for (int i = 0; i < k; ++i) Phi.col(i) = prob.kernel_basis[i].coeffs;
  const MatrixXd G = Phi.transpose() * (prob.mesh->mass * Phi);
  const VectorXd c_l2 = G.ldlt().solve(Phi.transpose() * (prob.mesh->mass * v.coeffs));

  VectorXd phi;
  if (kind == NormKind::l2) {
    phi = Phi * c_l2;
  } else {
    if (k != 1)
      throw NumericalError("duality_decompose: eps_q projection implemented for 1D kernels only");
    const VectorXd kb = Phi.col(0);
    auto half_sq = [&](double c) {
      const double nrm = decomposition_norm(prob, kind, prob.fe(v.coeffs - c * kb));
      return 0.5 * nrm * nrm;
    };
    auto dhalf_sq = [&](double c) {
      return -apply_J(prob, kind, v.coeffs - c * kb).dot(kb);
    };
    // golden-section bracket around the L2 coefficient, then Newton polish
    const double span =
        10.0 * (decomposition_norm(prob, kind, v) /
                    std::max(decomposition_norm(prob, kind, prob.fe(VectorXd(kb))), 1e-300) +
                1.0);
    double a = c_l2[0] - span, b = c_l2[0] + span;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = half_sq(x1), f2 = half_sq(x2);
    while (b - a > 1e-10 * (1.0 + std::abs(a) + std::abs(b))) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = half_sq(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = half_sq(x2);
      }
    }
    double c = 0.5 * (a + b);
    for (int it = 0; it < 50; ++it) {
      const double g = dhalf_sq(c);
      if (std::abs(g) <= 1e-14 * (1.0 + std::abs(half_sq(c)))) break;
      const double h = 1e-6 * (1.0 + std::abs(c));
      const double g2 = (dhalf_sq(c + h) - dhalf_sq(c - h)) / (2.0 * h);
      if (!(g2 > 0.0)) break;
      const double step = g / g2;
      if (!std::isfinite(step)) break;
      c -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(c))) break;
    }
    if (!std::isfinite(c)) throw NumericalError("duality_decompose: scalar search diverged");
    phi = c * kb;
  }

  dec.phi = prob.fe(phi);
  dec.xi = prob.fe(v.coeffs - phi);
  dec.orth_residual = verify_orthogonality(dec, prob);
  return dec;
}

double verify_orthogonality(const DualityDecomposition& dec, const Problem& prob) {
  const double nxi = decomposition_norm(prob, dec.norm_kind, dec.xi);
  const double nphi = decomposition_norm(prob, dec.norm_kind, dec.phi);
  if (nxi == 0.0 || nphi == 0.0) return 0.0;
  const double pairing = apply_J(prob, dec.norm_kind, dec.xi.coeffs).dot(dec.phi.coeffs);
  return std::abs(pairing) / (nxi * nphi + 1e-300);
}

double estimate_ck0(const Problem& prob, const SubspaceFamily& family, const SampleSpec& spec) {
  if (spec.count <= 0) throw std::invalid_argument("estimate_ck0: empty sample");
  std::mt19937_64 rng(spec.seed);
  const auto [u_ref, level] = level_set_center(prob, spec);

  std::vector<VectorXd> points = sample_level_set(prob, u_ref, level, spec, rng);
  for (const auto& t : spec.trajectory) points.push_back(t.coeffs);
  if (points.empty()) throw std::invalid_argument("estimate_ck0: no level-set samples");

  const double q = prob.q;
  double best = -1.0;
  auto consider = [&](const VectorXd& v, VectorXd w) {
    remove_kernel_mean(prob, w);  // kernel shift: free in the C_K infimum
    const double den_norm = gap_norm(prob, w);
    if (den_norm <= 1e-10 * (1.0 + w.norm())) return;
    const auto parts = decomposition::construct_stable_decomposition(family, prob.fe(w));
    double num = 0.0;
    const FeFunction vfe = prob.fe(v);
    for (const auto& part : parts) num += prob.bregman(vfe, part);
    best = std::max(best, num / std::pow(den_norm, q));
  };

  for (size_t i = 0; i < points.size(); ++i) {
    for (const double alpha : {0.25, 0.5, 0.75, 1.0})
      consider(points[i], alpha * (u_ref - points[i]));
    consider(points[i], points[(i + 1) % points.size()] - points[i]);
  }
  if (best < 0.0) throw std::invalid_argument("estimate_ck0: no informative samples");
  return q * best;
}

double estimate_muk0(const Problem& prob, const FeFunction& oracle_u, const SampleSpec& spec) {
  if (spec.count <= 0) throw std::invalid_argument("estimate_muk0: empty sample");
  std::mt19937_64 rng(spec.seed);
  const FeFunction u0 =
      spec.u0 ? *spec.u0 : prob.fe(VectorXd::Zero(prob.mesh->n_vertices()));
  const double level = prob.energy(u0);
  const double Fu = prob.energy(oracle_u);

  std::vector<VectorXd> points = sample_level_set(prob, oracle_u.coeffs, level, spec, rng);
  for (const auto& t : spec.trajectory) points.push_back(t.coeffs);

  const double p = prob.p;
  double best = -1.0;
  for (const auto& v : points) {
    const double dist = gap_norm(prob, v - oracle_u.coeffs);
    if (dist <= 1e-10 * (1.0 + v.norm())) continue;
    const double gap = std::max(0.0, prob.energy(prob.fe(v)) - Fu);
    const double ratio = gap / std::pow(dist, p);
    best = best < 0.0 ? ratio : std::min(best, ratio);
  }
  if (best < 0.0) throw std::invalid_argument("estimate_muk0: no informative samples");
  return p * best;
}

double estimate_triangle_constant(const Problem& prob, const SampleSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const int N = prob.mesh->n_vertices();
  double best = 0.0;
  for (int i = 0; i < spec.count; ++i) {
    const FeFunction v = prob.fe(spec.radius * gaussian(rng, N));
    const VectorXd w1 = spec.radius * gaussian(rng, N);
    const VectorXd w2 = (i % 3 == 0) ? w1 : VectorXd(spec.radius * gaussian(rng, N));
    const double d1 = prob.bregman(v, prob.fe(w1));
    const double d2 = prob.bregman(v, prob.fe(w2));
    if (d1 + d2 <= 1e-14 * (1.0 + std::abs(prob.energy(v)))) continue;
    best = std::max(best, prob.bregman(v, prob.fe(w1 + w2)) / (d1 + d2));
  }
  return best;
}

OmegaThetaEstimate estimate_omega_theta(const Problem& prob, const SubspaceFamily& family,
                                        double M, double s_loc, const SampleSpec& spec) {
  OmegaThetaEstimate est;
  est.rho = s_loc;  // closed form for the power model
  std::mt19937_64 rng(spec.seed);
  const auto [u_ref, level] = level_set_center(prob, spec);
  const auto points = sample_level_set(prob, u_ref, level, spec, rng);

  double omega = 0.0;
  int idx = 0;
  for (const auto& v : points) {
    const int j = idx++ % family.n_subspaces();
    const Eigen::SparseMatrix<double> B = family.basis(j);
    const VectorXd w = B * VectorXd(spec.radius * gaussian(rng, static_cast<int>(B.cols())));
    const double dj = solver::inexact_model_dj(prob, w, M, s_loc);
    if (dj <= 1e-14) continue;
    omega = std::max(omega, prob.bregman(prob.fe(v), prob.fe(w)) / dj);
  }
  est.omega = omega;
  est.theta = omega <= 1.0 ? 1.0 : (est.rho - omega) / (est.rho - 1.0);
  est.valid = omega < est.rho;
  return est;
}

nlohmann::json ConstantEstimates::to_json() const {
  return {{"c_k0", c_k0},
          {"mu_k0", mu_k0},
          {"omega", omega},
          {"rho", rho},
          {"theta", theta},
          {"omega_valid", omega_valid},
          {"c_tri", c_tri},
          {"c_q", c_q},
          {"sample_count", sample_count},
          {"seed", seed},
          {"estimates_are_proxies", true}};
}

BoundPoint bound_thm_conv_point(const RateParams& params, int n) {
  if (params.q <= 1.0) throw std::invalid_argument("bound_thm_conv: q must be > 1");
  if (params.zeta0 <= 0.0) return {0.0, "optimal"};
  const double T = params.c_k0 * std::pow(params.r0, params.q);
  const double lin = 1.0 - params.tau * (1.0 - 1.0 / params.q);
  double zeta = params.zeta0;
  int k = 0;
  while (k < n && zeta > T) {
    zeta *= lin;
    ++k;
  }
  if (k == n && zeta > T) return {zeta, "linear"};
  const double beta = params.q - 1.0;
  const double C = std::pow(params.q / params.tau, params.q - 1.0) * T;
  const int m = n - k;
  return {C / std::pow(m + std::pow(C / zeta, 1.0 / beta), beta), "sublinear"};
}

double bound_thm_conv(const RateParams& params, int n) {
  return bound_thm_conv_point(params, n).value;
}

BoundPoint bound_thm_conv_sharp_point(const RateParams& params, int n) {
  if (params.q <= 1.0) throw std::invalid_argument("bound_thm_conv_sharp: q must be > 1");
  if (params.p < params.q) throw std::invalid_argument("bound_thm_conv_sharp: requires p >= q");
  if (params.zeta0 <= 0.0) return {0.0, "optimal"};
  const double p = params.p, q = params.q;
  if (p == q) {
    const double factor =
        1.0 - params.tau * (1.0 - 1.0 / q) *
                  std::pow(std::min(1.0, params.mu_k0 / (q * params.c_k0)), 1.0 / (q - 1.0));
    return {std::pow(factor, n) * params.zeta0, "sharp-linear"};
  }
  const double T =
      std::pow(p / params.mu_k0, q / (p - q)) * std::pow(params.c_k0, p / (p - q));
  const double lin = 1.0 - params.tau * (1.0 - 1.0 / q);
  double zeta = params.zeta0;
  int k = 0;
  while (k < n && zeta > T) {
    zeta *= lin;
    ++k;
  }
  if (k == n && zeta > T) return {zeta, "linear"};
  const double beta = p * (q - 1.0) / (p - q);
  const double C = std::pow(p * q / ((p - q) * params.tau), beta) * T;
  const int m = n - k;
  return {C / std::pow(m + std::pow(C / zeta, 1.0 / beta), beta), "sublinear"};
}

double bound_thm_conv_sharp(const RateParams& params, int n) {
  return bound_thm_conv_sharp_point(params, n).value;
}

nlohmann::json EpsIndependenceReport::to_json() const {
  nlohmann::json j;
  j["eps_values"] = eps_values;
  j["iters_to_tol"] = iters;
  j["reached_tol"] = reached;
  j["ratio"] = ratio;
  j["kernel_assumption"] = kernel_assumption;
  if (kernel_assumption)
    j["pass"] = pass;
  else
    j["observation"] = "kernel decomposition assumption violated; no pass/fail";
  j["degradation_observed"] = degradation_observed;
  return j;
}

EpsIndependenceReport eps_independence_report(const std::map<double, solver::RunRecord>& records,
                                              double ratio_tol, bool kernel_assumption) {
  if (records.size() < 2)
    throw std::invalid_argument("eps_independence_report: need at least two eps values");
  EpsIndependenceReport rep;
  rep.kernel_assumption = kernel_assumption;
  int lo = INT32_MAX, hi = 0;
  bool all_reached = true;
  for (const auto& [eps, rec] : records) {
    rep.eps_values.push_back(eps);
    const int it = std::max(1, rec.iters_to_tol);
    rep.iters.push_back(it);
    rep.reached.push_back(rec.reached_tol);
    all_reached = all_reached && rec.reached_tol;
    lo = std::min(lo, it);
    hi = std::max(hi, it);
  }
  rep.ratio = static_cast<double>(hi) / lo;
  rep.pass = kernel_assumption && all_reached && rep.ratio <= ratio_tol;
  rep.degradation_observed = true;
  for (size_t i = 0; i + 1 < rep.iters.size(); ++i)
    if (rep.iters[i + 1] > rep.iters[i]) rep.degradation_observed = false;
  return rep;
}

}  // namespace ssc::theory
