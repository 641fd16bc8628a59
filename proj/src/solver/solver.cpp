#include "solver/solver.hpp"

#include "common.hpp"
#include "solver/newton.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ssc::solver {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

double effective_gamma(const Problem& prob, const SolverConfig& cfg, const VectorXd& v) {
  if (cfg.newton_gamma > 0.0) return cfg.newton_gamma;
  if (prob.is_globally_quadratic()) return 0.0;
  return 1e-10 * (1.0 + prob.seminorm(prob.fe(v)));
}

// argmin over local coordinates c of F(v + B c), warm started at x0.
VectorXd exact_coords(const Problem& prob, const SpMat& B, const VectorXd& v,
                      const SolverConfig& cfg, VectorXd x0) {
  const double gamma = effective_gamma(prob, cfg, v);
  DenseObjective obj;
  obj.value = [&](const VectorXd& c) { return prob.energy(prob.fe(v + B * c)); };
  obj.grad = [&](const VectorXd& c) {
    return VectorXd(B.transpose() * prob.gradient(prob.fe(v + B * c)).values);
  };
  obj.hess = [&](const VectorXd& c) {
    return MatrixXd(B.transpose() * prob.hessian(v + B * c, gamma) * B);
  };
  NewtonOptions opts;
  opts.grad_tol_abs = cfg.inner_grad_tol * (1.0 + prob.gradient(prob.fe(v)).values.norm());
  opts.max_iters = cfg.inner_max_iters;
  const NewtonResult res = newton_minimize(obj, std::move(x0), opts);
  // never return anything worse than the zero correction (possible only when
  // the inner iteration fails from a bad warm start)
  if (!res.x.allFinite() || obj.value(res.x) > obj.value(VectorXd::Zero(res.x.size())))
    return VectorXd::Zero(res.x.size());
  return res.x;
}

// Minimizes <g, B c> + (M / s_loc) (|B c|^s_loc + ||B c||_L2^s_loc) over c.
VectorXd inexact_coords(const Problem& prob, const SpMat& B, const VectorXd& g,
                        double M, double s_loc, const SolverConfig& cfg, VectorXd x0) {
  const double reg = 1e-14;
  const VectorXd g_loc = B.transpose() * g;
  auto power_part = [&](const VectorXd& w) {
    return prob.seminorm_pow_diff(w, s_loc, 0.0).value + prob.l2_pow_diff(w, s_loc, 0.0).value;
  };
  if (x0.size() == 0 || x0.isZero(0.0)) {
    // scale of the first step along -g_loc is exact by s_loc-homogeneity
    const VectorXd d = -g_loc;
    const double t1 = g_loc.dot(d);
    const double D = (M / s_loc) * power_part(B * d);
    if (t1 < 0.0 && D > 0.0)
      x0 = std::pow(-t1 / (s_loc * D), 1.0 / (s_loc - 1.0)) * d;
    else
      x0 = VectorXd::Zero(g_loc.size());
  }
  DenseObjective obj;
  obj.value = [&](const VectorXd& c) {
    return g_loc.dot(c) + (M / s_loc) * power_part(B * c);
  };
  obj.grad = [&](const VectorXd& c) {
    const VectorXd w = B * c;
    const auto sd = prob.seminorm_pow_diff(w, s_loc, reg);
    const auto ld = prob.l2_pow_diff(w, s_loc, reg);
    return VectorXd(g_loc + (M / s_loc) * (B.transpose() * (sd.grad + ld.grad)));
  };
  obj.hess = [&](const VectorXd& c) {
    const VectorXd w = B * c;
    MatrixXd H = MatrixXd::Zero(c.size(), c.size());
    for (const auto& pd : {prob.seminorm_pow_diff(w, s_loc, reg), prob.l2_pow_diff(w, s_loc, reg)}) {
      const VectorXd gb = B.transpose() * pd.gbase;
      H += pd.h_rank1 * (gb * gb.transpose()) + pd.h_base * MatrixXd(B.transpose() * pd.Hbase * B);
    }
    return MatrixXd((M / s_loc) * H);
  };
  NewtonOptions opts;
  opts.grad_tol_abs = cfg.inner_grad_tol;
  opts.max_iters = cfg.inner_max_iters;
  const NewtonResult res = newton_minimize(obj, std::move(x0), opts);
  // c = 0 has model value 0; a failed inner solve must not leave this feasible
  // fallback, which keeps every outer step energy-safe
  if (!res.x.allFinite() || obj.value(res.x) > 0.0) return VectorXd::Zero(g_loc.size());
  return res.x;
}

// Cached min-norm least-squares solvers for the constant local Hessian blocks
// of a quadratic energy; handles the singular coarse block of a pure Neumann
// problem without any shift.
struct QuadCache {
  std::vector<SpMat> basis;
  std::vector<Eigen::CompleteOrthogonalDecomposition<MatrixXd>> dec;

  QuadCache(const Problem& prob, const SubspaceFamily& family) {
    const SpMat H = prob.hessian(VectorXd::Zero(prob.mesh->n_vertices()), 0.0);
    for (int j = 0; j < family.n_subspaces(); ++j) {
      basis.push_back(family.basis(j));
      const MatrixXd Hl = MatrixXd(basis[j].transpose() * H * basis[j]);
      dec.emplace_back(Hl);
    }
  }

  VectorXd coords(int j, const VectorXd& g) const {
    return dec[j].solve(VectorXd(-basis[j].transpose() * g));
  }
};

MatrixXd kernel_frame(const Problem& prob) {
  if (prob.kernel_basis.empty()) return MatrixXd(prob.mesh->n_vertices(), 0);
  MatrixXd K(prob.mesh->n_vertices(), static_cast<int>(prob.kernel_basis.size()));
  for (int k = 0; k < K.cols(); ++k) K.col(k) = prob.kernel_basis[k].coeffs;
  const Eigen::HouseholderQR<MatrixXd> qr(K);
  return MatrixXd(qr.householderQ()) .leftCols(K.cols());
}

// Solves H x = rhs for a symmetric positive semidefinite sparse H whose
// kernel is spanned by the columns of K (rhs assumed in the range): factor a
// slightly shifted matrix once and refine the residual away.
VectorXd semidefinite_solve(const SpMat& H, VectorXd rhs, const MatrixXd& K) {
  auto project = [&](VectorXd& r) {
    if (K.cols() > 0) r -= K * (K.transpose() * r);
  };
  project(rhs);
  const double scale = std::max(H.diagonal().cwiseAbs().mean(), 1e-300);
  SpMat Hs = H;
  const double sigma = (K.cols() > 0) ? 1e-10 * scale : 0.0;
  if (sigma > 0.0) {
    SpMat I(H.rows(), H.cols());
    I.setIdentity();
    Hs = H + sigma * I;
  }
  Eigen::SimplicialLDLT<SpMat> ldlt(Hs);
  if (ldlt.info() != Eigen::Success) {
    SpMat I(H.rows(), H.cols());
    I.setIdentity();
    ldlt.compute(SpMat(H + 1e-8 * scale * I));
    if (ldlt.info() != Eigen::Success) throw NumericalError("sparse factorization failed");
  }
  VectorXd x = VectorXd::Zero(H.rows());
  const double tol = 1e-14 * std::max(1.0, rhs.norm());
  for (int it = 0; it < 100; ++it) {
    VectorXd r = rhs - H * x;
    project(r);
    if (r.norm() <= tol) break;
    x += ldlt.solve(r);
    project(x);
  }
  return x;
}

SpMat stiffness_s2(const fem::Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  const int nv = mesh.verts_per_element();
  for (int e = 0; e < mesh.n_elements(); ++e)
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        trips.emplace_back(mesh.elements[e][i], mesh.elements[e][j],
                           mesh.areas[e] * mesh.grads[e].col(i).dot(mesh.grads[e].col(j)));
  SpMat K(mesh.n_vertices(), mesh.n_vertices());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

void remove_mean(const Problem& prob, VectorXd& u) {
  if (prob.kernel_basis.empty()) return;
  const VectorXd m = fem::load_of_one(*prob.mesh);
  u -= (m.dot(u) / m.sum()) * VectorXd::Ones(u.size());
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

RunRecord run_common(const Problem& prob, const SubspaceFamily& family, const SolverConfig& cfg,
                     const FeFunction& u0, bool sequential) {
  if (family.mesh.get() != prob.mesh.get())
    throw std::invalid_argument("run: decomposition and problem live on different meshes");
  if (!prob.check_compatibility())
    throw PreconditionError("run: load is incompatible with the energy kernel (unbounded below)");
  if (!prob.kernel_basis.empty() && !decomposition::kernel_decomposition_check(family, prob))
    throw PreconditionError("run: the energy kernel does not decompose into the subspaces");

  const auto coloring = decomposition::color_subdomains(family);
  double tau = 1.0;
  if (!sequential) {
    tau = cfg.tau < 0.0 ? coloring.tau_lower : cfg.tau;
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("run: step size must lie in (0, 1]");
    if (tau > coloring.tau_lower + 1e-12 && !cfg.override_tau)
      throw ConfigError("run: step size exceeds 1/(n_colors + coarse); set override_tau to force");
  }

  const FeFunction u_ref = global_newton_oracle(prob, u0, 1e-12);
  const double f_ref = prob.energy(u_ref);

  RunRecord rec;
  rec.tau_used = tau;
  rec.f_ref = f_ref;
  rec.f_ref_from_oracle = true;
  rec.u_ref = u_ref;

  VectorXd u = u0.coeffs;
  double F = prob.energy(prob.fe(u));
  rec.energies.push_back(F);
  const double zeta0 = std::max(0.0, F - f_ref);
  rec.zetas.push_back(zeta0);
  rec.seminorm_errors.push_back(prob.seminorm(prob.fe(u - u_ref.coeffs)));
  rec.wall_ms.push_back(0.0);
  rec.iterates.push_back(u);

  const int n_sub = family.n_subspaces();
  std::vector<SpMat> basis;
  for (int j = 0; j < n_sub; ++j) basis.push_back(family.basis(j));
  std::optional<QuadCache> cache;
  if (prob.is_globally_quadratic() && cfg.local_kind == LocalKind::exact)
    cache.emplace(prob, family);
  std::vector<VectorXd> warm(n_sub);

  const double zeta_floor = 1e-14 * (1.0 + std::abs(f_ref));
  rec.reached_tol = rec.zetas[0] <= std::max(cfg.outer_tol * zeta0, zeta_floor);

  for (int n = 0; n < cfg.max_outer_iters && !rec.reached_tol; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    auto correction = [&](int j, const VectorXd& v) {
      VectorXd c;
      if (cfg.local_kind == LocalKind::inexact_power) {
        const VectorXd g = prob.gradient(prob.fe(v)).values;
        c = inexact_coords(prob, basis[j], g, cfg.inexact_M, cfg.inexact_s, cfg, warm[j]);
      } else if (cache) {
        c = cache->coords(j, prob.gradient(prob.fe(v)).values);
      } else {
        VectorXd x0 = warm[j].size() ? warm[j] : VectorXd::Zero(basis[j].cols());
        c = exact_coords(prob, basis[j], v, cfg, std::move(x0));
      }
      warm[j] = c;
      return VectorXd(basis[j] * c);
    };
    auto log_step = [&](const VectorXd& v, const VectorXd& w) {
      if (!cfg.log_local_steps) return;
      LocalStepLog log;
      log.decrease = prob.energy(prob.fe(v)) - prob.energy(prob.fe(v + w));
      if (cfg.local_kind == LocalKind::inexact_power) {
        // <d_j'(w), w> = s_loc d_j(w) by homogeneity
        log.dj_prime_pairing =
            cfg.inexact_s * inexact_model_dj(prob, w, cfg.inexact_M, cfg.inexact_s);
      } else {
        log.dj_prime_pairing =
            (prob.gradient(prob.fe(v + w)).values - prob.gradient(prob.fe(v)).values).dot(w);
      }
      rec.local_log.push_back(log);
    };

    if (sequential) {
      for (int j = 0; j < n_sub; ++j) {
        const VectorXd w = correction(j, u);
        log_step(u, w);
        u += w;
      }
    } else {
      VectorXd sum = VectorXd::Zero(u.size());
      for (int j = 0; j < n_sub; ++j) {
        const VectorXd w = correction(j, u);
        log_step(u, w);
        sum += w;
      }
      u += tau * sum;
    }

    const double F_new = prob.energy(prob.fe(u));
    if (!std::isfinite(F_new) || F_new > F + 1e-12 * (1.0 + std::abs(F)))
      throw NumericalError("run: energy increased beyond the round-off guard");
    F = F_new;
    rec.energies.push_back(F);
    rec.zetas.push_back(std::max(0.0, F - f_ref));
    rec.seminorm_errors.push_back(prob.seminorm(prob.fe(u - u_ref.coeffs)));
    rec.wall_ms.push_back(elapsed_ms(t0));
    rec.iterates.push_back(u);
    rec.iters_to_tol = n + 1;
    rec.reached_tol = rec.zetas.back() <= std::max(cfg.outer_tol * zeta0, zeta_floor);
  }

  rec.r0_empirical =
      *std::max_element(rec.seminorm_errors.begin(), rec.seminorm_errors.end());
  rec.final_iterate = prob.fe(u);
  return rec;
}

}  // namespace

FeFunction local_solve_exact(const Problem& prob, const SubspaceFamily& family, int j,
                             const FeFunction& v, const SolverConfig& cfg) {
  const SpMat B = family.basis(j);
  VectorXd c;
  if (prob.is_globally_quadratic()) {
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> dec(
        MatrixXd(B.transpose() * prob.hessian(v.coeffs, 0.0) * B));
    c = dec.solve(VectorXd(-B.transpose() * prob.gradient(v).values));
  } else {
    c = exact_coords(prob, B, v.coeffs, cfg, VectorXd::Zero(B.cols()));
  }
  return prob.fe(B * c);
}

FeFunction local_solve_inexact_power(const Problem& prob, const SubspaceFamily& family, int j,
                                     const FeFunction& v, double M, double s_loc,
                                     const SolverConfig& cfg) {
  const SpMat B = family.basis(j);
  const VectorXd g = prob.gradient(v).values;
  const VectorXd c = inexact_coords(prob, B, g, M, s_loc, cfg, VectorXd());
  return prob.fe(B * c);
}

double inexact_model_dj(const Problem& prob, const Eigen::VectorXd& w, double M, double s_loc) {
  return (M / s_loc) *
         (prob.seminorm_pow_diff(w, s_loc, 0.0).value + prob.l2_pow_diff(w, s_loc, 0.0).value);
}

RunRecord run_psc(const Problem& prob, const SubspaceFamily& family, const SolverConfig& cfg,
                  const FeFunction& u0) {
  return run_common(prob, family, cfg, u0, false);
}

RunRecord run_ssc(const Problem& prob, const SubspaceFamily& family, const SolverConfig& cfg,
                  const FeFunction& u0) {
  return run_common(prob, family, cfg, u0, true);
}

FeFunction global_newton_oracle(const Problem& prob, const FeFunction& u0, double tol) {
  const MatrixXd K = kernel_frame(prob);
  auto project = [&](VectorXd& g) {
    if (K.cols() > 0) g -= K * (K.transpose() * g);
  };
  const double fscale = 1.0 + prob.f.values.norm();
  VectorXd u = u0.coeffs;

  if (prob.is_globally_quadratic()) {
    const SpMat H = prob.hessian(u, 0.0);
    VectorXd g = prob.gradient(prob.fe(u)).values;
    u += semidefinite_solve(H, -g, K);
    remove_mean(prob, u);
    return prob.fe(std::move(u));
  }

  {
    // warm start from the s = 2 surrogate energy
    SpMat K2 = stiffness_s2(*prob.mesh);
    if (prob.kind == problems::ProblemKind::perturbed) K2 = K2 + prob.eps * prob.mesh->mass;
    u = semidefinite_solve(K2, prob.f.values, K);
  }

  const SpMat I = [&] {
    SpMat m(u.size(), u.size());
    m.setIdentity();
    return m;
  }();
  double lam = 1e-12;
  bool converged = false;
  // for s < 2 the hessian degenerates where the gradient of the iterate
  // vanishes; past this residual the energy is already converged to O(g^2)
  // and the regularized Newton model can cease to make progress
  const double stall_tol = 1e-7 * fscale;
  double best_gnorm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 5000; ++it) {
    VectorXd g = prob.gradient(prob.fe(u)).values;
    project(g);
    const double gnorm = g.norm();
    best_gnorm = std::min(best_gnorm, gnorm);
    if (gnorm <= tol * fscale) {
      converged = true;
      break;
    }
    const double gamma = prob.s < 2.0 ? std::clamp(gnorm, 1e-9, 1e-4) : 0.0;
    const SpMat H = prob.hessian(u, gamma);
    const double scale = std::max(H.diagonal().cwiseAbs().mean(), 1e-300);
    const double F = prob.energy(prob.fe(u));
    bool stepped = false;
    for (int tries = 0; tries < 40 && !stepped; ++tries) {
      Eigen::SimplicialLDLT<SpMat> ldlt(SpMat(H + lam * scale * I));
      if (ldlt.info() == Eigen::Success) {
        VectorXd p = ldlt.solve(-g);
        project(p);
        const double slope = g.dot(p);
        if (p.allFinite() && slope < 0.0) {
          double alpha = 1.0;
          while (alpha > 1e-13) {
            const double Ft = prob.energy(prob.fe(u + alpha * p));
            if (std::isfinite(Ft) && Ft <= F + 1e-4 * alpha * slope) {
              u += alpha * p;
              stepped = true;
              break;
            }
            alpha *= 0.5;
          }
          if (stepped) {
            lam = alpha == 1.0 ? std::max(lam * 0.25, 1e-12) : lam * 2.0;
            break;
          }
        }
      }
      lam = std::min(lam * 10.0, 1e12);
    }
    if (!stepped) {
      if (gnorm <= stall_tol) {
        converged = true;
        break;
      }
      throw NumericalError("reference solve stalled");
    }
  }
  if (!converged && best_gnorm <= stall_tol) converged = true;
  if (!converged) throw NumericalError("reference solve did not reach the requested tolerance");
  remove_mean(prob, u);
  return prob.fe(std::move(u));
}

bool descent_check(const RunRecord& record) {
  for (size_t n = 0; n + 1 < record.energies.size(); ++n)
    if (record.energies[n + 1] > record.energies[n] + 1e-12 * (1.0 + std::abs(record.energies[n])))
      return false;
  return true;
}

nlohmann::json record_summary_json(const RunRecord& record) {
  nlohmann::json j;
  j["energies"] = record.energies;
  j["zetas"] = record.zetas;
  j["seminorm_errors"] = record.seminorm_errors;
  j["wall_times_ms"] = record.wall_ms;
  j["f_ref"] = record.f_ref;
  j["f_ref_from_oracle"] = record.f_ref_from_oracle;
  j["r0_empirical"] = record.r0_empirical;
  j["iters_to_tol"] = record.iters_to_tol;
  j["reached_tol"] = record.reached_tol;
  j["tau_used"] = record.tau_used;
  if (!record.local_log.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& log : record.local_log)
      arr.push_back({{"decrease", log.decrease}, {"dj_prime_pairing", log.dj_prime_pairing}});
    j["local_steps"] = arr;
  }
  return j;
}

std::string record_to_csv(const RunRecord& record) {
  std::string out = "n,F,zeta,seminorm_err,wall_ms\n";
  char buf[256];
  for (size_t n = 0; n < record.energies.size(); ++n) {
    // wall_ms stays 0 in the CSV so identical runs are bit-identical;
    // measured times live in the JSON summary
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,0\n", n, record.energies[n],
                  record.zetas[n], record.seminorm_errors[n]);
    out += buf;
  }
  return out;
}

}  // namespace ssc::solver
