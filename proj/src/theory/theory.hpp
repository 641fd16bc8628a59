#pragma once

#include "decomposition/family.hpp"
#include "problems/problem.hpp"
#include "solver/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace ssc::theory {

using decomposition::SubspaceFamily;
using fem::FeFunction;
using problems::Problem;

enum class NormKind { l2, eps_q };

/// Split v = phi + xi with phi the best kernel approximation in the chosen
/// norm; xi then satisfies <J xi, kernel> = 0 up to the minimization
/// tolerance, J being the gradient of half the squared norm.
struct DualityDecomposition {
  FeFunction phi;
  FeFunction xi;
  NormKind norm_kind = NormKind::l2;
  double orth_residual = 0.0;
};

/// The norm behind NormKind for this problem: L2, or the eps-weighted
/// combination (|v|^q + eps ||v||_L2^q)^{1/q} with the problem's seminorm,
/// q, and eps (eps = 1 when the problem has none).
double decomposition_norm(const Problem& prob, NormKind kind, const FeFunction& v);

DualityDecomposition duality_decompose(const FeFunction& v, const Problem& prob, NormKind kind);

/// |<J xi, phi>| / (||xi|| ||phi|| + tiny); 0 when either part vanishes.
double verify_orthogonality(const DualityDecomposition& dec, const Problem& prob);

struct SampleSpec {
  int count = 100;
  std::uint64_t seed = 1;
  double radius = 1.0;
  /// Defines the level set {v : F(v) <= F(u0)}; zero function when absent.
  std::optional<FeFunction> u0;
  /// Extra level-set points (e.g. solver iterates) mixed into the sample.
  std::vector<FeFunction> trajectory;
};

/// Empirical proxy for the stable-decomposition constant: q times the max
/// sampled ratio of summed local Bregman distances (via the constructive
/// decomposition) to the q-th power of the seminorm (or of the eps-weighted
/// norm for the perturbed kind).
double estimate_ck0(const Problem& prob, const SubspaceFamily& family, const SampleSpec& spec);

/// Empirical proxy for the sharpness constant: p times the min sampled ratio
/// (F(v) - F(u)) / |v - u|^p over the level set.
double estimate_muk0(const Problem& prob, const FeFunction& oracle_u, const SampleSpec& spec);

/// Max sampled d_F(w1 + w2; v) / (d_F(w1; v) + d_F(w2; v)); every third
/// sample takes w1 = w2, where the quadratic ratio attains its sup of 2.
double estimate_triangle_constant(const Problem& prob, const SampleSpec& spec);

struct OmegaThetaEstimate {
  double omega = 1.0;
  double rho = 2.0;    // = s_loc for the power model (closed form)
  double theta = 1.0;  // 1 if omega <= 1, else (rho - omega)/(rho - 1)
  bool valid = true;   // false when omega >= rho (no damping guarantee)
};

OmegaThetaEstimate estimate_omega_theta(const Problem& prob, const SubspaceFamily& family,
                                        double M, double s_loc, const SampleSpec& spec);

struct ConstantEstimates {
  double c_k0 = 0.0;
  double mu_k0 = 0.0;
  double omega = 1.0;
  double rho = 2.0;
  double theta = 1.0;
  bool omega_valid = true;
  double c_tri = 0.0;
  double c_q = 0.0;  // 2^q + 1
  int sample_count = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct RateParams {
  double p = 2.0;
  double q = 2.0;
  double tau = 0.2;
  double c_k0 = 1.0;
  double mu_k0 = 1.0;
  double r0 = 1.0;
  double zeta0 = 1.0;
};

struct BoundPoint {
  double value = 0.0;
  const char* branch = "linear";
};

/// Energy-gap bound without sharpness: linear factor (1 - tau(1 - 1/q))
/// while the gap exceeds c_k0 r0^q, then the sublinear envelope with
/// beta = q - 1, C = (q/tau)^{q-1} c_k0 r0^q anchored where it crossed.
BoundPoint bound_thm_conv_point(const RateParams& params, int n);
double bound_thm_conv(const RateParams& params, int n);

/// Sharp-case bound: p = q gives a pure linear rate with factor
/// 1 - tau(1 - 1/q) min{1, mu/(q c_k0)}^{1/(q-1)}; p > q gives the linear
/// factor above the threshold (p/mu)^{q/(p-q)} c_k0^{p/(p-q)} and then the
/// sublinear envelope with beta = p(q-1)/(p-q).
BoundPoint bound_thm_conv_sharp_point(const RateParams& params, int n);
double bound_thm_conv_sharp(const RateParams& params, int n);

struct EpsIndependenceReport {
  std::vector<double> eps_values;  // ascending
  std::vector<int> iters;          // iters_to_tol per eps
  std::vector<bool> reached;
  double ratio = 1.0;  // max/min iteration count
  bool kernel_assumption = true;
  bool pass = false;                  // meaningful only when kernel_assumption
  bool degradation_observed = false;  // iters nonincreasing in eps

  nlohmann::json to_json() const;
};

EpsIndependenceReport eps_independence_report(const std::map<double, solver::RunRecord>& records,
                                              double ratio_tol, bool kernel_assumption);

}  // namespace ssc::theory
