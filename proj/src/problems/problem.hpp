#pragma once

#include "fem/mesh.hpp"
#include "fem/norms.hpp"

namespace ssc::problems {

using fem::ConstMeshPtr;
using fem::DualVector;
using fem::FeFunction;

enum class ProblemKind { quadratic, slaplace, perturbed };

/// Derivatives of base(w)^{r/deg}, where base is a deg-homogeneous quantity
/// (the s-th power of the W^{1,s} seminorm, or a quadratic form). The hessian
/// is h_rank1 * gbase gbase^T + h_base * Hbase; callers reduce it to their
/// subspace instead of forming the dense rank-one term.
struct PowDiff {
  double value = 0.0;
  Eigen::VectorXd grad;
  double h_rank1 = 0.0;
  double h_base = 0.0;
  Eigen::VectorXd gbase;
  Eigen::SparseMatrix<double> Hbase;
};

/// Energy/gradient/Bregman/seminorm/kernel oracle bundle for a semicoercive
/// or nearly semicoercive problem on a P1 space.
class Problem {
 public:
  ProblemKind kind = ProblemKind::slaplace;
  double s = 2.0;    // gradient exponent (slaplace/perturbed)
  double eps = 0.0;  // perturbation weight (perturbed)
  DualVector f;
  Eigen::SparseMatrix<double> A;  // quadratic kind only
  std::vector<FeFunction> kernel_basis;   // kernel of F
  std::vector<FeFunction> kernel0_basis;  // kernel of the semicoercive part
  double p = 2.0;  // sharpness exponent
  double q = 2.0;  // smoothness exponent
  ConstMeshPtr mesh;

  double energy(const FeFunction& v) const;
  DualVector gradient(const FeFunction& v) const;
  /// Regularized hessian at v; gamma smooths |grad v| -> sqrt(|grad v|^2 + gamma^2)
  /// in the s-Laplacian terms (the energy and gradient stay exact).
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& v, double gamma) const;
  /// d_F(w; v) = F(v+w) - F(v) - <F'(v), w>
  double bregman(const FeFunction& v, const FeFunction& w) const;
  /// The problem's distinguished seminorm: W^{1,s} for slaplace/perturbed,
  /// sqrt(v^T A v) for quadratic.
  double seminorm(const FeFunction& v) const;
  bool check_compatibility() const;

  /// True when the energy is a quadratic form (quadratic kind, or s == 2),
  /// so local/global minimization reduces to one linear solve.
  bool is_globally_quadratic() const;

  /// Derivatives of |w|^r in the problem seminorm.
  PowDiff seminorm_pow_diff(const Eigen::VectorXd& w, double r, double reg) const;
  /// Derivatives of ||w||_{L2}^r.
  PowDiff l2_pow_diff(const Eigen::VectorXd& w, double r, double reg) const;

  FeFunction fe(Eigen::VectorXd coeffs) const { return FeFunction{mesh, std::move(coeffs)}; }

 private:
  void check_space(const FeFunction& v) const;
};

Problem make_quadratic(ConstMeshPtr mesh, Eigen::SparseMatrix<double> A, DualVector f,
                       std::vector<FeFunction> kernel_basis);
Problem make_slaplace(ConstMeshPtr mesh, double s, DualVector f);
Problem make_perturbed(ConstMeshPtr mesh, double s, double eps, DualVector f);

}  // namespace ssc::problems
