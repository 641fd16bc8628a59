#include "problems/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace ssc::problems {

namespace {

using fem::Mesh;

// Sum over elements of |grad w|^s * area and its derivatives. `gamma`
// regularizes the magnitude in first/second derivatives only.
struct SlapTerm {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::SparseMatrix<double> hess;
};

double slap_value(const Mesh& mesh, const Eigen::VectorXd& w, double s) {
  return fem::seminorm_w1s_pow(w, mesh, s);
}

Eigen::VectorXd slap_grad(const Mesh& mesh, const Eigen::VectorXd& w, double s) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh.n_vertices());
  const int nv = mesh.verts_per_element();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const Eigen::Vector2d ge = fem::element_gradient(mesh, w, e);
    const double mag = ge.norm();
    if (mag == 0.0) continue;  // |t|^{s-2} t extends by 0 for s > 1
    const double coef = s * std::pow(mag, s - 2.0) * mesh.areas[e];
    for (int k = 0; k < nv; ++k)
      g[mesh.elements[e][k]] += coef * mesh.grads[e].col(k).dot(ge);
  }
  return g;
}

Eigen::SparseMatrix<double> slap_hess(const Mesh& mesh, const Eigen::VectorXd& w, double s,
                                      double gamma) {
  std::vector<Eigen::Triplet<double>> trips;
  const int nv = mesh.verts_per_element();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const Eigen::Vector2d ge = fem::element_gradient(mesh, w, e);
    const double m2 = ge.squaredNorm() + gamma * gamma;
    // s = 2 is the plain stiffness matrix, independent of w; elsewhere a
    // vanishing gradient contributes nothing (s > 2) or is left to the
    // caller's regularization gamma (s < 2)
    if (m2 == 0.0 && s != 2.0) continue;
    const double mag = std::sqrt(m2);
    const double c1 = s * (s == 2.0 ? 1.0 : std::pow(mag, s - 2.0)) * mesh.areas[e];
    const double c2 = s == 2.0 ? 0.0 : s * (s - 2.0) * std::pow(mag, s - 4.0) * mesh.areas[e];
    for (int i = 0; i < nv; ++i) {
      const double gi = mesh.grads[e].col(i).dot(ge);
      for (int j = 0; j < nv; ++j) {
        const double gj = mesh.grads[e].col(j).dot(ge);
        double val = c1 * mesh.grads[e].col(i).dot(mesh.grads[e].col(j)) + c2 * gi * gj;
        trips.emplace_back(mesh.elements[e][i], mesh.elements[e][j], val);
      }
    }
  }
  Eigen::SparseMatrix<double> H(mesh.n_vertices(), mesh.n_vertices());
  H.setFromTriplets(trips.begin(), trips.end());
  return H;
}

}  // namespace

void Problem::check_space(const FeFunction& v) const {
  if (v.space.get() != mesh.get())
    throw std::invalid_argument("Problem: FeFunction lives on a different mesh");
}

double Problem::energy(const FeFunction& v) const {
  check_space(v);
  switch (kind) {
    case ProblemKind::quadratic:
      return 0.5 * v.coeffs.dot(A * v.coeffs) - f.values.dot(v.coeffs);
    case ProblemKind::slaplace:
      return slap_value(*mesh, v.coeffs, s) / s - f.values.dot(v.coeffs);
    case ProblemKind::perturbed:
      return slap_value(*mesh, v.coeffs, s) / s +
             0.5 * eps * v.coeffs.dot(mesh->mass * v.coeffs) - f.values.dot(v.coeffs);
  }
  return 0.0;
}

DualVector Problem::gradient(const FeFunction& v) const {
  check_space(v);
  Eigen::VectorXd g;
  switch (kind) {
    case ProblemKind::quadratic:
      g = A * v.coeffs - f.values;
      break;
    case ProblemKind::slaplace:
      g = slap_grad(*mesh, v.coeffs, s) / s - f.values;
      break;
    case ProblemKind::perturbed:
      g = slap_grad(*mesh, v.coeffs, s) / s + eps * (mesh->mass * v.coeffs) - f.values;
      break;
  }
  return DualVector{mesh, std::move(g)};
}

Eigen::SparseMatrix<double> Problem::hessian(const Eigen::VectorXd& v, double gamma) const {
  switch (kind) {
    case ProblemKind::quadratic:
      return A;
    case ProblemKind::slaplace:
      return Eigen::SparseMatrix<double>(slap_hess(*mesh, v, s, gamma) / s);
    case ProblemKind::perturbed:
      return Eigen::SparseMatrix<double>(slap_hess(*mesh, v, s, gamma) / s + eps * mesh->mass);
  }
  return {};
}

double Problem::bregman(const FeFunction& v, const FeFunction& w) const {
  check_space(v);
  check_space(w);
  const FeFunction vw = fe(v.coeffs + w.coeffs);
  return energy(vw) - energy(v) - gradient(v).values.dot(w.coeffs);
}

double Problem::seminorm(const FeFunction& v) const {
  if (kind == ProblemKind::quadratic)
    return std::sqrt(std::max(0.0, v.coeffs.dot(A * v.coeffs)));
  return fem::seminorm_w1s(v, s);
}

bool Problem::check_compatibility() const {
  for (const auto& phi : kernel_basis) {
    const double pairing = f.values.dot(phi.coeffs);
    const double scale = std::max(1.0, f.values.norm() * phi.coeffs.norm());
    if (std::abs(pairing) > 1e-12 * scale) return false;
  }
  return true;
}

bool Problem::is_globally_quadratic() const {
  return kind == ProblemKind::quadratic || s == 2.0;
}

PowDiff Problem::seminorm_pow_diff(const Eigen::VectorXd& w, double r, double reg) const {
  PowDiff out;
  double base, deg;
  if (kind == ProblemKind::quadratic) {
    base = std::max(0.0, w.dot(A * w));
    deg = 2.0;
    out.gbase = 2.0 * (A * w);
    out.Hbase = 2.0 * A;
  } else {
    base = slap_value(*mesh, w, s);
    deg = s;
    out.gbase = slap_grad(*mesh, w, s);
    out.Hbase = slap_hess(*mesh, w, s, std::sqrt(reg));
  }
  const double e = r / deg;
  out.value = std::pow(base, e);
  const double b = base + reg;
  out.grad = e * std::pow(b, e - 1.0) * out.gbase;
  out.h_rank1 = e * (e - 1.0) * std::pow(b, e - 2.0);
  out.h_base = e * std::pow(b, e - 1.0);
  return out;
}

PowDiff Problem::l2_pow_diff(const Eigen::VectorXd& w, double r, double reg) const {
  PowDiff out;
  const double base = std::max(0.0, w.dot(mesh->mass * w));
  out.gbase = 2.0 * (mesh->mass * w);
  out.Hbase = 2.0 * mesh->mass;
  const double e = r / 2.0;
  out.value = std::pow(base, e);
  const double b = base + reg;
  out.grad = e * std::pow(b, e - 1.0) * out.gbase;
  out.h_rank1 = e * (e - 1.0) * std::pow(b, e - 2.0);
  out.h_base = e * std::pow(b, e - 1.0);
  return out;
}

namespace {

FeFunction constant_one(const ConstMeshPtr& mesh) {
  return FeFunction{mesh, Eigen::VectorXd::Ones(mesh->n_vertices())};
}

}  // namespace

Problem make_quadratic(ConstMeshPtr mesh, Eigen::SparseMatrix<double> A, DualVector f,
                       std::vector<FeFunction> kernel_basis) {
  Problem prob;
  prob.kind = ProblemKind::quadratic;
  prob.mesh = mesh;
  prob.A = std::move(A);
  prob.f = std::move(f);
  prob.kernel_basis = kernel_basis;
  prob.kernel0_basis = std::move(kernel_basis);
  prob.p = prob.q = 2.0;
  return prob;
}

Problem make_slaplace(ConstMeshPtr mesh, double s, DualVector f) {
  if (s <= 1.0) throw std::invalid_argument("make_slaplace: s must be > 1");
  Problem prob;
  prob.kind = ProblemKind::slaplace;
  prob.mesh = mesh;
  prob.s = s;
  prob.f = std::move(f);
  prob.kernel_basis = {constant_one(mesh)};
  prob.kernel0_basis = prob.kernel_basis;
  prob.p = std::max(s, 2.0);
  prob.q = std::min(s, 2.0);
  return prob;
}

Problem make_perturbed(ConstMeshPtr mesh, double s, double eps, DualVector f) {
  if (s <= 1.0) throw std::invalid_argument("make_perturbed: s must be > 1");
  if (eps <= 0.0) throw std::invalid_argument("make_perturbed: eps must be > 0");
  Problem prob;
  prob.kind = ProblemKind::perturbed;
  prob.mesh = mesh;
  prob.s = s;
  prob.eps = eps;
  prob.f = std::move(f);
  prob.kernel_basis = {};  // F is coercive; only the semicoercive part is flat
  prob.kernel0_basis = {constant_one(mesh)};
  prob.p = std::max(s, 2.0);
  prob.q = std::min(s, 2.0);
  return prob;
}

}  // namespace ssc::problems
