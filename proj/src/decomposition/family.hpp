#pragma once

#include "fem/mesh.hpp"
#include "problems/problem.hpp"

#include <optional>

namespace ssc::decomposition {

using fem::ConstMeshPtr;
using fem::FeFunction;
using fem::MeshPtr;

struct CoarseSpace {
  ConstMeshPtr mesh;
  Eigen::SparseMatrix<double> prolongation;  // nodal P1 interpolation, coarse -> fine
};

/// Overlapping two-level decomposition of a P1 space: local subspaces given
/// by vertex index sets (extension by zero through the other vertices), and
/// an optional coarse space. Subspace j's basis matrix has unit columns for
/// its index set; the coarse basis is the prolongation matrix.
struct SubspaceFamily {
  ConstMeshPtr mesh;
  std::vector<std::vector<int>> subspaces;  // local vertex index sets
  std::optional<CoarseSpace> coarse;
  double H = 1.0;           // subdomain diameter scale
  double delta = 0.0;       // overlap width, physical length
  int overlap_layers = 1;   // overlap width in mesh units
  int per_axis = 1;
  bool overlap_warning = false;  // a subdomain covers all of Omega

  // Piecewise-linear partition of unity subordinate to the cover:
  // theta.row(j) are the nodal values of theta_j; rows sum to 1.
  Eigen::MatrixXd theta;

  int n_local() const { return static_cast<int>(subspaces.size()); }
  int n_subspaces() const { return n_local() + (coarse ? 1 : 0); }
  bool is_coarse_index(int j) const { return coarse && j == n_local(); }
  /// Basis matrix of subspace j (coarse last when present).
  Eigen::SparseMatrix<double> basis(int j) const;

  nlohmann::json summary_json() const;
};

struct Coloring {
  std::vector<int> colors;  // per local subspace
  int n_colors = 0;
  double tau_lower = 1.0;   // 1 / (n_colors + coarse)
};

SubspaceFamily build_overlapping_dd(const ConstMeshPtr& mesh, int n_subdomains_per_axis,
                                    int overlap_layers);

SubspaceFamily add_coarse_space(SubspaceFamily family, const ConstMeshPtr& coarse);

Coloring color_subdomains(const SubspaceFamily& family);

/// Whether the kernel of the problem's semicoercive part splits into local
/// kernels of the decomposition (constants captured by the coarse space or
/// by a local space touching all of the boundary).
bool kernel_decomposition_check(const SubspaceFamily& family, const problems::Problem& prob);

/// Least-squares residual of representing w in the sum of the subspaces.
double covering_residual(const SubspaceFamily& family, const Eigen::VectorXd& w);

/// Splits w into one component per subspace (coarse last when present):
/// w0 a quasi-interpolation onto the coarse mesh, and w_j the nodal
/// interpolation of theta_j * (w - w0). Components sum to w exactly.
std::vector<FeFunction> construct_stable_decomposition(const SubspaceFamily& family,
                                                       const FeFunction& w);

}  // namespace ssc::decomposition
