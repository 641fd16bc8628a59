#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <memory>
#include <vector>

#include "json.hpp"

namespace ssc::fem {

struct Mesh;
using MeshPtr = std::shared_ptr<Mesh>;
using ConstMeshPtr = std::shared_ptr<const Mesh>;

/// Conforming P1 mesh of the unit interval (segments) or unit square
/// (right triangles, all cells split along the bottom-left to top-right
/// diagonal). Built-in constructors produce uniform, nested-refinable grids.
struct Mesh {
  int dim = 1;
  int resolution = 0;  // elements per axis
  Eigen::MatrixX2d vertices;  // column 1 unused in 1d
  std::vector<std::array<int, 3>> elements;  // {a, b, -1} for segments
  double h = 0.0;  // max element diameter
  ConstMeshPtr parent;  // the coarse mesh this one refines, if any

  // Precomputed per-element geometry. grads maps nodal values of an element
  // to the (constant) gradient of the P1 interpolant on it.
  std::vector<double> areas;
  std::vector<Eigen::Matrix<double, 2, 3>> grads;
  Eigen::SparseMatrix<double> mass;

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
  int verts_per_element() const { return dim == 1 ? 2 : 3; }
};

/// Coefficient vector on the P1 space of `space`, indexed by mesh vertices.
struct FeFunction {
  ConstMeshPtr space;
  Eigen::VectorXd coeffs;
};

/// Element of the dual space; pairing with an FeFunction is the euclidean
/// dot product of `values` with the coefficient vector.
struct DualVector {
  ConstMeshPtr space;
  Eigen::VectorXd values;
};

MeshPtr build_interval_mesh(int n_elems);
MeshPtr build_square_mesh(int n);

/// Returns the coarse mesh at resolution/factor and links `mesh->parent`
/// to it. Coarse vertices are a subset of the fine ones.
MeshPtr coarsen(const MeshPtr& mesh, int factor);

/// Index of the fine vertex coinciding with coarse vertex `cv`.
int coarse_to_fine_vertex(const Mesh& coarse, const Mesh& fine, int cv);

/// Gradient of the P1 interpolant of v on element e (constant per element).
Eigen::Vector2d element_gradient(const Mesh& mesh, const Eigen::VectorXd& coeffs, int e);

nlohmann::json mesh_to_json(const Mesh& mesh);

}  // namespace ssc::fem
