#include "fem/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace ssc::fem {

namespace {

void finalize_geometry(Mesh& mesh) {
  const int ne = mesh.n_elements();
  mesh.areas.resize(ne);
  mesh.grads.resize(ne);
  std::vector<Eigen::Triplet<double>> trips;
  for (int e = 0; e < ne; ++e) {
    const auto& el = mesh.elements[e];
    Eigen::Matrix<double, 2, 3> G = Eigen::Matrix<double, 2, 3>::Zero();
    double area = 0.0;
    if (mesh.dim == 1) {
      const double x0 = mesh.vertices(el[0], 0);
      const double x1 = mesh.vertices(el[1], 0);
      const double len = x1 - x0;
      area = std::abs(len);
      G(0, 0) = -1.0 / len;
      G(0, 1) = 1.0 / len;
      // exact segment mass matrix
      trips.emplace_back(el[0], el[0], area / 3.0);
      trips.emplace_back(el[1], el[1], area / 3.0);
      trips.emplace_back(el[0], el[1], area / 6.0);
      trips.emplace_back(el[1], el[0], area / 6.0);
    } else {
      const Eigen::Vector2d a = mesh.vertices.row(el[0]);
      const Eigen::Vector2d b = mesh.vertices.row(el[1]);
      const Eigen::Vector2d c = mesh.vertices.row(el[2]);
      const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
      area = 0.5 * std::abs(det);
      // gradients of the three nodal basis functions
      G.col(0) = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det;
      G.col(1) = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det;
      G.col(2) = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          trips.emplace_back(el[i], el[j], area / 12.0 * (i == j ? 2.0 : 1.0));
    }
    mesh.areas[e] = area;
    mesh.grads[e] = G;
  }
  mesh.mass.resize(mesh.n_vertices(), mesh.n_vertices());
  mesh.mass.setFromTriplets(trips.begin(), trips.end());
}

}  // namespace

MeshPtr build_interval_mesh(int n_elems) {
  if (n_elems < 1) throw std::invalid_argument("build_interval_mesh: n_elems must be >= 1");
  auto mesh = std::make_shared<Mesh>();
  mesh->dim = 1;
  mesh->resolution = n_elems;
  mesh->h = 1.0 / n_elems;
  mesh->vertices.resize(n_elems + 1, 2);
  for (int i = 0; i <= n_elems; ++i) {
    mesh->vertices(i, 0) = static_cast<double>(i) / n_elems;
    mesh->vertices(i, 1) = 0.0;
  }
  mesh->elements.reserve(n_elems);
  for (int i = 0; i < n_elems; ++i) mesh->elements.push_back({i, i + 1, -1});
  finalize_geometry(*mesh);
  return mesh;
}

MeshPtr build_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_square_mesh: n must be >= 1");
  auto mesh = std::make_shared<Mesh>();
  mesh->dim = 2;
  mesh->resolution = n;
  mesh->h = std::sqrt(2.0) / n;
  const int nv = (n + 1) * (n + 1);
  mesh->vertices.resize(nv, 2);
  auto vid = [n](int ix, int iy) { return iy * (n + 1) + ix; };
  for (int iy = 0; iy <= n; ++iy)
    for (int ix = 0; ix <= n; ++ix) {
      mesh->vertices(vid(ix, iy), 0) = static_cast<double>(ix) / n;
      mesh->vertices(vid(ix, iy), 1) = static_cast<double>(iy) / n;
    }
  mesh->elements.reserve(2 * n * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const int v00 = vid(ix, iy), v10 = vid(ix + 1, iy);
      const int v01 = vid(ix, iy + 1), v11 = vid(ix + 1, iy + 1);
      mesh->elements.push_back({v00, v10, v11});
      mesh->elements.push_back({v00, v11, v01});
    }
  finalize_geometry(*mesh);
  return mesh;
}

MeshPtr coarsen(const MeshPtr& mesh, int factor) {
  if (!mesh) throw std::invalid_argument("coarsen: null mesh");
  if (factor < 1 || mesh->resolution % factor != 0)
    throw std::invalid_argument("coarsen: resolution not divisible by factor");
  MeshPtr coarse = mesh->dim == 1 ? build_interval_mesh(mesh->resolution / factor)
                                  : build_square_mesh(mesh->resolution / factor);
  mesh->parent = coarse;
  return coarse;
}

int coarse_to_fine_vertex(const Mesh& coarse, const Mesh& fine, int cv) {
  const int f = fine.resolution / coarse.resolution;
  if (coarse.dim == 1) return cv * f;
  const int nc = coarse.resolution;
  const int ix = cv % (nc + 1), iy = cv / (nc + 1);
  return iy * f * (fine.resolution + 1) + ix * f;
}

Eigen::Vector2d element_gradient(const Mesh& mesh, const Eigen::VectorXd& coeffs, int e) {
  const auto& el = mesh.elements[e];
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int k = 0; k < mesh.verts_per_element(); ++k) g += mesh.grads[e].col(k) * coeffs[el[k]];
  return g;
}

nlohmann::json mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["dim"] = mesh.dim;
  j["resolution"] = mesh.resolution;
  j["h"] = mesh.h;
  auto verts = nlohmann::json::array();
  for (int i = 0; i < mesh.n_vertices(); ++i) {
    if (mesh.dim == 1)
      verts.push_back({mesh.vertices(i, 0)});
    else
      verts.push_back({mesh.vertices(i, 0), mesh.vertices(i, 1)});
  }
  j["vertices"] = verts;
  auto elems = nlohmann::json::array();
  for (const auto& el : mesh.elements) {
    if (mesh.dim == 1)
      elems.push_back({el[0], el[1]});
    else
      elems.push_back({el[0], el[1], el[2]});
  }
  j["elements"] = elems;
  return j;
}

}  // namespace ssc::fem
