#include "decomposition/family.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace ssc::decomposition {

namespace {

double clamp01(double t) { return std::min(1.0, std::max(0.0, t)); }

// One-dimensional partition-of-unity ramp for subdomain j of N on a uniform
// axis with m cells per subdomain and overlap of ov cells per side: 1 on the
// nonoverlapped core, linear across the shared 2*ov band, 0 outside.
double axis_ramp(int i, int j, int m, int ov, int n_axis_subdomains) {
  double t = 1.0;
  if (j > 0) t *= clamp01((i - (j * m - ov)) / (2.0 * ov));
  if (j < n_axis_subdomains - 1) t *= clamp01(((j + 1) * m + ov - i) / (2.0 * ov));
  return t;
}

// Vertex index i belongs to the local space iff it is strictly inside the
// extended cell range [lo, hi], or sits on the part of its boundary that
// coincides with the domain boundary.
bool axis_in_subspace(int i, int lo, int hi, int n) {
  if (i < lo || i > hi) return false;
  if (i == lo && lo > 0) return false;
  if (i == hi && hi < n) return false;
  return true;
}

}  // namespace

Eigen::SparseMatrix<double> SubspaceFamily::basis(int j) const {
  if (is_coarse_index(j)) return coarse->prolongation;
  const auto& idx = subspaces.at(j);
  Eigen::SparseMatrix<double> B(mesh->n_vertices(), static_cast<int>(idx.size()));
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < static_cast<int>(idx.size()); ++k) trips.emplace_back(idx[k], k, 1.0);
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

nlohmann::json SubspaceFamily::summary_json() const {
  nlohmann::json j;
  j["n_local"] = n_local();
  j["has_coarse"] = static_cast<bool>(coarse);
  j["H"] = H;
  j["delta"] = delta;
  j["overlap_layers"] = overlap_layers;
  j["overlap_warning"] = overlap_warning;
  return j;
}

SubspaceFamily build_overlapping_dd(const ConstMeshPtr& mesh, int n_subdomains_per_axis,
                                    int overlap_layers) {
  const int n = mesh->resolution;
  const int N_axis = n_subdomains_per_axis;
  if (N_axis < 1 || n % N_axis != 0)
    throw std::invalid_argument("build_overlapping_dd: resolution not divisible by subdomain count");
  if (overlap_layers < 1)
    throw std::invalid_argument("build_overlapping_dd: overlap_layers must be >= 1");
  const int m = n / N_axis;
  const int ov = overlap_layers;

  SubspaceFamily family;
  family.mesh = mesh;
  family.H = 1.0 / N_axis;
  family.delta = overlap_layers * mesh->h;
  family.overlap_layers = overlap_layers;
  family.per_axis = N_axis;

  const int n_sub = mesh->dim == 1 ? N_axis : N_axis * N_axis;
  family.theta = Eigen::MatrixXd::Zero(n_sub, mesh->n_vertices());

  for (int jy = 0; jy < (mesh->dim == 1 ? 1 : N_axis); ++jy) {
    for (int jx = 0; jx < N_axis; ++jx) {
      const int j = jy * N_axis + jx;
      const int lox = std::max(0, jx * m - ov), hix = std::min(n, (jx + 1) * m + ov);
      const int loy = std::max(0, jy * m - ov), hiy = std::min(n, (jy + 1) * m + ov);
      bool covers_all = (lox == 0 && hix == n);
      std::vector<int> idx;
      if (mesh->dim == 1) {
        for (int i = 0; i <= n; ++i) {
          if (!axis_in_subspace(i, lox, hix, n)) continue;
          idx.push_back(i);
          family.theta(j, i) = axis_ramp(i, jx, m, ov, N_axis);
        }
      } else {
        covers_all = covers_all && (loy == 0 && hiy == n);
        for (int iy = 0; iy <= n; ++iy) {
          for (int ix = 0; ix <= n; ++ix) {
            if (!axis_in_subspace(ix, lox, hix, n) || !axis_in_subspace(iy, loy, hiy, n)) continue;
            const int v = iy * (n + 1) + ix;
            idx.push_back(v);
            family.theta(j, v) =
                axis_ramp(ix, jx, m, ov, N_axis) * axis_ramp(iy, jy, m, ov, N_axis);
          }
        }
      }
      if (covers_all && n_sub > 1) family.overlap_warning = true;
      family.subspaces.push_back(std::move(idx));
    }
  }

  // Normalize so the ramps sum to 1 even when the overlap bands merge.
  for (int v = 0; v < mesh->n_vertices(); ++v) {
    const double sum = family.theta.col(v).sum();
    if (sum > 0.0) family.theta.col(v) /= sum;
  }
  return family;
}

SubspaceFamily add_coarse_space(SubspaceFamily family, const ConstMeshPtr& coarse) {
  const auto& fine = *family.mesh;
  if (!coarse || coarse->dim != fine.dim || coarse->resolution < 1 ||
      fine.resolution % coarse->resolution != 0 || coarse->resolution > fine.resolution)
    throw std::invalid_argument("add_coarse_space: coarse mesh is not a nested coarsening");

  const int f = fine.resolution / coarse->resolution;
  const int n_fine = fine.n_vertices();
  const int n_coarse = coarse->n_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  if (fine.dim == 1) {
    for (int i = 0; i <= fine.resolution; ++i) {
      const int k = i / f, r = i % f;
      const double fx = static_cast<double>(r) / f;
      if (r == 0) {
        trips.emplace_back(i, k, 1.0);
      } else {
        trips.emplace_back(i, k, 1.0 - fx);
        trips.emplace_back(i, k + 1, fx);
      }
    }
  } else {
    const int nf = fine.resolution, nc = coarse->resolution;
    auto cvid = [nc](int cx, int cy) { return cy * (nc + 1) + cx; };
    for (int iy = 0; iy <= nf; ++iy) {
      for (int ix = 0; ix <= nf; ++ix) {
        const int v = iy * (nf + 1) + ix;
        const int cx = std::min(ix / f, nc - 1), cy = std::min(iy / f, nc - 1);
        const double fx = static_cast<double>(ix) / f - cx;
        const double fy = static_cast<double>(iy) / f - cy;
        // interpolate on the coarse triangle containing (fx, fy)
        if (fx >= fy) {
          if (1.0 - fx > 0) trips.emplace_back(v, cvid(cx, cy), 1.0 - fx);
          if (fx - fy > 0) trips.emplace_back(v, cvid(cx + 1, cy), fx - fy);
          if (fy > 0) trips.emplace_back(v, cvid(cx + 1, cy + 1), fy);
        } else {
          if (1.0 - fy > 0) trips.emplace_back(v, cvid(cx, cy), 1.0 - fy);
          if (fx > 0) trips.emplace_back(v, cvid(cx + 1, cy + 1), fx);
          if (fy - fx > 0) trips.emplace_back(v, cvid(cx, cy + 1), fy - fx);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> P(n_fine, n_coarse);
  P.setFromTriplets(trips.begin(), trips.end());
  family.coarse = CoarseSpace{coarse, std::move(P)};
  return family;
}

Coloring color_subdomains(const SubspaceFamily& family) {
  const int N = family.n_local();
  std::vector<std::vector<char>> member(N, std::vector<char>(family.mesh->n_vertices(), 0));
  for (int j = 0; j < N; ++j)
    for (int v : family.subspaces[j]) member[j][v] = 1;
  auto intersects = [&](int a, int b) {
    for (int v : family.subspaces[a])
      if (member[b][v]) return true;
    return false;
  };
  Coloring coloring;
  coloring.colors.assign(N, -1);
  for (int j = 0; j < N; ++j) {
    std::vector<char> used(N + 1, 0);
    for (int k = 0; k < j; ++k)
      if (intersects(j, k)) used[coloring.colors[k]] = 1;
    int c = 0;
    while (used[c]) ++c;
    coloring.colors[j] = c;
    coloring.n_colors = std::max(coloring.n_colors, c + 1);
  }
  coloring.tau_lower = 1.0 / (coloring.n_colors + (family.coarse ? 1 : 0));
  return coloring;
}

bool kernel_decomposition_check(const SubspaceFamily& family, const problems::Problem& prob) {
  for (const auto& phi : prob.kernel0_basis) {
    bool represented = false;
    if (family.coarse) {
      // nodal restriction to coarse vertices, prolonged back
      const auto& P = family.coarse->prolongation;
      Eigen::VectorXd c(family.coarse->mesh->n_vertices());
      for (int k = 0; k < c.size(); ++k)
        c[k] = phi.coeffs[fem::coarse_to_fine_vertex(*family.coarse->mesh, *family.mesh, k)];
      if ((P * c - phi.coeffs).norm() <= 1e-10 * (1.0 + phi.coeffs.norm())) represented = true;
    }
    if (!represented) {
      for (int j = 0; j < family.n_local() && !represented; ++j) {
        std::vector<char> in(family.mesh->n_vertices(), 0);
        for (int v : family.subspaces[j]) in[v] = 1;
        bool supported = true;
        for (int v = 0; v < family.mesh->n_vertices(); ++v)
          if (!in[v] && std::abs(phi.coeffs[v]) > 1e-14 * (1.0 + phi.coeffs.norm()))
            supported = false;
        represented = supported;
      }
    }
    if (!represented) return false;
  }
  return true;
}

double covering_residual(const SubspaceFamily& family, const Eigen::VectorXd& w) {
  std::vector<char> covered(family.mesh->n_vertices(), 0);
  for (const auto& idx : family.subspaces)
    for (int v : idx) covered[v] = 1;
  std::vector<int> unc;
  for (int v = 0; v < family.mesh->n_vertices(); ++v)
    if (!covered[v]) unc.push_back(v);
  if (unc.empty()) return 0.0;
  Eigen::VectorXd r(static_cast<int>(unc.size()));
  for (size_t k = 0; k < unc.size(); ++k) r[static_cast<int>(k)] = w[unc[k]];
  if (!family.coarse) return r.norm();
  // best coarse fit on the uncovered rows
  Eigen::MatrixXd Pu(static_cast<int>(unc.size()), family.coarse->mesh->n_vertices());
  const Eigen::MatrixXd P(family.coarse->prolongation);
  for (size_t k = 0; k < unc.size(); ++k) Pu.row(static_cast<int>(k)) = P.row(unc[k]);
  const Eigen::VectorXd c = Pu.colPivHouseholderQr().solve(r);
  return (Pu * c - r).norm();
}

std::vector<FeFunction> construct_stable_decomposition(const SubspaceFamily& family,
                                                       const FeFunction& w) {
  if (covering_residual(family, w.coeffs) > 1e-10 * (1.0 + w.coeffs.norm()))
    throw PreconditionError("construct_stable_decomposition: covering precondition violated");

  Eigen::VectorXd w0 = Eigen::VectorXd::Zero(family.mesh->n_vertices());
  Eigen::VectorXd coarse_coeffs;
  if (family.coarse) {
    // quasi-interpolation: mass-weighted local averages against coarse hats
    const auto& P = family.coarse->prolongation;
    const Eigen::VectorXd num = P.transpose() * (family.mesh->mass * w.coeffs);
    const Eigen::VectorXd den =
        P.transpose() * (family.mesh->mass * Eigen::VectorXd::Ones(family.mesh->n_vertices()));
    coarse_coeffs = num.array() / den.array();
    w0 = P * coarse_coeffs;
  }

  std::vector<FeFunction> parts;
  const Eigen::VectorXd rem = w.coeffs - w0;
  for (int j = 0; j < family.n_local(); ++j) {
    Eigen::VectorXd wj = family.theta.row(j).transpose().cwiseProduct(rem);
    parts.push_back(FeFunction{family.mesh, std::move(wj)});
  }
  if (family.coarse) parts.push_back(FeFunction{family.mesh, std::move(w0)});
  return parts;
}

}  // namespace ssc::decomposition
