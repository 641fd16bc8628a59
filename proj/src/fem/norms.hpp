#pragma once

#include "fem/mesh.hpp"

namespace ssc::fem {

/// W^{1,s} seminorm, exact for P1 (the gradient is constant per element).
double seminorm_w1s(const FeFunction& v, double s);

/// Sum over elements of |grad v|^s * area, i.e. seminorm_w1s^s.
double seminorm_w1s_pow(const Eigen::VectorXd& coeffs, const Mesh& mesh, double s);

/// L2 norm via the exact P1 mass matrix.
double norm_l2(const FeFunction& v);

/// (|v|_{W^{1,s_semi}}^q + eps * ||v||_{L2}^q)^{1/q}
double norm_eps_q(const FeFunction& v, double s_semi, double eps, double q);

/// Load vector of the constant function 1 (mass-matrix row sums).
Eigen::VectorXd load_of_one(const Mesh& mesh);

/// Projects the pairing with constants out of `raw` so that <result, 1> = 0.
DualVector make_compatible(const DualVector& raw);

}  // namespace ssc::fem
