#include "fem/norms.hpp"

#include <cmath>
#include <stdexcept>

namespace ssc::fem {

double seminorm_w1s_pow(const Eigen::VectorXd& coeffs, const Mesh& mesh, double s) {
  double acc = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double g = element_gradient(mesh, coeffs, e).norm();
    if (g > 0.0) acc += std::pow(g, s) * mesh.areas[e];
  }
  return acc;
}

double seminorm_w1s(const FeFunction& v, double s) {
  if (s <= 1.0) throw std::invalid_argument("seminorm_w1s: s must be > 1");
  return std::pow(seminorm_w1s_pow(v.coeffs, *v.space, s), 1.0 / s);
}

double norm_l2(const FeFunction& v) {
  return std::sqrt(std::max(0.0, v.coeffs.dot(v.space->mass * v.coeffs)));
}

double norm_eps_q(const FeFunction& v, double s_semi, double eps, double q) {
  if (eps <= 0.0) throw std::invalid_argument("norm_eps_q: eps must be > 0");
  if (q <= 1.0) throw std::invalid_argument("norm_eps_q: q must be > 1");
  const double semi = seminorm_w1s(v, s_semi);
  const double l2 = norm_l2(v);
  return std::pow(std::pow(semi, q) + eps * std::pow(l2, q), 1.0 / q);
}

Eigen::VectorXd load_of_one(const Mesh& mesh) {
  return mesh.mass * Eigen::VectorXd::Ones(mesh.n_vertices());
}

DualVector make_compatible(const DualVector& raw) {
  const Eigen::VectorXd m = load_of_one(*raw.space);
  const double pairing = raw.values.sum();  // <raw, 1>
  const double mass_total = m.sum();        // <m, 1> = |Omega|
  DualVector out{raw.space, raw.values - (pairing / mass_total) * m};
  return out;
}

}  // namespace ssc::fem
