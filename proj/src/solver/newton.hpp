#pragma once

#include <Eigen/Dense>

#include <functional>

namespace ssc::solver {

/// Small dense smooth convex objective; hess returns the unregularized
/// Hessian, the minimizer adds its own Levenberg-style shift.
struct DenseObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess;
};

struct NewtonOptions {
  double grad_tol_abs = 1e-10;
  int max_iters = 200;
  double shift0 = 1e-12;  // initial relative Levenberg shift
};

struct NewtonResult {
  Eigen::VectorXd x;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
};

/// Damped Newton with adaptive diagonal shift and Armijo backtracking.
NewtonResult newton_minimize(const DenseObjective& obj, Eigen::VectorXd x0,
                             const NewtonOptions& opts);

}  // namespace ssc::solver
