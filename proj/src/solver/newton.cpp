#include "solver/newton.hpp"

#include <cmath>

namespace ssc::solver {

NewtonResult newton_minimize(const DenseObjective& obj, Eigen::VectorXd x0,
                             const NewtonOptions& opts) {
  NewtonResult res;
  res.x = std::move(x0);
  double fx = obj.value(res.x);
  double lam = opts.shift0;
  for (res.iters = 0; res.iters < opts.max_iters; ++res.iters) {
    const Eigen::VectorXd g = obj.grad(res.x);
    res.grad_norm = g.norm();
    if (res.grad_norm <= opts.grad_tol_abs) {
      res.converged = true;
      return res;
    }
    const Eigen::MatrixXd H = obj.hess(res.x);
    const double scale = std::max(1e-30, H.diagonal().cwiseAbs().mean());
    bool stepped = false;
    while (lam < 1e12) {
      Eigen::MatrixXd Hs = H;
      Hs.diagonal().array() += lam * scale;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd p = ldlt.solve(-g);
        const double slope = g.dot(p);
        if (slope < 0.0 && p.allFinite()) {
          double alpha = 1.0;
          while (alpha > 1e-13) {
            const double ft = obj.value(res.x + alpha * p);
            if (ft <= fx + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
          }
          if (alpha > 1e-13) {
            res.x += alpha * p;
            fx = obj.value(res.x);
            stepped = true;
            if (alpha == 1.0) lam = std::max(lam * 0.25, opts.shift0);
            break;
          }
        }
      }
      lam *= 10.0;
    }
    if (!stepped) break;  // trust region collapsed; report last gradient
  }
  res.grad_norm = obj.grad(res.x).norm();
  res.converged = res.grad_norm <= opts.grad_tol_abs;
  return res;
}

}  // namespace ssc::solver
