#include "mfgmm/newton.hpp"

#include <fmt/format.h>

#include <cmath>

namespace mfgmm::newton {

MatrixXd fd_hessian(const Gradient &grad, const VectorXd &x, double h) {
  const Eigen::Index d = x.size();
  MatrixXd H(d, d);
  VectorXd xp = x;
  for (Eigen::Index j = 0; j < d; ++j) {
    xp[j] = x[j] + h;
    const VectorXd gp = grad(xp);
    xp[j] = x[j] - h;
    const VectorXd gm = grad(xp);
    xp[j] = x[j];
    H.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

namespace {

bool positive_definite(const MatrixXd &H) {
  Eigen::LLT<MatrixXd> llt(H);
  return llt.info() == Eigen::Success;
}

} // namespace

Result minimize(const Objective &f, const Gradient &grad, const VectorXd &x0,
                const Options &opts) {
  VectorXd x = x0;
  double fx = f(x);
  if (!std::isfinite(fx))
    throw Error("newton: starting point outside the domain", x, fx);
  VectorXd g = grad(x);
  const Eigen::Index d = x.size();

  for (int it = 0; it < opts.max_iter; ++it) {
    MatrixXd H = fd_hessian(grad, x, opts.fd_step);
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol * (1.0 + std::abs(fx))) {
      if (!positive_definite(H))
        throw Error("newton: Hessian at the stationary point is not positive "
                    "definite",
                    x, fx);
      return {x, fx, g, H, it};
    }

    // Levenberg shift until the system is positive definite.
    double shift = 0.0;
    const double scale = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<MatrixXd> llt;
    for (int tries = 0; tries < 60; ++tries) {
      llt.compute(H + shift * MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success)
        break;
      shift = shift == 0.0 ? 1e-8 * scale : shift * 10.0;
    }
    if (llt.info() != Eigen::Success)
      throw Error("newton: could not regularize the Hessian", x, fx);
    VectorXd step = -llt.solve(g);
    double slope = g.dot(step);
    if (!(slope < 0.0)) {
      step = -g;
      slope = -g.squaredNorm();
    }

    double t = 1.0;
    bool accepted = false;
    VectorXd xn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * step;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      // Close to the minimum the decrease drowns in rounding; take the full
      // step if it still shrinks the gradient.
      if (ls == 0 && std::isfinite(fn) &&
          std::abs(fn - fx) <= 1e-12 * (1.0 + std::abs(fx)) &&
          grad(xn).norm() < g.norm()) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No decrease is representable: accept when already near-stationary.
      if (t * step.lpNorm<Eigen::Infinity>() < opts.step_tol * (1.0 + x.norm()) &&
          g.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + std::abs(fx)) &&
          positive_definite(H))
        return {x, fx, g, H, it};
      throw Error(fmt::format("newton: line search failed at iteration {} "
                              "(|g|_inf = {:.3e})",
                              it, g.lpNorm<Eigen::Infinity>()),
                  x, fx);
    }
    x = xn;
    fx = fn;
    g = grad(x);
  }
  throw Error(fmt::format("newton: no convergence in {} iterations "
                          "(|g|_inf = {:.3e})",
                          opts.max_iter, g.lpNorm<Eigen::Infinity>()),
              x, fx);
}

} // namespace mfgmm::newton
