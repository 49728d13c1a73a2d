#pragma once

#include "mfgmm/error.hpp"
#include "mfgmm/types.hpp"

#include <functional>

namespace mfgmm::newton {

using Objective = std::function<double(const VectorXd &)>;
using Gradient = std::function<VectorXd(const VectorXd &)>;

struct Options {
  int max_iter = 200;
  double grad_tol = 1e-10;  // on |g|_inf, scaled by 1 + |f|
  double fd_step = 1e-5;
  double step_tol = 1e-14;
};

struct Result {
  VectorXd x;
  double value = 0.0;
  VectorXd grad;
  MatrixXd hessian;
  int iterations = 0;
};

/// Minimization failure; carries the best iterate seen.
class Error : public NumericalError {
public:
  Error(const std::string &what, VectorXd best, double best_value)
      : NumericalError(what), best_(std::move(best)), best_value_(best_value) {}
  [[nodiscard]] const VectorXd &best() const { return best_; }
  [[nodiscard]] double best_value() const { return best_value_; }

private:
  VectorXd best_;
  double best_value_;
};

/// Central differences of the gradient, symmetrized.
[[nodiscard]] MatrixXd fd_hessian(const Gradient &grad, const VectorXd &x,
                                  double h);

/// Damped Newton with a Levenberg shift and Armijo backtracking. f may return
/// +inf outside its domain; such trial points are rejected. Throws Error when
/// the iteration budget runs out or the Hessian at the final point is not
/// positive definite.
[[nodiscard]] Result minimize(const Objective &f, const Gradient &grad,
                              const VectorXd &x0, const Options &opts = {});

} // namespace mfgmm::newton
