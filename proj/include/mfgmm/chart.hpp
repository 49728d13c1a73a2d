#pragma once

#include "mfgmm/gmm_core.hpp"
#include "mfgmm/types.hpp"

namespace mfgmm::chart {

/// Unconstrained coordinates theta for a ModelPoint. Per component: the mean,
/// then the log-Cholesky factor of the precision (log of the diagonal, strict
/// lower triangle column by column). When `weights` is set the trailing K-1
/// entries are eta_k = log(pi_k / pi_K).
struct Layout {
  int K = 1;
  int P = 1;
  bool weights = true;

  [[nodiscard]] int per_component() const { return P + P * (P + 1) / 2; }
  [[nodiscard]] int dim() const {
    return K * per_component() + (weights ? K - 1 : 0);
  }
};

[[nodiscard]] VectorXd encode(const ModelPoint &xi, const Layout &layout);

/// `fixed_weights` supplies pi when the layout carries no weight block.
[[nodiscard]] ModelPoint decode(const VectorXd &theta, const Layout &layout,
                                const VectorXd &fixed_weights = VectorXd());

/// Chain rule from the manifold gradient of a scalar (raw weight partials) to
/// the gradient with respect to theta.
[[nodiscard]] VectorXd pull_back(const gmm::TangentVector &g,
                                 const ModelPoint &xi, const Layout &layout);

} // namespace mfgmm::chart
