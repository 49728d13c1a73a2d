#pragma once

#include "mfgmm/types.hpp"

#include <utility>

namespace mfgmm::gmm {

/// Weights, means and precisions of the generating mixture. Labels are drawn.
struct TruthSpec {
  VectorXd weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> precisions;
};

/// Draws z_n ~ Categorical(weights), x_n ~ Normal(mean_z, precision_z^{-1}).
/// Deterministic for a fixed cfg.seed.
[[nodiscard]] std::pair<Dataset, TrueMixture>
generate_dataset(const MixtureConfig &cfg, const TruthSpec &truth);

[[nodiscard]] SheetStats class_stats(const Dataset &ds, const Assignment &z);

/// Cut-off membership: |mu_k| < R and d_RF(Lambda_k, Id) < R for every k.
[[nodiscard]] bool in_cutoff(const ModelPoint &xi, double R);

/// Sum of the three prior log-densities (additive constants dropped).
[[nodiscard]] double log_prior(const ModelPoint &xi, const PriorConfig &priors);

/// -log P_N for sufficient statistics `stats` (data or population averages).
/// Returns +inf outside the cut-off. Classes with zero count contribute no
/// data terms.
[[nodiscard]] double energy(const SheetStats &stats, const ModelPoint &xi,
                            const PriorConfig &priors,
                            bool enforce_cutoff = true);

[[nodiscard]] double log_posterior(const Dataset &ds, const ModelPoint &xi,
                                   const Assignment &z,
                                   const PriorConfig &priors);

/// Phi = -(1/lambda0) log P_N; +inf outside the cut-off.
[[nodiscard]] double phi(const Dataset &ds, const ModelPoint &xi,
                         const Assignment &z, const PriorConfig &priors,
                         double lambda0);

/// Gradient of a scalar on the parameter manifold: Euclidean in the means,
/// symmetric matrices for the precisions, simplex-tangent for the weights.
struct TangentVector {
  std::vector<VectorXd> means;
  std::vector<MatrixXd> precisions;
  VectorXd weights;

  [[nodiscard]] double norm() const;
};

/// Gradient of energy() with respect to xi. The weight component is the raw
/// partial derivative (not projected).
[[nodiscard]] TangentVector energy_gradient(const SheetStats &stats,
                                            const ModelPoint &xi,
                                            const PriorConfig &priors);

/// Analytic gradient of phi. Throws NumericalError on or outside the
/// cut-off boundary.
[[nodiscard]] TangentVector phi_gradient(const Dataset &ds,
                                         const ModelPoint &xi,
                                         const Assignment &z,
                                         const PriorConfig &priors,
                                         double lambda0);

/// Per-class moment estimates (the flat-prior sheet minimizer when it lies
/// inside the cut-off), pulled strictly inside the cut-off of radius R.
/// Classes with zero count get mean 0 and identity precision.
[[nodiscard]] ModelPoint moment_estimate(const SheetStats &stats, double R);

/// lambda0 = max(1, floor(l0 * N)).
[[nodiscard]] int lambda0_for(int N, double l0);

} // namespace mfgmm::gmm
