#pragma once

#include "mfgmm/chart.hpp"
#include "mfgmm/gmm_core.hpp"
#include "mfgmm/newton.hpp"
#include "mfgmm/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mfgmm::mf {

/// Sufficient statistics flattened per class as [count, sum (P), sum_sq (P*P,
/// column-major)].
[[nodiscard]] inline int stats_width(int K, int P) { return K * (1 + P + P * P); }
[[nodiscard]] VectorXd flatten(const SheetStats &stats);
[[nodiscard]] SheetStats unflatten(const VectorXd &row, int K, int P);

/// energy(stats, xi) = constant + coeffs . flatten(stats), valid inside the
/// cut-off and for classes with nonzero count.
struct EnergyForm {
  VectorXd coeffs;
  double constant = 0.0;
};
[[nodiscard]] EnergyForm energy_form(const ModelPoint &xi,
                                     const PriorConfig &priors);

/// The admissible labelings Z_0 = { zeta : min_k N_k >= lambda0 } with one
/// row of flattened statistics per labeling.
class SheetTable {
public:
  static constexpr std::uint64_t kDefaultBudget = std::uint64_t{1} << 20;

  SheetTable(const Dataset &ds, int K, int lambda0,
             std::uint64_t budget = kDefaultBudget, int threads = 1);

  [[nodiscard]] int size() const { return static_cast<int>(codes_.size()); }
  [[nodiscard]] int K() const { return K_; }
  [[nodiscard]] int P() const { return P_; }
  [[nodiscard]] int N() const { return N_; }
  [[nodiscard]] int lambda0() const { return lambda0_; }
  [[nodiscard]] const MatrixXd &stats() const { return stats_; }
  [[nodiscard]] Assignment assignment(int i) const;
  [[nodiscard]] SheetStats sheet(int i) const;
  /// Index of a labeling, or -1 when it is not admissible.
  [[nodiscard]] int find(const std::vector<int> &labels) const;

  /// energy(sheet_i, xi) for every sheet; +inf outside the cut-off.
  [[nodiscard]] VectorXd energies(const ModelPoint &xi,
                                  const PriorConfig &priors) const;
  /// sum_i w_i * sheet_i as statistics.
  [[nodiscard]] SheetStats average(const VectorXd &w) const;

private:
  int K_, P_, N_, lambda0_;
  std::vector<std::uint64_t> codes_; // digit n (base K) = label of point n
  MatrixXd stats_;
};

[[nodiscard]] double log_sum_exp(const VectorXd &v);

struct LaplaceResult {
  double log_value = 0.0;
  VectorXd mode;
  double log_det_hessian = 0.0;
  MatrixXd hessian;
};

/// log of the integral of h * exp(-lambda * potential) over R^d by Laplace's
/// method around the Newton minimizer started at x0.
[[nodiscard]] LaplaceResult
laplace_log_integral(const newton::Objective &potential,
                     const newton::Gradient &grad, double lambda,
                     const VectorXd &x0,
                     const std::function<double(const VectorXd &)> &log_h = {},
                     const newton::Options &opts = {});

/// Probabilists' Gauss-Hermite rule (weights sum to 1) via Golub-Welsch.
struct GaussHermite {
  VectorXd nodes;
  VectorXd weights;
};
[[nodiscard]] GaussHermite gauss_hermite(int n);

enum class Backend {
  Laplace,    // second-order expansion of the Gaussian surrogate
  Quadrature, // tensor Gauss-Hermite over the Gaussian surrogate
};

struct CaviOptions {
  double beta = 1.0;
  int max_iter = 500;
  double tol = 1e-8;
  Backend backend = Backend::Laplace;
  int gh_nodes = 7;
  double init_kappa = 2.0;   // v_i = -kappa * Hamming(zeta_i, k-means labels)
  std::uint64_t seed = 0;
  int threads = 1;
  std::uint64_t budget = SheetTable::kDefaultBudget;
};

struct TraceEntry {
  int iteration = 0;
  double dv = 0.0;
  double dm = 0.0;
  double residual = 0.0;
  double kl = 0.0;
};

struct CaviState {
  int iteration = 0;
  VectorXd v;       // log mu^2(i), normalized
  VectorXd u;       // exp(v)
  VectorXd theta;   // chart coordinates of the mode m
  ModelPoint m;
  MatrixXd hessian; // chart Hessian of sum_i u_i Phi(., i) at m
  VectorXd R;       // corrections R_i evaluated at (m, hessian)
  double dv = kInf;
  double dm = kInf;
  double residual = kInf;
  double kl = kInf;
  bool converged = false;
  std::vector<TraceEntry> trace;
};

/// Coordinate ascent on the discrete factor over Z_0 and a Gaussian
/// surrogate for the continuous factor.
class Cavi {
public:
  Cavi(const Dataset &ds, int K, const PriorConfig &priors, int lambda0,
       CaviOptions opts);

  [[nodiscard]] const SheetTable &sheets() const { return table_; }
  [[nodiscard]] const chart::Layout &layout() const { return layout_; }
  [[nodiscard]] double lambda() const { return opts_.beta * lambda0_; }
  [[nodiscard]] const CaviOptions &options() const { return opts_; }

  /// Hard k-means labels softened into v, then the mode of the mixture.
  [[nodiscard]] CaviState init() const;
  /// State whose discrete factor is the given u.
  [[nodiscard]] CaviState from_weights(const VectorXd &u,
                                       const VectorXd &theta0) const;
  [[nodiscard]] CaviState step(const CaviState &s) const;
  [[nodiscard]] CaviState run() const;
  [[nodiscard]] CaviState run_from(CaviState s) const;

  /// Phi(theta, i) for every sheet.
  [[nodiscard]] VectorXd phis(const VectorXd &theta) const;
  /// argmin over theta of sum_i u_i Phi(theta, i), started at theta0.
  [[nodiscard]] newton::Result mode(const VectorXd &u,
                                    const VectorXd &theta0) const;
  /// R_i = -lambda (E[Phi(., i)] - Phi(m, i)) under N(theta, (lambda H)^-1).
  [[nodiscard]] VectorXd corrections(const VectorXd &theta, const MatrixXd &H,
                                     Backend backend) const;
  /// log Z(xi) = logsumexp_i(-lambda Phi(xi, i) + R_i).
  [[nodiscard]] double log_partition(const VectorXd &theta,
                                     const VectorXd &R) const;
  [[nodiscard]] double log_partition(const ModelPoint &xi,
                                     const VectorXd &R) const;
  /// |sum_i grad Phi(xi, i) softmax(-lambda Phi(xi, i) + R_i)| with R held
  /// fixed. Gradient and norm are Riemannian (see riemannian_coords).
  [[nodiscard]] double critical_point_residual(const ModelPoint &xi,
                                               const VectorXd &R) const;
  /// Mean over sheets of the Riemannian norm of grad Phi(xi, i).
  [[nodiscard]] double mean_sheet_gradient_norm(const ModelPoint &xi) const;
  /// Chart gradient of Phi for arbitrary statistics.
  [[nodiscard]] VectorXd gradient(const SheetStats &stats,
                                  const VectorXd &theta) const;
  /// KL(mu1 x mu2 || posterior) up to log Z, with mu1 Gaussian.
  [[nodiscard]] double kl_proxy(const VectorXd &u, const VectorXd &theta,
                                const MatrixXd &H, const VectorXd &R) const;

private:
  [[nodiscard]] VectorXd start_point(const SheetStats &stats) const;
  [[nodiscard]] double potential(const SheetStats &stats,
                                 const VectorXd &theta) const;

  Dataset ds_;
  PriorConfig priors_;
  int lambda0_;
  CaviOptions opts_;
  SheetTable table_;
  chart::Layout layout_;
};

/// Components of a manifold gradient whose Euclidean norm is its norm in the
/// product metric: Euclidean means, affine-invariant precisions
/// (|Lambda^{1/2} G Lambda^{1/2}|_F) and Euclidean simplex tangent.
[[nodiscard]] VectorXd riemannian_coords(const gmm::TangentVector &g,
                                         const ModelPoint &xi);

/// Number of coordinates of the point: K(P + P(P+1)/2) + K - 1.
[[nodiscard]] int coordinate_count(int K, int P);
/// Moves xi by `delta` along coordinate j: a mean entry, an orthonormal
/// symmetric direction through the affine-invariant exponential map, or
/// pi_k against pi_K.
[[nodiscard]] ModelPoint perturb(const ModelPoint &xi, int j, double delta);

/// Lloyd's algorithm with k-means++ seeding; labels 0-based.
[[nodiscard]] std::vector<int> kmeans(const Dataset &ds, int K,
                                      std::uint64_t seed, int max_iter = 100);

} // namespace mfgmm::mf
