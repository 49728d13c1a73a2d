#pragma once

#include "mfgmm/random.hpp"
#include "mfgmm/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfgmm::landscape {

using Eigen::MatrixXi;

/// Ad(k, k') = #{ i : z_i = k, ztilde_i = k' } (assigned x true, 0-based).
[[nodiscard]] MatrixXi confusion_of(const std::vector<int> &z,
                                    const std::vector<int> &truth, int K);

/// True class sizes Ntilde_k' (column sums).
[[nodiscard]] std::vector<int> column_sums(const MatrixXi &ad);

/// j(Ad): column k' divided by Ntilde_k'. An empty true class gets a
/// uniform column.
[[nodiscard]] MatrixXd markov_of(const MatrixXi &ad);

/// Throws ConfigError unless A is square, nonnegative and column-stochastic
/// to 1e-12.
void check_markov(const MatrixXd &A);

enum class Weighting {
  AsPrinted,        // data terms weighted by Ntilde_k' alpha(k,k') pitilde_k'
  ClassConditional, // Ntilde_k' alpha(k,k'), the plain conditional expectation
};

/// Pseudo sufficient statistics of the population average over Z_Ad:
/// class k collects weight w_kk' from true class k', with first and second
/// moments of N(mutilde_k', Lambdatilde_k'^-1).
[[nodiscard]] SheetStats population_stats(const MatrixXd &A,
                                          const TrueMixture &truth,
                                          Weighting weighting =
                                              Weighting::AsPrinted);

/// phi_hat_A(xi) = energy(population_stats(A), xi) / lambda0; +inf outside
/// the cut-off.
[[nodiscard]] double phi_hat(const MatrixXd &A, const ModelPoint &xi,
                             const TrueMixture &truth,
                             const PriorConfig &priors, double lambda0,
                             Weighting weighting = Weighting::AsPrinted);

/// log |Z_Ad| = sum_k' log( Ntilde_k'! / prod_k Ad(k,k')! ) via lgamma.
[[nodiscard]] double exact_log_count(const MatrixXi &ad);
/// Same count with every factorial replaced by Stirling's formula
/// n log n - n + log sqrt(2 pi n), and 0! = 1 kept exact.
[[nodiscard]] double stirling_log_count(const MatrixXi &ad);
/// psi = -(1/lambda) * stirling_log_count.
[[nodiscard]] double psi(const MatrixXi &ad, double lambda);

enum class Solver { Auto, Newton, ClosedForm };

struct Minimizer {
  ModelPoint m;
  double value = kInf; // Phi_hat(A) = phi_hat_A(m)
  // ok | pinned (a class with zero weight) | cutoff_boundary | failed
  std::string status = "ok";
};

/// argmin of phi_hat_A over the unconstrained manifold. The weights are
/// solved in closed form; means and precisions by the P=1 closed forms
/// (Auto with P=1, or ClosedForm) or by per-component Newton. A minimizer
/// outside the cut-off is returned and flagged.
[[nodiscard]] Minimizer m_of(const MatrixXd &A, const TrueMixture &truth,
                             const PriorConfig &priors, double lambda0,
                             Solver solver = Solver::Auto,
                             Weighting weighting = Weighting::AsPrinted);

/// phi_hat from precomputed population statistics without the cut-off.
/// A weight pi_k = 0 on a class with no statistics contributes nothing.
[[nodiscard]] double phi_hat_at(const SheetStats &stats, const ModelPoint &xi,
                                const PriorConfig &priors, double lambda0);

/// Closed-form weight block: pi_k proportional to max(W_k + alpha - 1, 0).
[[nodiscard]] VectorXd weight_block(const SheetStats &stats,
                                    const PriorConfig &priors);

struct LatticeSpec {
  std::vector<int> class_sizes; // Ntilde_k'
  int stride = 1;
  std::uint64_t budget = 1'000'000;
};

/// Compositions of n into K nonnegative parts, lexicographic in the parts.
[[nodiscard]] std::vector<std::vector<int>> compositions(int n, int K);
/// prod_k' C(Ntilde_k' + K - 1, K - 1), as a double to survive overflow.
[[nodiscard]] double full_lattice_size(const LatticeSpec &spec);
/// Number of cells after the stride is applied per column.
[[nodiscard]] double lattice_size(const LatticeSpec &spec);
/// Every (strided) confusion matrix with the given column sums. Throws
/// BudgetError past spec.budget.
[[nodiscard]] std::vector<MatrixXi> enumerate_lattice(const LatticeSpec &spec);

struct Record {
  MatrixXi counts;
  MatrixXd A;
  ModelPoint m;
  double phi_hat = kInf;
  double psi = 0.0;
  double F = kInf;
  std::string status;
};

struct SweepOptions {
  double beta = 1.0;
  double lambda0 = 1.0;
  Solver solver = Solver::Auto;
  Weighting weighting = Weighting::AsPrinted;
  int threads = 1;
};

struct SweepResult {
  std::vector<Record> records;
  int best = -1;
  double lambda = 1.0;
  // log sum_cells exp(-lambda F), then normalized by prod Ntilde^(K-1) and
  // additionally by the 2^(D/2) cell-volume factor, D = K(K-1).
  double log_z_sum = 0.0;
  double log_z_per_count = 0.0;
  double log_z_per_volume = 0.0;

  [[nodiscard]] const Record &argmin() const { return records.at(best); }
  void write_csv(const std::string &path) const;
  void write_summary(const std::string &path) const;
};

/// Evaluates every lattice cell. Ties in F go to the lexicographically
/// smallest A (row-major).
[[nodiscard]] SweepResult sweep(const LatticeSpec &spec,
                                const TrueMixture &truth,
                                const PriorConfig &priors,
                                const SweepOptions &opts);

/// Uniform element of Z_Ad: per true class, shuffle its members and cut the
/// shuffled list into groups of sizes Ad(., k').
[[nodiscard]] std::vector<int> sample_class(const MatrixXi &ad,
                                            const std::vector<int> &true_labels,
                                            Rng &rng);

/// Phi(xi, z) for `n` independent uniform draws z from Z_Ad.
[[nodiscard]] std::vector<double>
sample_phi(const Dataset &ds, const std::vector<int> &true_labels,
           const MatrixXi &ad, const ModelPoint &xi, const PriorConfig &priors,
           double lambda0, int n, std::uint64_t seed);

/// The truth replaced by the empirical class moments of the labeled data
/// (maximum-likelihood covariances). With ClassConditional weighting,
/// population_stats of this mixture is the exact mean of the class
/// statistics over Z_Ad.
[[nodiscard]] TrueMixture empirical_truth(const Dataset &ds,
                                          const TrueMixture &truth);

/// Product-metric distance (Euclidean means and weights, Rao-Fisher
/// precisions), minimized over relabelings of b.
[[nodiscard]] double point_distance(const ModelPoint &a, const ModelPoint &b);

/// The xi-grid is a box in chart coordinates: means around the data mean,
/// log-Cholesky entries around the identity, eta around uniform weights.
struct ConcentrationOptions {
  std::vector<double> betas{0.5, 1.0, 2.0};
  int grid = 9; // points per coordinate
  double mean_halfwidth = 3.0;
  double log_precision_halfwidth = 2.0;
  double eta_halfwidth = 2.0;
  std::uint64_t grid_budget = 2'000'000;
  int lambda0 = 1;
  Weighting weighting = Weighting::AsPrinted;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct ConcentrationRow {
  double beta = 0.0;
  ModelPoint grid_argmax;   // grid argmax of log Z
  ModelPoint argmax;        // Newton refinement of the grid argmax
  double log_z = 0.0;       // at the refined argmax
  double grad_norm = 0.0;   // |grad log Z| at the grid argmax (chart)
  double grad_bound = 0.0;  // |diag(Hessian) * grid spacing|
  MatrixXd A_star;
  ModelPoint m_star;        // M(A*)
  double grid_distance = 0.0; // point_distance(grid_argmax, m_star)
  double distance = 0.0;      // point_distance(argmax, m_star)
  double cavi_distance = 0.0;
  double cavi_grad_rank = 0.0; // quantile of |grad F| at the cell nearest m
};

struct ConcentrationReport {
  std::vector<ConcentrationRow> rows;
  bool distance_nonincreasing = false; // up to 1e-8 of Newton noise
};

/// Grid search of log Z(xi) (exact enumeration, R from a converged CAVI run
/// at each beta) against the minimizer of the effective free energy over the
/// full lattice of the true class sizes. Report only.
[[nodiscard]] ConcentrationReport
concentration_check(const Dataset &ds, const TrueMixture &truth,
                    const PriorConfig &priors,
                    const ConcentrationOptions &opts);

} // namespace mfgmm::landscape
