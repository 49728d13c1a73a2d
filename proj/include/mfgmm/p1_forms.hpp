#pragma once

#include "mfgmm/landscape.hpp"
#include "mfgmm/types.hpp"

#include <string>

// Closed-form stationary equations of phi_hat_A for one-dimensional data.
// Row k of A is handled independently once the weights are fixed.
namespace mfgmm::p1 {

using landscape::MatrixXi;
using landscape::Weighting;

struct Coefficients {
  double a = 0.0;     // (beta/2) sum_k' w_k' (1/Lambdatilde_k' + (mu_k - mutilde_k')^2)
  double b = 0.0;     // (beta/2) sum_k' w_k'
  double c = kInf;    // a / b
  VectorXd tau;       // w_k' / sum w
  VectorXd theta;     // r_k' pitilde_k' alpha(k,k'), normalized
  VectorXd r;         // Ntilde_k' / N
  VectorXd c_kk;      // 1/Lambdatilde_k' + (mu_k - mutilde_k')^2
  bool degenerate = false; // row k carries no weight
};

/// w_k' = Ntilde_k' alpha(k,k') pitilde_k' (AsPrinted) or Ntilde_k' alpha(k,k').
[[nodiscard]] Coefficients coefficients(const MatrixXd &A,
                                        const TrueMixture &truth, double beta,
                                        int k, double mu_k,
                                        Weighting weighting =
                                            Weighting::AsPrinted);

/// Positive root of beta Lambda / sigma + a - b / Lambda = 0. sigma = inf
/// gives b / a. Throws NumericalError when b <= 0.
[[nodiscard]] double lambda_hat(double a, double b, double sigma, double beta);

struct MuHat {
  double leading = 0.0;     // weighted mean of mutilde
  double fixed_point = 0.0; // mu = Lambda_hat(mu) S / (Lambda_hat(mu) W + 2a)
  double bisection = 0.0;   // root of the derivative, bracketed
  int iterations = 0;       // fixed-point iterations used
  bool converged = false;
};

/// Stationary mean of row k with Lambda_k = lambda_hat at every mu.
[[nodiscard]] MuHat mu_hat(const MatrixXd &A, const TrueMixture &truth, int k,
                           const PriorConfig &priors, double beta = 1.0,
                           Weighting weighting = Weighting::AsPrinted);

/// (1/2) W (1 + log c_k) with W = sum_k' w_k': the per-class contribution
/// minimized over Lambda_k under a flat precision prior.
[[nodiscard]] double per_class_value(const MatrixXd &A,
                                     const TrueMixture &truth, int k,
                                     double mu_k,
                                     Weighting weighting = Weighting::AsPrinted);

/// u = sum r alpha(k,.), v = sum c_kk' r alpha(k,.), and their
/// derivatives contracted with x.
struct HessianTerms {
  double u = 0.0, v = 0.0, ux = 0.0, vx = 0.0;
};
[[nodiscard]] HessianTerms hessian_terms(const MatrixXd &A,
                                         const TrueMixture &truth, int k,
                                         double mu_k, const VectorXd &x);

/// Quadratic form of the Hessian of alpha(k,.) -> u log v - u log u along x:
/// -(ux / sqrt(u) - sqrt(u) vx / v)^2.
[[nodiscard]] double hessian_row(const MatrixXd &A, const TrueMixture &truth,
                                 int k, double mu_k, const VectorXd &x);
/// The same form before completing the square.
[[nodiscard]] double hessian_expanded(const MatrixXd &A,
                                      const TrueMixture &truth, int k,
                                      double mu_k, const VectorXd &x);

struct Solution {
  ModelPoint m;
  std::vector<MuHat> mu;
  VectorXd lambda_asymptotic; // 1 / c_k at the fixed-point mean
  std::vector<bool> degenerate;
  double value = kInf;        // phi_hat_A at m
};

/// Weights in closed form, then mu by fixed point and Lambda by lambda_hat.
/// A row with no weight is pinned to mu = 0, Lambda = 1.
[[nodiscard]] Solution solve(const MatrixXd &A, const TrueMixture &truth,
                             const PriorConfig &priors, double lambda0,
                             Weighting weighting = Weighting::AsPrinted);

enum class Verdict { Pass, Fail, DegenerateTruth };
[[nodiscard]] std::string to_string(Verdict v);

struct VertexCheck {
  Verdict verdict = Verdict::Fail;
  MatrixXi counts;        // argmin cell
  MatrixXd A_star;
  ModelPoint m_star;
  int vertex_distance = 0; // lattice moves to the nearest permutation cell
  bool near_vertex = false; // vertex_distance <= 2
  bool recovered = false;   // M(A*) matches the truth up to relabeling
  double max_mean_error = 0.0;
  double max_precision_rel_error = 0.0;
  std::string detail;
};

struct RecoveryTolerance {
  int cells = 2;
  double mean = 0.2;
  double precision_rel = 0.2;
};

/// Sweeps the lattice and compares "A* at or next to a vertex" with
/// "M(A*) recovers the truth". Identical components make the comparison
/// vacuous and are reported as such.
[[nodiscard]] VertexCheck
vertex_recovery_check(const TrueMixture &truth, const PriorConfig &priors,
                      const landscape::LatticeSpec &lattice,
                      const landscape::SweepOptions &opts,
                      const RecoveryTolerance &tol = {});

/// Lattice moves between two confusion matrices with equal column sums:
/// sum over columns of half the L1 difference.
[[nodiscard]] int lattice_moves(const MatrixXi &a, const MatrixXi &b);

} // namespace mfgmm::p1
