#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

namespace mfgmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Problem sizes and the temperature scalar. The tempered inverse temperature
/// is lambda = beta * lambda0.
struct MixtureConfig {
  int K = 1;
  int P = 1;
  int N = 1;
  double beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground-truth generative mixture. Labels are stored 0-based in memory and
/// 1-based in every serialized form.
struct TrueMixture {
  VectorXd weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> precisions;
  std::vector<int> trueLabels;
  std::vector<int> classSizes;

  [[nodiscard]] int K() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] int P() const {
    return means.empty() ? 0 : static_cast<int>(means.front().size());
  }
  /// Checks weights/means/precisions; labels are checked only when present.
  void validate() const;
};

/// A point xi = (pi, mu_1..mu_K, Lambda_1..Lambda_K) of the parameter manifold.
struct ModelPoint {
  VectorXd weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> precisions;

  [[nodiscard]] int K() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] int P() const {
    return means.empty() ? 0 : static_cast<int>(means.front().size());
  }
  void validate() const;

  /// pi uniform, mu = 0, Lambda = Id.
  [[nodiscard]] static ModelPoint centered(int K, int P);
};

/// Priors and the cut-off radius.
///  log p(mu_k)     = -a |mu_k|^2
///  log p(Lambda_k) = -tr(Lambda_k^2) / (2 sigma_k)   (sigma_k = inf: flat)
///  log p(pi)       = (dirichlet_alpha - 1) sum_k log pi_k
struct PriorConfig {
  double R = 3.0;
  double a = 0.0;
  VectorXd sigma_k;
  double dirichlet_alpha = 1.0;

  void validate(int K) const;
  [[nodiscard]] static PriorConfig flat(int K, double R);
};

/// A labeling zeta of the N data points together with its class counts.
class Assignment {
public:
  Assignment() = default;
  Assignment(std::vector<int> labels, int K);

  [[nodiscard]] const std::vector<int> &labels() const { return labels_; }
  [[nodiscard]] const std::vector<int> &counts() const { return counts_; }
  [[nodiscard]] int K() const { return static_cast<int>(counts_.size()); }
  [[nodiscard]] int N() const { return static_cast<int>(labels_.size()); }
  /// lambda(zeta) = min_k N_k.
  [[nodiscard]] int min_class_size() const;
  /// Membership in Z_0 = { zeta : lambda(zeta) >= lambda0 }.
  [[nodiscard]] bool admissible(int lambda0) const {
    return min_class_size() >= lambda0;
  }

private:
  std::vector<int> labels_;
  std::vector<int> counts_;
};

/// Observations x_n stored row-wise (N x P).
struct Dataset {
  MatrixXd points;

  [[nodiscard]] int N() const { return static_cast<int>(points.rows()); }
  [[nodiscard]] int P() const { return static_cast<int>(points.cols()); }
};

/// Sufficient statistics of one class: count, sum x, sum x x^T. Counts may
/// be fractional (averaged over labelings or population weights).
struct ClassStats {
  double count = 0.0;
  VectorXd sum;
  MatrixXd sum_sq;

  [[nodiscard]] static ClassStats zero(int P) {
    return {0.0, VectorXd::Zero(P), MatrixXd::Zero(P, P)};
  }
  ClassStats &add_scaled(const ClassStats &other, double w) {
    count += w * other.count;
    sum += w * other.sum;
    sum_sq += w * other.sum_sq;
    return *this;
  }
};

using SheetStats = std::vector<ClassStats>;

/// Symmetric to 1e-12 (relative) with smallest eigenvalue above 1e-12.
[[nodiscard]] bool is_spd(const MatrixXd &m);

} // namespace mfgmm
