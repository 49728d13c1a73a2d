#include "mfgmm/types.hpp"

#include "mfgmm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mfgmm {

bool is_spd(const MatrixXd &m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite())
    return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-12;
}

void MixtureConfig::validate() const {
  if (K < 1)
    throw ConfigError(fmt::format("MixtureConfig.K must be >= 1 (got {})", K));
  if (P < 1)
    throw ConfigError(fmt::format("MixtureConfig.P must be >= 1 (got {})", P));
  if (N < K)
    throw ConfigError(
        fmt::format("MixtureConfig.N must be >= K (got N={}, K={})", N, K));
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ConfigError(
        fmt::format("MixtureConfig.beta must be > 0 (got {})", beta));
}

namespace {

void check_simplex(const VectorXd &w, const char *what) {
  if (w.size() == 0)
    throw ConfigError(fmt::format("{}: weights must be non-empty", what));
  if (!w.allFinite() || w.minCoeff() < 0.0)
    throw ConfigError(fmt::format("{}: weights must be nonnegative", what));
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw ConfigError(
        fmt::format("{}: weights must sum to 1 (sum = {})", what, w.sum()));
}

void check_components(int K, const std::vector<VectorXd> &means,
                      const std::vector<MatrixXd> &precisions,
                      const char *what) {
  if (static_cast<int>(means.size()) != K ||
      static_cast<int>(precisions.size()) != K)
    throw ConfigError(fmt::format(
        "{}: expected {} means and precisions (got {} and {})", what, K,
        means.size(), precisions.size()));
  const auto P = means.front().size();
  if (P < 1)
    throw ConfigError(fmt::format("{}: dimension must be >= 1", what));
  for (int k = 0; k < K; ++k) {
    if (means[k].size() != P || !means[k].allFinite())
      throw ConfigError(fmt::format("{}: mean {} malformed", what, k + 1));
    if (precisions[k].rows() != P || precisions[k].cols() != P)
      throw ConfigError(
          fmt::format("{}: precision {} has wrong shape", what, k + 1));
    if (!is_spd(precisions[k]))
      throw ConfigError(fmt::format(
          "{}: precision {} is not symmetric positive definite", what,
          k + 1));
  }
}

} // namespace

void TrueMixture::validate() const {
  check_simplex(weights, "TrueMixture");
  check_components(K(), means, precisions, "TrueMixture");
  if (trueLabels.empty())
    return;
  if (static_cast<int>(classSizes.size()) != K())
    throw ConfigError("TrueMixture: classSizes must have K entries");
  std::vector<int> counts(K(), 0);
  for (int z : trueLabels) {
    if (z < 0 || z >= K())
      throw ConfigError(
          fmt::format("TrueMixture: label {} out of range", z + 1));
    ++counts[z];
  }
  if (counts != classSizes)
    throw ConfigError("TrueMixture: classSizes inconsistent with trueLabels");
}

void ModelPoint::validate() const {
  check_simplex(weights, "ModelPoint");
  check_components(K(), means, precisions, "ModelPoint");
}

ModelPoint ModelPoint::centered(int K, int P) {
  ModelPoint xi;
  xi.weights = VectorXd::Constant(K, 1.0 / K);
  xi.means.assign(K, VectorXd::Zero(P));
  xi.precisions.assign(K, MatrixXd::Identity(P, P));
  return xi;
}

void PriorConfig::validate(int K) const {
  if (!(R > 0.0))
    throw ConfigError(fmt::format("PriorConfig.R must be > 0 (got {})", R));
  if (!(a >= 0.0) || !std::isfinite(a))
    throw ConfigError(fmt::format("PriorConfig.a must be >= 0 (got {})", a));
  if (sigma_k.size() != K)
    throw ConfigError(fmt::format(
        "PriorConfig.sigma_k must have K={} entries (got {})", K,
        sigma_k.size()));
  for (int k = 0; k < K; ++k)
    if (!(sigma_k[k] > 0.0))
      throw ConfigError(fmt::format(
          "PriorConfig.sigma_k[{}] must be > 0 (got {})", k + 1, sigma_k[k]));
  if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha))
    throw ConfigError(fmt::format(
        "PriorConfig.dirichlet_alpha must be > 0 (got {})", dirichlet_alpha));
}

PriorConfig PriorConfig::flat(int K, double R) {
  PriorConfig p;
  p.R = R;
  p.a = 0.0;
  p.sigma_k = VectorXd::Constant(K, kInf);
  p.dirichlet_alpha = 1.0;
  return p;
}

Assignment::Assignment(std::vector<int> labels, int K)
    : labels_(std::move(labels)), counts_(K, 0) {
  if (K < 1)
    throw ConfigError("Assignment: K must be >= 1");
  for (int z : labels_) {
    if (z < 0 || z >= K)
      throw ConfigError(fmt::format("Assignment: label {} outside 1..{}",
                                    z + 1, K));
    ++counts_[z];
  }
}

int Assignment::min_class_size() const {
  return counts_.empty() ? 0 : *std::min_element(counts_.begin(), counts_.end());
}

} // namespace mfgmm
