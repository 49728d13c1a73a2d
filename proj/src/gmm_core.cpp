#include "mfgmm/gmm_core.hpp"

#include "mfgmm/error.hpp"
#include "mfgmm/random.hpp"
#include "mfgmm/spd_geometry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mfgmm::gmm {

std::pair<Dataset, TrueMixture> generate_dataset(const MixtureConfig &cfg,
                                                 const TruthSpec &truth) {
  cfg.validate();
  TrueMixture tm;
  tm.weights = truth.weights;
  tm.means = truth.means;
  tm.precisions = truth.precisions;
  tm.validate();
  if (tm.K() != cfg.K || tm.P() != cfg.P)
    throw ConfigError(fmt::format(
        "generate_dataset: truth has K={}, P={} but config has K={}, P={}",
        tm.K(), tm.P(), cfg.K, cfg.P));

  // x = mu + L^{-T} eps has covariance (L L^T)^{-1} = Lambda^{-1}.
  std::vector<MatrixXd> scale(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    Eigen::LLT<MatrixXd> llt(tm.precisions[k]);
    scale[k] = llt.matrixU().solve(MatrixXd::Identity(cfg.P, cfg.P));
  }

  Rng rng = make_rng(cfg.seed, "generate");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset ds{MatrixXd(cfg.N, cfg.P)};
  tm.trueLabels.resize(cfg.N);
  tm.classSizes.assign(cfg.K, 0);
  VectorXd eps(cfg.P);
  for (int n = 0; n < cfg.N; ++n) {
    const double u = unif(rng);
    int z = cfg.K - 1;
    double acc = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
      acc += tm.weights[k];
      if (u < acc) {
        z = k;
        break;
      }
    }
    for (int p = 0; p < cfg.P; ++p)
      eps[p] = gauss(rng);
    ds.points.row(n) = (tm.means[z] + scale[z] * eps).transpose();
    tm.trueLabels[n] = z;
    ++tm.classSizes[z];
  }
  return {std::move(ds), std::move(tm)};
}

SheetStats class_stats(const Dataset &ds, const Assignment &z) {
  if (z.N() != ds.N())
    throw ConfigError(fmt::format(
        "class_stats: assignment has {} labels for {} points", z.N(), ds.N()));
  SheetStats stats(z.K(), ClassStats::zero(ds.P()));
  for (int n = 0; n < ds.N(); ++n) {
    const VectorXd x = ds.points.row(n).transpose();
    ClassStats &s = stats[z.labels()[n]];
    s.count += 1.0;
    s.sum += x;
    s.sum_sq.noalias() += x * x.transpose();
  }
  return stats;
}

bool in_cutoff(const ModelPoint &xi, double R) {
  for (int k = 0; k < xi.K(); ++k) {
    if (!(xi.means[k].norm() < R))
      return false;
    if (!is_spd(xi.precisions[k]) ||
        !(spd::distance_to_identity(xi.precisions[k]) < R))
      return false;
  }
  return true;
}

double log_prior(const ModelPoint &xi, const PriorConfig &priors) {
  double lp = 0.0;
  for (int k = 0; k < xi.K(); ++k) {
    lp -= priors.a * xi.means[k].squaredNorm();
    if (std::isfinite(priors.sigma_k[k]))
      lp -= xi.precisions[k].squaredNorm() / (2.0 * priors.sigma_k[k]);
  }
  if (priors.dirichlet_alpha != 1.0)
    for (int k = 0; k < xi.K(); ++k)
      lp += (priors.dirichlet_alpha - 1.0) * std::log(xi.weights[k]);
  return lp;
}

namespace {

void check_shapes(const SheetStats &stats, const ModelPoint &xi) {
  if (static_cast<int>(stats.size()) != xi.K() ||
      static_cast<int>(xi.means.size()) != xi.K() ||
      static_cast<int>(xi.precisions.size()) != xi.K())
    throw ConfigError(fmt::format(
        "component count mismatch: {} classes vs K={}", stats.size(), xi.K()));
}

} // namespace

double energy(const SheetStats &stats, const ModelPoint &xi,
              const PriorConfig &priors, bool enforce_cutoff) {
  check_shapes(stats, xi);
  if (enforce_cutoff && !in_cutoff(xi, priors.R))
    return kInf;
  double e = 0.0;
  for (int k = 0; k < xi.K(); ++k) {
    const ClassStats &s = stats[k];
    if (s.count == 0.0)
      continue; // empty class: 0 * anything = 0
    const MatrixXd &lam = xi.precisions[k];
    const VectorXd &mu = xi.means[k];
    Eigen::LLT<MatrixXd> llt(lam);
    if (llt.info() != Eigen::Success)
      return kInf;
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = (lam * s.sum_sq).trace() - 2.0 * mu.dot(lam * s.sum) +
                        s.count * mu.dot(lam * mu);
    e += 0.5 * quad - 0.5 * s.count * logdet;
    if (xi.weights[k] <= 0.0)
      return kInf;
    e -= s.count * std::log(xi.weights[k]);
  }
  return e - log_prior(xi, priors);
}

double log_posterior(const Dataset &ds, const ModelPoint &xi,
                     const Assignment &z, const PriorConfig &priors) {
  return -energy(class_stats(ds, z), xi, priors);
}

double phi(const Dataset &ds, const ModelPoint &xi, const Assignment &z,
           const PriorConfig &priors, double lambda0) {
  if (!(lambda0 > 0.0))
    throw ConfigError(fmt::format("phi: lambda0 must be > 0 (got {})", lambda0));
  return energy(class_stats(ds, z), xi, priors) / lambda0;
}

double TangentVector::norm() const {
  double s = weights.squaredNorm();
  for (const auto &m : means)
    s += m.squaredNorm();
  for (const auto &m : precisions)
    s += m.squaredNorm();
  return std::sqrt(s);
}

TangentVector energy_gradient(const SheetStats &stats, const ModelPoint &xi,
                              const PriorConfig &priors) {
  check_shapes(stats, xi);
  const int K = xi.K();
  TangentVector g;
  g.means.resize(K);
  g.precisions.resize(K);
  g.weights = VectorXd::Zero(K);
  for (int k = 0; k < K; ++k) {
    const ClassStats &s = stats[k];
    const MatrixXd &lam = xi.precisions[k];
    const VectorXd &mu = xi.means[k];
    g.means[k] = lam * (s.count * mu - s.sum) + 2.0 * priors.a * mu;
    MatrixXd scatter = s.sum_sq - mu * s.sum.transpose() -
                       s.sum * mu.transpose() + s.count * mu * mu.transpose();
    MatrixXd gl = 0.5 * scatter;
    if (s.count != 0.0)
      gl -= 0.5 * s.count * lam.inverse();
    if (std::isfinite(priors.sigma_k[k]))
      gl += lam / priors.sigma_k[k];
    g.precisions[k] = 0.5 * (gl + gl.transpose());
    double gw = 0.0;
    if (s.count != 0.0)
      gw -= s.count / xi.weights[k];
    if (priors.dirichlet_alpha != 1.0)
      gw -= (priors.dirichlet_alpha - 1.0) / xi.weights[k];
    g.weights[k] = gw;
  }
  return g;
}

TangentVector phi_gradient(const Dataset &ds, const ModelPoint &xi,
                           const Assignment &z, const PriorConfig &priors,
                           double lambda0) {
  if (!(lambda0 > 0.0))
    throw ConfigError(
        fmt::format("phi_gradient: lambda0 must be > 0 (got {})", lambda0));
  if (!in_cutoff(xi, priors.R))
    throw NumericalError("gradient undefined at cut-off boundary");
  TangentVector g = energy_gradient(class_stats(ds, z), xi, priors);
  for (auto &m : g.means)
    m /= lambda0;
  for (auto &m : g.precisions)
    m /= lambda0;
  g.weights /= lambda0;
  g.weights.array() -= g.weights.mean();
  return g;
}

ModelPoint moment_estimate(const SheetStats &stats, double R) {
  const int K = static_cast<int>(stats.size());
  const int P = static_cast<int>(stats.front().sum.size());
  ModelPoint xi = ModelPoint::centered(K, P);
  double total = 0.0;
  for (const auto &s : stats)
    total += s.count;
  const double inner = 0.9 * R;
  for (int k = 0; k < K; ++k) {
    const ClassStats &s = stats[k];
    xi.weights[k] = total > 0.0 ? std::max(s.count, 1e-3 * total) : 1.0;
    if (s.count <= 0.0)
      continue;
    VectorXd mu = s.sum / s.count;
    if (mu.norm() > inner)
      mu *= inner / mu.norm();
    xi.means[k] = mu;
    const VectorXd m = s.sum / s.count;
    MatrixXd cov = s.sum_sq / s.count - m * m.transpose();
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    // log-eigenvalues of the precision, shrunk into the Rao-Fisher ball
    VectorXd le = (-es.eigenvalues().cwiseMax(1e-12).array().log()).matrix();
    if (le.norm() > inner)
      le *= inner / le.norm();
    MatrixXd lam = es.eigenvectors() * le.array().exp().matrix().asDiagonal() *
                   es.eigenvectors().transpose();
    xi.precisions[k] = 0.5 * (lam + lam.transpose());
  }
  xi.weights /= xi.weights.sum();
  return xi;
}

int lambda0_for(int N, double l0) {
  return std::max(1, static_cast<int>(std::floor(l0 * N)));
}

} // namespace mfgmm::gmm
