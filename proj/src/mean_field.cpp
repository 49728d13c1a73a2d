#include "mfgmm/mean_field.hpp"

#include "mfgmm/error.hpp"
#include "mfgmm/gmm_core.hpp"
#include "mfgmm/parallel.hpp"
#include "mfgmm/random.hpp"
#include "mfgmm/spd_geometry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfgmm::mf {

VectorXd flatten(const SheetStats &stats) {
  const int K = static_cast<int>(stats.size());
  const int P = static_cast<int>(stats.front().sum.size());
  const int w = 1 + P + P * P;
  VectorXd row(K * w);
  for (int k = 0; k < K; ++k) {
    row[k * w] = stats[k].count;
    row.segment(k * w + 1, P) = stats[k].sum;
    row.segment(k * w + 1 + P, P * P) =
        Eigen::Map<const VectorXd>(stats[k].sum_sq.data(), P * P);
  }
  return row;
}

SheetStats unflatten(const VectorXd &row, int K, int P) {
  const int w = 1 + P + P * P;
  if (row.size() != K * w)
    throw ConfigError("unflatten: row width does not match K and P");
  SheetStats out(K, ClassStats::zero(P));
  for (int k = 0; k < K; ++k) {
    out[k].count = row[k * w];
    out[k].sum = row.segment(k * w + 1, P);
    out[k].sum_sq = Eigen::Map<const MatrixXd>(row.data() + k * w + 1 + P, P, P);
  }
  return out;
}

EnergyForm energy_form(const ModelPoint &xi, const PriorConfig &priors) {
  const int K = xi.K();
  const int P = xi.P();
  const int w = 1 + P + P * P;
  EnergyForm f;
  f.coeffs.resize(K * w);
  for (int k = 0; k < K; ++k) {
    const MatrixXd &lam = xi.precisions[k];
    const VectorXd &mu = xi.means[k];
    Eigen::LLT<MatrixXd> llt(lam);
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    f.coeffs[k * w] = 0.5 * mu.dot(lam * mu) - 0.5 * logdet -
                      std::log(xi.weights[k]);
    f.coeffs.segment(k * w + 1, P) = -(lam * mu);
    const MatrixXd half = 0.5 * lam;
    f.coeffs.segment(k * w + 1 + P, P * P) =
        Eigen::Map<const VectorXd>(half.data(), P * P);
  }
  f.constant = -gmm::log_prior(xi, priors);
  return f;
}

SheetTable::SheetTable(const Dataset &ds, int K, int lambda0,
                       std::uint64_t budget, int threads)
    : K_(K), P_(ds.P()), N_(ds.N()), lambda0_(lambda0) {
  if (K < 1 || lambda0 < 1)
    throw ConfigError(fmt::format(
        "SheetTable: need K >= 1 and lambda0 >= 1 (got K={}, lambda0={})", K,
        lambda0));
  std::uint64_t total = 1;
  for (int n = 0; n < N_; ++n) {
    if (total > budget / static_cast<std::uint64_t>(K))
      throw BudgetError(fmt::format(
          "exact enumeration needs K^N = {}^{} labelings, above the budget of "
          "{}; use the landscape module's effective form instead",
          K, N_, budget));
    total *= static_cast<std::uint64_t>(K);
  }

  // Filter admissible codes chunk by chunk; chunks are merged in order.
  const int chunks = static_cast<int>(std::min<std::uint64_t>(total, 64));
  std::vector<std::vector<std::uint64_t>> found(chunks);
  parallel_for(chunks, threads, [&](int c) {
    const std::uint64_t lo = total * c / chunks;
    const std::uint64_t hi = total * (c + 1) / chunks;
    std::vector<int> counts(K);
    for (std::uint64_t code = lo; code < hi; ++code) {
      std::fill(counts.begin(), counts.end(), 0);
      std::uint64_t x = code;
      for (int n = 0; n < N_; ++n) {
        ++counts[x % K];
        x /= K;
      }
      if (*std::min_element(counts.begin(), counts.end()) >= lambda0)
        found[c].push_back(code);
    }
  });
  for (auto &f : found)
    codes_.insert(codes_.end(), f.begin(), f.end());

  const int w = 1 + P_ + P_ * P_;
  stats_ = MatrixXd::Zero(static_cast<Eigen::Index>(codes_.size()), K * w);
  std::vector<MatrixXd> outer(N_);
  for (int n = 0; n < N_; ++n) {
    const VectorXd x = ds.points.row(n).transpose();
    outer[n] = x * x.transpose();
  }
  parallel_for(size(), threads, [&](int i) {
    std::uint64_t x = codes_[i];
    for (int n = 0; n < N_; ++n) {
      const int k = static_cast<int>(x % K);
      x /= K;
      stats_(i, k * w) += 1.0;
      for (int p = 0; p < P_; ++p)
        stats_(i, k * w + 1 + p) += ds.points(n, p);
      for (int q = 0; q < P_ * P_; ++q)
        stats_(i, k * w + 1 + P_ + q) += outer[n].data()[q];
    }
  });
}

Assignment SheetTable::assignment(int i) const {
  std::vector<int> labels(N_);
  std::uint64_t x = codes_.at(i);
  for (int n = 0; n < N_; ++n) {
    labels[n] = static_cast<int>(x % K_);
    x /= K_;
  }
  return Assignment(labels, K_);
}

SheetStats SheetTable::sheet(int i) const {
  return unflatten(stats_.row(i).transpose(), K_, P_);
}

int SheetTable::find(const std::vector<int> &labels) const {
  if (static_cast<int>(labels.size()) != N_)
    return -1;
  std::uint64_t code = 0;
  for (int n = N_ - 1; n >= 0; --n)
    code = code * K_ + static_cast<std::uint64_t>(labels[n]);
  auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
  if (it == codes_.end() || *it != code)
    return -1;
  return static_cast<int>(it - codes_.begin());
}

VectorXd SheetTable::energies(const ModelPoint &xi,
                              const PriorConfig &priors) const {
  if (!gmm::in_cutoff(xi, priors.R))
    return VectorXd::Constant(size(), kInf);
  const EnergyForm f = energy_form(xi, priors);
  VectorXd e = stats_ * f.coeffs;
  e.array() += f.constant;
  return e;
}

SheetStats SheetTable::average(const VectorXd &w) const {
  return unflatten(stats_.transpose() * w, K_, P_);
}

double log_sum_exp(const VectorXd &v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx))
    return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

LaplaceResult laplace_log_integral(const newton::Objective &potential,
                                   const newton::Gradient &grad, double lambda,
                                   const VectorXd &x0,
                                   const std::function<double(const VectorXd &)> &log_h,
                                   const newton::Options &opts) {
  if (!(lambda > 0.0))
    throw ConfigError(fmt::format("laplace: lambda must be > 0 (got {})", lambda));
  const newton::Result r = newton::minimize(potential, grad, x0, opts);
  Eigen::LLT<MatrixXd> llt(r.hessian);
  if (llt.info() != Eigen::Success)
    throw NumericalError("laplace: Hessian at the mode is not positive definite");
  const double d = static_cast<double>(x0.size());
  LaplaceResult out;
  out.mode = r.x;
  out.hessian = r.hessian;
  out.log_det_hessian =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  out.log_value = -lambda * r.value +
                  0.5 * d * std::log(2.0 * std::numbers::pi / lambda) -
                  0.5 * out.log_det_hessian;
  if (log_h)
    out.log_value += log_h(r.x);
  return out;
}

GaussHermite gauss_hermite(int n) {
  if (n < 1)
    throw ConfigError("gauss_hermite: need at least one node");
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k)
    J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  GaussHermite g;
  g.nodes = es.eigenvalues();
  g.weights = es.eigenvectors().row(0).array().square().transpose();
  g.weights /= g.weights.sum();
  return g;
}

VectorXd riemannian_coords(const gmm::TangentVector &g, const ModelPoint &xi) {
  const int K = xi.K(), P = xi.P();
  VectorXd out(K * (P + P * P) + K);
  int o = 0;
  for (int k = 0; k < K; ++k) {
    out.segment(o, P) = g.means[k];
    o += P;
    const MatrixXd s = spd::spd_sqrt(xi.precisions[k]);
    const MatrixXd r = s * g.precisions[k] * s;
    out.segment(o, P * P) = Eigen::Map<const VectorXd>(r.data(), P * P);
    o += P * P;
  }
  out.segment(o, K) = g.weights.array() - g.weights.mean();
  return out;
}

int coordinate_count(int K, int P) { return K * (P + P * (P + 1) / 2) + K - 1; }

ModelPoint perturb(const ModelPoint &xi, int j, double delta) {
  const int K = xi.K(), P = xi.P();
  const int per = P + P * (P + 1) / 2;
  if (j < 0 || j >= coordinate_count(K, P))
    throw ConfigError(fmt::format("perturb: coordinate {} out of range", j));
  ModelPoint out = xi;
  if (j >= K * per) {
    const int k = j - K * per;
    out.weights[k] += delta;
    out.weights[K - 1] -= delta;
    return out;
  }
  const int k = j / per;
  const int r = j % per;
  if (r < P) {
    out.means[k][r] += delta;
    return out;
  }
  // r - P indexes the pairs (a, b), a <= b, column by column
  int idx = r - P, a = 0, b = 0;
  for (b = 0; b < P; ++b) {
    if (idx <= b) {
      a = idx;
      break;
    }
    idx -= b + 1;
  }
  MatrixXd E = MatrixXd::Zero(P, P);
  if (a == b)
    E(a, a) = 1.0;
  else
    E(a, b) = E(b, a) = 1.0 / std::sqrt(2.0);
  const MatrixXd s = spd::spd_sqrt(xi.precisions[k]);
  MatrixXd lam = s * spd::sym_exp(delta * E) * s;
  out.precisions[k] = 0.5 * (lam + lam.transpose());
  return out;
}

std::vector<int> kmeans(const Dataset &ds, int K, std::uint64_t seed,
                        int max_iter) {
  const int N = ds.N();
  Rng rng = make_rng(seed, "kmeans");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd centers(K, ds.P());
  centers.row(0) = ds.points.row(std::uniform_int_distribution<int>(0, N - 1)(rng));
  VectorXd d2 = VectorXd::Constant(N, kInf);
  for (int k = 1; k < K; ++k) {
    for (int n = 0; n < N; ++n)
      d2[n] = std::min(d2[n], (ds.points.row(n) - centers.row(k - 1)).squaredNorm());
    const double total = d2.sum();
    double target = unif(rng) * total;
    int pick = N - 1;
    for (int n = 0; n < N; ++n) {
      target -= d2[n];
      if (target <= 0.0) {
        pick = n;
        break;
      }
    }
    centers.row(k) = ds.points.row(pick);
  }
  std::vector<int> labels(N, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (int n = 0; n < N; ++n) {
      int best = 0;
      double bd = kInf;
      for (int k = 0; k < K; ++k) {
        const double d = (ds.points.row(n) - centers.row(k)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (labels[n] != best) {
        labels[n] = best;
        changed = true;
      }
    }
    if (!changed)
      break;
    for (int k = 0; k < K; ++k) {
      int c = 0;
      Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(ds.P());
      for (int n = 0; n < N; ++n)
        if (labels[n] == k) {
          s += ds.points.row(n);
          ++c;
        }
      if (c > 0)
        centers.row(k) = s / c;
    }
  }
  return labels;
}

Cavi::Cavi(const Dataset &ds, int K, const PriorConfig &priors, int lambda0,
           CaviOptions opts)
    : ds_(ds), priors_(priors), lambda0_(lambda0), opts_(opts),
      table_(ds, K, lambda0, opts.budget, opts.threads),
      layout_{K, ds.P(), true} {
  priors_.validate(K);
  if (!(opts_.beta > 0.0))
    throw ConfigError(fmt::format("cavi: beta must be > 0 (got {})", opts_.beta));
  if (table_.size() == 0)
    throw ConfigError(fmt::format(
        "cavi: no labeling has every class of size >= lambda0 = {}", lambda0));
}

double Cavi::potential(const SheetStats &stats, const VectorXd &theta) const {
  return gmm::energy(stats, chart::decode(theta, layout_), priors_) / lambda0_;
}

VectorXd Cavi::gradient(const SheetStats &stats, const VectorXd &theta) const {
  const ModelPoint xi = chart::decode(theta, layout_);
  return chart::pull_back(gmm::energy_gradient(stats, xi, priors_), xi,
                          layout_) /
         lambda0_;
}

VectorXd Cavi::start_point(const SheetStats &stats) const {
  return chart::encode(gmm::moment_estimate(stats, priors_.R), layout_);
}

VectorXd Cavi::phis(const VectorXd &theta) const {
  return table_.energies(chart::decode(theta, layout_), priors_) / lambda0_;
}

newton::Result Cavi::mode(const VectorXd &u, const VectorXd &theta0) const {
  const SheetStats avg = table_.average(u);
  VectorXd x0 = theta0;
  if (x0.size() != layout_.dim() || !std::isfinite(potential(avg, x0)))
    x0 = start_point(avg);
  return newton::minimize(
      [&](const VectorXd &t) { return potential(avg, t); },
      [&](const VectorXd &t) { return gradient(avg, t); }, x0);
}

VectorXd Cavi::corrections(const VectorXd &theta, const MatrixXd &H,
                           Backend backend) const {
  const int d = layout_.dim();
  const int w = stats_width(layout_.K, layout_.P);
  auto coeffs = [&](const VectorXd &t, bool &inside) {
    const ModelPoint xi = chart::decode(t, layout_);
    inside = gmm::in_cutoff(xi, priors_.R);
    const EnergyForm f = energy_form(xi, priors_);
    VectorXd c(w + 1);
    c.head(w) = f.coeffs;
    c[w] = f.constant;
    return c;
  };
  bool inside = true;
  const VectorXd c0 = coeffs(theta, inside);
  const MatrixXd S = (lambda() * H).inverse();
  VectorXd delta = VectorXd::Zero(w + 1);

  if (backend == Backend::Laplace) {
    // E[C] - C(m) ~ tr(C'' S) / 2, via second differences along eigenvectors
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
    const double h = 1e-3;
    for (int j = 0; j < d; ++j) {
      const VectorXd q = es.eigenvectors().col(j);
      bool a = true, b = true;
      const VectorXd cp = coeffs(theta + h * q, a);
      const VectorXd cm = coeffs(theta - h * q, b);
      delta += 0.5 * es.eigenvalues()[j] * (cp - 2.0 * c0 + cm) / (h * h);
    }
  } else {
    const GaussHermite gh = gauss_hermite(opts_.gh_nodes);
    const double total = std::pow(static_cast<double>(opts_.gh_nodes), d);
    if (total > 2e6)
      throw ConfigError(fmt::format(
          "quadrature backend needs {}^{} nodes; use the Laplace backend",
          opts_.gh_nodes, d));
    Eigen::LLT<MatrixXd> llt(0.5 * (S + S.transpose()));
    const MatrixXd L = llt.matrixL();
    std::vector<int> idx(d, 0);
    VectorXd z(d);
    VectorXd acc = VectorXd::Zero(w + 1);
    double wsum = 0.0;
    const auto count = static_cast<long long>(total);
    for (long long it = 0; it < count; ++it) {
      double wt = 1.0;
      for (int j = 0; j < d; ++j) {
        z[j] = gh.nodes[idx[j]];
        wt *= gh.weights[idx[j]];
      }
      bool in = true;
      const VectorXd c = coeffs(theta + L * z, in);
      if (in) { // the surrogate is truncated to the cut-off support
        acc += wt * c;
        wsum += wt;
      }
      for (int j = 0; j < d; ++j) {
        if (++idx[j] < opts_.gh_nodes)
          break;
        idx[j] = 0;
      }
    }
    if (!(wsum > 0.0))
      throw NumericalError("quadrature: every node left the cut-off");
    delta = acc / wsum - c0;
  }
  VectorXd R = table_.stats() * delta.head(w);
  R.array() += delta[w];
  return -opts_.beta * R;
}

double Cavi::log_partition(const VectorXd &theta, const VectorXd &R) const {
  return log_sum_exp(-lambda() * phis(theta) + R);
}

double Cavi::log_partition(const ModelPoint &xi, const VectorXd &R) const {
  return log_sum_exp(-opts_.beta * table_.energies(xi, priors_) + R);
}

double Cavi::critical_point_residual(const ModelPoint &xi,
                                     const VectorXd &R) const {
  VectorXd a = -opts_.beta * table_.energies(xi, priors_) + R;
  a.array() -= log_sum_exp(a);
  const VectorXd wts = a.array().exp().matrix();
  const auto g = gmm::energy_gradient(table_.average(wts), xi, priors_);
  return riemannian_coords(g, xi).norm() / lambda0_;
}

double Cavi::mean_sheet_gradient_norm(const ModelPoint &xi) const {
  // Gradients are affine in the statistics: g_i = g0 + G row_i.
  const int K = layout_.K, P = layout_.P;
  const int w = stats_width(K, P);
  auto coords = [&](const VectorXd &row) {
    return riemannian_coords(
        gmm::energy_gradient(unflatten(row, K, P), xi, priors_), xi);
  };
  const VectorXd g0 = coords(VectorXd::Zero(w));
  MatrixXd G(g0.size(), w);
  for (int j = 0; j < w; ++j)
    G.col(j) = coords(VectorXd::Unit(w, j)) - g0;
  MatrixXd all = table_.stats() * G.transpose();
  all.rowwise() += g0.transpose();
  return all.rowwise().norm().mean() / lambda0_;
}

double Cavi::kl_proxy(const VectorXd &u, const VectorXd &theta,
                      const MatrixXd &H, const VectorXd &R) const {
  const VectorXd ph = phis(theta);
  double ent = 0.0, cross = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    if (u[i] <= 0.0)
      continue;
    ent += u[i] * std::log(u[i]);
    cross += u[i] * (lambda() * ph[i] - R[i]);
  }
  Eigen::LLT<MatrixXd> llt(lambda() * H);
  const double logdet =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = layout_.dim();
  return ent + cross + 0.5 * logdet -
         0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

CaviState Cavi::from_weights(const VectorXd &u, const VectorXd &theta0) const {
  if (u.size() != table_.size())
    throw ConfigError("cavi: weight vector does not match |Z_0|");
  CaviState s;
  s.u = u / u.sum();
  s.v = s.u.array().log().matrix();
  const newton::Result r = mode(s.u, theta0);
  s.theta = r.x;
  s.m = chart::decode(r.x, layout_);
  s.hessian = r.hessian;
  s.R = corrections(s.theta, s.hessian, opts_.backend);
  s.residual = critical_point_residual(s.m, s.R);
  s.kl = kl_proxy(s.u, s.theta, s.hessian, s.R);
  s.trace.push_back({0, s.dv, s.dm, s.residual, s.kl});
  return s;
}

CaviState Cavi::init() const {
  const std::vector<int> km = kmeans(ds_, layout_.K, opts_.seed);
  VectorXd v(table_.size());
  for (int i = 0; i < table_.size(); ++i) {
    const auto &l = table_.assignment(i).labels();
    int ham = 0;
    for (int n = 0; n < table_.N(); ++n)
      ham += l[n] != km[n];
    v[i] = -opts_.init_kappa * ham;
  }
  v.array() -= log_sum_exp(v);
  return from_weights(v.array().exp().matrix(), VectorXd());
}

CaviState Cavi::step(const CaviState &s) const {
  CaviState n;
  n.iteration = s.iteration + 1;
  n.v = -lambda() * phis(s.theta) + s.R;
  n.v.array() -= log_sum_exp(n.v);
  n.u = n.v.array().exp().matrix();
  const newton::Result r = mode(n.u, s.theta);
  n.theta = r.x;
  n.m = chart::decode(r.x, layout_);
  n.hessian = r.hessian;
  n.R = corrections(n.theta, n.hessian, opts_.backend);
  double dv = 0.0;
  for (int i = 0; i < n.v.size(); ++i) {
    if (std::isinf(n.v[i]) && std::isinf(s.v[i]))
      continue;
    dv = std::max(dv, std::abs(n.v[i] - s.v[i]));
  }
  n.dv = dv;
  n.dm = (n.theta - s.theta).lpNorm<Eigen::Infinity>();
  n.residual = critical_point_residual(n.m, n.R);
  n.kl = kl_proxy(n.u, n.theta, n.hessian, n.R);
  n.converged = std::max(n.dv, n.dm) < opts_.tol;
  n.trace = s.trace;
  n.trace.push_back({n.iteration, n.dv, n.dm, n.residual, n.kl});
  return n;
}

CaviState Cavi::run_from(CaviState s) const {
  while (!s.converged && s.iteration < opts_.max_iter)
    s = step(s);
  return s;
}

CaviState Cavi::run() const { return run_from(init()); }

} // namespace mfgmm::mf
