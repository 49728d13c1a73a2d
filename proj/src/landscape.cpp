#include "mfgmm/landscape.hpp"

#include "mfgmm/chart.hpp"
#include "mfgmm/error.hpp"
#include "mfgmm/gmm_core.hpp"
#include "mfgmm/io.hpp"
#include "mfgmm/mean_field.hpp"
#include "mfgmm/newton.hpp"
#include "mfgmm/p1_forms.hpp"
#include "mfgmm/parallel.hpp"
#include "mfgmm/spd_geometry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

namespace mfgmm::landscape {

MatrixXi confusion_of(const std::vector<int> &z, const std::vector<int> &truth,
                      int K) {
  if (z.size() != truth.size())
    throw ConfigError(fmt::format(
        "confusion_of: {} labels against {} true labels", z.size(), truth.size()));
  MatrixXi ad = MatrixXi::Zero(K, K);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0 || z[i] >= K || truth[i] < 0 || truth[i] >= K)
      throw ConfigError(fmt::format("confusion_of: label out of range at {}", i + 1));
    ++ad(z[i], truth[i]);
  }
  return ad;
}

std::vector<int> column_sums(const MatrixXi &ad) {
  std::vector<int> s(ad.cols());
  for (int j = 0; j < ad.cols(); ++j)
    s[j] = ad.col(j).sum();
  return s;
}

MatrixXd markov_of(const MatrixXi &ad) {
  const int K = static_cast<int>(ad.rows());
  if (ad.cols() != K || (ad.array() < 0).any())
    throw ConfigError("markov_of: need a square nonnegative matrix");
  MatrixXd A(K, K);
  for (int j = 0; j < K; ++j) {
    const int n = ad.col(j).sum();
    for (int k = 0; k < K; ++k)
      A(k, j) = n > 0 ? static_cast<double>(ad(k, j)) / n : 1.0 / K;
  }
  return A;
}

void check_markov(const MatrixXd &A) {
  if (A.rows() != A.cols() || A.rows() == 0)
    throw ConfigError("Markov matrix must be square and non-empty");
  if (!A.allFinite() || (A.array() < 0.0).any())
    throw ConfigError("Markov matrix entries must be nonnegative");
  for (int j = 0; j < A.cols(); ++j)
    if (std::abs(A.col(j).sum() - 1.0) > 1e-12)
      throw ConfigError(fmt::format(
          "Markov matrix column {} sums to {}, not 1", j + 1, A.col(j).sum()));
}

SheetStats population_stats(const MatrixXd &A, const TrueMixture &truth,
                            Weighting weighting) {
  const int K = truth.K();
  const int P = truth.P();
  if (static_cast<int>(truth.classSizes.size()) != K)
    throw ConfigError("landscape: truth.classSizes must have K entries");
  if (A.rows() != K)
    throw ConfigError(fmt::format("landscape: A must be {}x{}", K, K));
  check_markov(A);
  std::vector<MatrixXd> second(K);
  for (int j = 0; j < K; ++j)
    second[j] = truth.precisions[j].inverse() +
                truth.means[j] * truth.means[j].transpose();
  SheetStats s(K, ClassStats::zero(P));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) {
      double w = truth.classSizes[j] * A(k, j);
      if (weighting == Weighting::AsPrinted)
        w *= truth.weights[j];
      s[k].count += w;
      s[k].sum += w * truth.means[j];
      s[k].sum_sq += w * second[j];
    }
  return s;
}

double phi_hat(const MatrixXd &A, const ModelPoint &xi,
               const TrueMixture &truth, const PriorConfig &priors,
               double lambda0, Weighting weighting) {
  if (!(lambda0 > 0.0))
    throw ConfigError("phi_hat: lambda0 must be > 0");
  return gmm::energy(population_stats(A, truth, weighting), xi, priors) /
         lambda0;
}

double phi_hat_at(const SheetStats &stats, const ModelPoint &xi,
                  const PriorConfig &priors, double lambda0) {
  PriorConfig no_dirichlet = priors;
  no_dirichlet.dirichlet_alpha = 1.0;
  double e = gmm::energy(stats, xi, no_dirichlet, false);
  for (int k = 0; k < xi.K(); ++k)
    if (xi.weights[k] > 0.0)
      e -= (priors.dirichlet_alpha - 1.0) * std::log(xi.weights[k]);
  return e / lambda0;
}

namespace {

double stirling(int n) {
  if (n == 0)
    return 0.0;
  const double x = n;
  return x * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi * x);
}

void check_counts(const MatrixXi &ad) {
  if (ad.rows() != ad.cols() || ad.rows() == 0 || (ad.array() < 0).any())
    throw ConfigError("confusion matrix must be square with nonnegative entries");
}

} // namespace

double exact_log_count(const MatrixXi &ad) {
  check_counts(ad);
  double s = 0.0;
  for (int j = 0; j < ad.cols(); ++j) {
    s += std::lgamma(ad.col(j).sum() + 1.0);
    for (int k = 0; k < ad.rows(); ++k)
      s -= std::lgamma(ad(k, j) + 1.0);
  }
  return s;
}

double stirling_log_count(const MatrixXi &ad) {
  check_counts(ad);
  double s = 0.0;
  for (int j = 0; j < ad.cols(); ++j) {
    s += stirling(ad.col(j).sum());
    for (int k = 0; k < ad.rows(); ++k)
      s -= stirling(ad(k, j));
  }
  return s;
}

double psi(const MatrixXi &ad, double lambda) {
  if (!(lambda > 0.0))
    throw ConfigError("psi: lambda must be > 0");
  return -stirling_log_count(ad) / lambda;
}

VectorXd weight_block(const SheetStats &stats, const PriorConfig &priors) {
  const int K = static_cast<int>(stats.size());
  VectorXd pi(K);
  for (int k = 0; k < K; ++k)
    pi[k] = std::max(stats[k].count + priors.dirichlet_alpha - 1.0, 0.0);
  if (!(pi.sum() > 0.0))
    throw NumericalError("weight block: every class has zero weight");
  return pi / pi.sum();
}

Minimizer m_of(const MatrixXd &A, const TrueMixture &truth,
               const PriorConfig &priors, double lambda0, Solver solver,
               Weighting weighting) {
  const int K = truth.K();
  const int P = truth.P();
  priors.validate(K);
  if (!(lambda0 > 0.0))
    throw ConfigError("m_of: lambda0 must be > 0");
  const SheetStats stats = population_stats(A, truth, weighting);
  Minimizer out;
  bool pinned = false, failed = false;

  if (solver == Solver::ClosedForm || (solver == Solver::Auto && P == 1)) {
    if (P != 1)
      throw ConfigError("m_of: closed forms need P = 1");
    const p1::Solution s = p1::solve(A, truth, priors, lambda0, weighting);
    out.m = s.m;
    for (bool d : s.degenerate)
      pinned = pinned || d;
  } else {
    out.m = ModelPoint::centered(K, P);
    out.m.weights = weight_block(stats, priors);
    const chart::Layout lay{1, P, false};
    const VectorXd one = VectorXd::Ones(1);
    for (int k = 0; k < K; ++k) {
      if (!(stats[k].count > 0.0)) {
        pinned = true; // no data: prior mode
        continue;
      }
      PriorConfig pk = priors;
      pk.sigma_k = VectorXd::Constant(1, priors.sigma_k[k]);
      pk.dirichlet_alpha = 1.0;
      const SheetStats sk{stats[k]};
      auto f = [&](const VectorXd &t) {
        return gmm::energy(sk, chart::decode(t, lay, one), pk, false);
      };
      auto g = [&](const VectorXd &t) {
        const ModelPoint xi = chart::decode(t, lay, one);
        return chart::pull_back(gmm::energy_gradient(sk, xi, pk), xi, lay);
      };
      const VectorXd x0 = chart::encode(gmm::moment_estimate(sk, kInf), lay);
      VectorXd x;
      try {
        x = newton::minimize(f, g, x0).x;
      } catch (const newton::Error &e) {
        x = e.best();
        failed = true;
      }
      const ModelPoint mk = chart::decode(x, lay, one);
      out.m.means[k] = mk.means[0];
      out.m.precisions[k] = mk.precisions[0];
    }
  }
  out.value = phi_hat_at(stats, out.m, priors, lambda0);
  if (failed || !std::isfinite(out.value))
    out.status = "failed";
  else if (!gmm::in_cutoff(out.m, priors.R))
    out.status = "cutoff_boundary";
  else if (pinned)
    out.status = "pinned";
  return out;
}

std::vector<std::vector<int>> compositions(int n, int K) {
  if (K < 1 || n < 0)
    throw ConfigError(fmt::format("compositions: need K >= 1, n >= 0 (got {}, {})", K, n));
  if (K == 1)
    return {{n}};
  std::vector<std::vector<int>> out;
  for (int first = 0; first <= n; ++first)
    for (auto &rest : compositions(n - first, K - 1)) {
      rest.insert(rest.begin(), first);
      out.push_back(std::move(rest));
    }
  return out;
}

namespace {

double binomial(int n, int k) {
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(n - k + 1.0)));
}

void check_spec(const LatticeSpec &spec) {
  if (spec.class_sizes.empty())
    throw ConfigError("lattice: class sizes must be non-empty");
  if (spec.stride < 1)
    throw ConfigError(fmt::format("lattice: stride must be >= 1 (got {})", spec.stride));
  for (int n : spec.class_sizes)
    if (n < 0)
      throw ConfigError("lattice: class sizes must be nonnegative");
}

} // namespace

double full_lattice_size(const LatticeSpec &spec) {
  check_spec(spec);
  const int K = static_cast<int>(spec.class_sizes.size());
  double s = 1.0;
  for (int n : spec.class_sizes)
    s *= binomial(n + K - 1, K - 1);
  return s;
}

double lattice_size(const LatticeSpec &spec) {
  check_spec(spec);
  const int K = static_cast<int>(spec.class_sizes.size());
  double s = 1.0;
  for (int n : spec.class_sizes)
    s *= std::ceil(binomial(n + K - 1, K - 1) / spec.stride);
  return s;
}

std::vector<MatrixXi> enumerate_lattice(const LatticeSpec &spec) {
  const double size = lattice_size(spec);
  if (size > static_cast<double>(spec.budget))
    throw BudgetError(fmt::format(
        "lattice has {:.0f} cells (prod C(N_k'+K-1, K-1) = {:.0f} at stride {}), "
        "above the budget of {}; raise the stride",
        size, full_lattice_size(spec), spec.stride, spec.budget));
  const int K = static_cast<int>(spec.class_sizes.size());
  std::vector<std::vector<std::vector<int>>> cols(K);
  for (int j = 0; j < K; ++j) {
    auto all = compositions(spec.class_sizes[j], K);
    for (std::size_t i = 0; i < all.size(); i += spec.stride)
      cols[j].push_back(all[i]);
  }
  std::vector<MatrixXi> out;
  out.reserve(static_cast<std::size_t>(size));
  std::vector<std::size_t> idx(K, 0);
  while (true) {
    MatrixXi ad(K, K);
    for (int j = 0; j < K; ++j)
      for (int k = 0; k < K; ++k)
        ad(k, j) = cols[j][idx[j]][k];
    out.push_back(ad);
    int j = K - 1; // first column varies slowest
    while (j >= 0 && ++idx[j] == cols[j].size())
      idx[j--] = 0;
    if (j < 0)
      break;
  }
  return out;
}

namespace {

bool lex_less(const MatrixXd &a, const MatrixXd &b) {
  for (int k = 0; k < a.rows(); ++k)
    for (int j = 0; j < a.cols(); ++j)
      if (a(k, j) != b(k, j))
        return a(k, j) < b(k, j);
  return false;
}

} // namespace

SweepResult sweep(const LatticeSpec &spec, const TrueMixture &truth,
                  const PriorConfig &priors, const SweepOptions &opts) {
  const int K = truth.K();
  if (static_cast<int>(spec.class_sizes.size()) != K)
    throw ConfigError(fmt::format("sweep: lattice has {} class sizes, truth has K={}",
                                  spec.class_sizes.size(), K));
  if (!(opts.beta > 0.0) || !(opts.lambda0 > 0.0))
    throw ConfigError("sweep: beta and lambda0 must be > 0");
  TrueMixture tm = truth;
  tm.classSizes = spec.class_sizes;
  const std::vector<MatrixXi> cells = enumerate_lattice(spec);
  SweepResult res;
  res.lambda = opts.beta * opts.lambda0;
  res.records.resize(cells.size());
  parallel_for(static_cast<int>(cells.size()), opts.threads, [&](int i) {
    Record &r = res.records[i];
    r.counts = cells[i];
    r.A = markov_of(cells[i]);
    const Minimizer mz = m_of(r.A, tm, priors, opts.lambda0, opts.solver, opts.weighting);
    r.m = mz.m;
    r.phi_hat = mz.value;
    r.status = mz.status;
    r.psi = psi(cells[i], res.lambda);
    r.F = r.phi_hat + r.psi;
  });
  VectorXd terms(res.records.size());
  int finite = 0;
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const Record &r = res.records[i];
    if (!std::isfinite(r.F))
      continue;
    terms[finite++] = -res.lambda * r.F;
    if (res.best < 0) {
      res.best = static_cast<int>(i);
      continue;
    }
    const Record &b = res.records[res.best];
    if (r.F < b.F || (r.F == b.F && lex_less(r.A, b.A)))
      res.best = static_cast<int>(i);
  }
  if (res.best < 0)
    throw NumericalError("sweep: no lattice cell has a finite free energy");
  res.log_z_sum = mf::log_sum_exp(terms.head(finite));
  double norm = 0.0;
  for (int n : spec.class_sizes)
    if (n > 0)
      norm += (K - 1) * std::log(static_cast<double>(n));
  res.log_z_per_count = res.log_z_sum - norm;
  res.log_z_per_volume = res.log_z_per_count - 0.5 * K * (K - 1) * std::log(2.0);
  return res;
}

void SweepResult::write_csv(const std::string &path) const {
  std::ofstream out(path);
  if (!out)
    throw ConfigError(fmt::format("cannot write {}", path));
  const int K = records.empty() ? 0 : static_cast<int>(records.front().A.rows());
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      out << (K < 10 ? fmt::format("alpha_{}{}", k + 1, j + 1)
                     : fmt::format("alpha_{}_{}", k + 1, j + 1))
          << ",";
  out << "phi_hat,psi,F,solver_status\n";
  for (const Record &r : records) {
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j)
        out << fmt::format("{:.17g},", r.A(k, j));
    out << fmt::format("{:.17g},{:.17g},{:.17g},{}\n", r.phi_hat, r.psi, r.F, r.status);
  }
}

void SweepResult::write_summary(const std::string &path) const {
  const Record &b = argmin();
  io::json j;
  j["cells"] = records.size();
  j["lambda"] = lambda;
  j["A_star"] = io::matrix_json(b.A);
  io::json counts = io::json::array();
  for (int k = 0; k < b.counts.rows(); ++k) {
    io::json row = io::json::array();
    for (int c = 0; c < b.counts.cols(); ++c)
      row.push_back(b.counts(k, c));
    counts.push_back(row);
  }
  j["counts_star"] = counts;
  j["M_star"] = io::to_json(b.m);
  j["phi_hat_star"] = b.phi_hat;
  j["psi_star"] = b.psi;
  j["F_star"] = b.F;
  j["solver_status_star"] = b.status;
  j["log_sum_exp_minus_lambda_F"] = log_z_sum;
  j["normalized_per_count"] = log_z_per_count;
  j["normalized_per_cell_volume"] = log_z_per_volume;
  j["approximation"] = "F = Phi_hat + psi; subleading O(sqrt(lambda)) and "
                       "O(log lambda) terms are not modeled";
  io::write_json(path, j);
}

std::vector<int> sample_class(const MatrixXi &ad,
                              const std::vector<int> &true_labels, Rng &rng) {
  const int K = static_cast<int>(ad.rows());
  std::vector<std::vector<int>> members(K);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i];
    if (t < 0 || t >= K)
      throw ConfigError(fmt::format("sample_class: true label out of range at {}", i + 1));
    members[t].push_back(static_cast<int>(i));
  }
  std::vector<int> z(true_labels.size(), 0);
  for (int j = 0; j < K; ++j) {
    if (static_cast<int>(members[j].size()) != ad.col(j).sum())
      throw ConfigError(fmt::format(
          "sample_class: column {} sums to {} but true class {} has {} members",
          j + 1, ad.col(j).sum(), j + 1, members[j].size()));
    std::shuffle(members[j].begin(), members[j].end(), rng);
    std::size_t pos = 0;
    for (int k = 0; k < K; ++k)
      for (int c = 0; c < ad(k, j); ++c)
        z[members[j][pos++]] = k;
  }
  return z;
}

std::vector<double> sample_phi(const Dataset &ds,
                               const std::vector<int> &true_labels,
                               const MatrixXi &ad, const ModelPoint &xi,
                               const PriorConfig &priors, double lambda0, int n,
                               std::uint64_t seed) {
  Rng rng = make_rng(seed, "sample_class");
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Assignment z(sample_class(ad, true_labels, rng), xi.K());
    out.push_back(gmm::phi(ds, xi, z, priors, lambda0));
  }
  return out;
}

TrueMixture empirical_truth(const Dataset &ds, const TrueMixture &truth) {
  const int K = truth.K();
  if (static_cast<int>(truth.trueLabels.size()) != ds.N())
    throw ConfigError("empirical_truth: labels do not match the data");
  const SheetStats st = gmm::class_stats(ds, Assignment(truth.trueLabels, K));
  TrueMixture out = truth;
  for (int k = 0; k < K; ++k) {
    if (st[k].count <= 0.0)
      continue;
    const VectorXd mu = st[k].sum / st[k].count;
    const MatrixXd cov = st[k].sum_sq / st[k].count - mu * mu.transpose();
    out.means[k] = mu;
    out.precisions[k] = cov.inverse();
    out.weights[k] = st[k].count / ds.N();
  }
  out.classSizes.assign(K, 0);
  for (int k = 0; k < K; ++k)
    out.classSizes[k] = static_cast<int>(std::lround(st[k].count));
  return out;
}

double point_distance(const ModelPoint &a, const ModelPoint &b) {
  const int K = a.K();
  if (b.K() != K || a.P() != b.P())
    throw ConfigError("point_distance: shape mismatch");
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  double best = kInf;
  do {
    double s = 0.0;
    for (int k = 0; k < K; ++k) {
      const int m = perm[k];
      const double dl = spd::rao_fisher_distance(a.precisions[k], b.precisions[m]);
      const double dw = a.weights[k] - b.weights[m];
      s += (a.means[k] - b.means[m]).squaredNorm() + dl * dl + dw * dw;
    }
    best = std::min(best, std::sqrt(s));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {

// |discrete gradient of F| per lattice cell: central differences in the
// free coordinates alpha(k, j), k < K-1, each trading mass with row K-1.
std::vector<double> lattice_gradient_norms(const SweepResult &sw,
                                           const std::vector<int> &sizes) {
  std::map<std::vector<int>, int> index;
  auto key = [](const MatrixXi &m) {
    return std::vector<int>(m.data(), m.data() + m.size());
  };
  for (std::size_t i = 0; i < sw.records.size(); ++i)
    index[key(sw.records[i].counts)] = static_cast<int>(i);
  const int K = static_cast<int>(sizes.size());
  std::vector<double> out(sw.records.size(), 0.0);
  for (std::size_t i = 0; i < sw.records.size(); ++i) {
    const MatrixXi &c = sw.records[i].counts;
    double s = 0.0;
    for (int j = 0; j < K; ++j) {
      if (sizes[j] == 0)
        continue;
      for (int k = 0; k + 1 < K; ++k) {
        MatrixXi up = c, dn = c;
        ++up(k, j);
        --up(K - 1, j);
        --dn(k, j);
        ++dn(K - 1, j);
        const auto iu = index.find(key(up));
        const auto id = index.find(key(dn));
        const double fu = iu != index.end() ? sw.records[iu->second].F : kInf;
        const double fd = id != index.end() ? sw.records[id->second].F : kInf;
        const double f0 = sw.records[i].F;
        const double h = 1.0 / sizes[j];
        double g = 0.0;
        if (std::isfinite(fu) && std::isfinite(fd))
          g = (fu - fd) / (2.0 * h);
        else if (std::isfinite(fu))
          g = (fu - f0) / h;
        else if (std::isfinite(fd))
          g = (f0 - fd) / h;
        s += g * g;
      }
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

} // namespace

ConcentrationReport concentration_check(const Dataset &ds,
                                        const TrueMixture &truth,
                                        const PriorConfig &priors,
                                        const ConcentrationOptions &opts) {
  const int K = truth.K();
  const int P = ds.P();
  if (static_cast<int>(truth.classSizes.size()) != K)
    throw ConfigError("concentration_check: truth.classSizes must have K entries");
  if (opts.grid < 2)
    throw ConfigError("concentration_check: grid needs >= 2 points per coordinate");
  const chart::Layout layout{K, P, true};
  const int d = layout.dim();
  const double total = std::pow(static_cast<double>(opts.grid), d);
  if (total > static_cast<double>(opts.grid_budget))
    throw BudgetError(fmt::format(
        "concentration grid has {}^{} = {:.0f} points, above the budget of {}",
        opts.grid, d, total, opts.grid_budget));

  // box in chart coordinates
  VectorXd center = chart::encode(ModelPoint::centered(K, P), layout);
  VectorXd half(d);
  const VectorXd xbar = ds.points.colwise().mean().transpose();
  const int pc = layout.per_component();
  for (int k = 0; k < K; ++k) {
    center.segment(k * pc, P) = xbar;
    half.segment(k * pc, P).setConstant(opts.mean_halfwidth);
    half.segment(k * pc + P, pc - P).setConstant(opts.log_precision_halfwidth);
  }
  half.tail(K - 1).setConstant(opts.eta_halfwidth);
  const VectorXd spacing = 2.0 * half / (opts.grid - 1);
  const auto n_grid = static_cast<long long>(total);
  auto grid_point = [&](long long idx) {
    VectorXd t(d);
    for (int c = 0; c < d; ++c) {
      t[c] = center[c] - half[c] + spacing[c] * static_cast<double>(idx % opts.grid);
      idx /= opts.grid;
    }
    return t;
  };

  LatticeSpec lattice{truth.classSizes, 1, 1'000'000};
  ConcentrationReport rep;
  for (double beta : opts.betas) {
    mf::CaviOptions co;
    co.beta = beta;
    co.seed = opts.seed;
    co.threads = opts.threads;
    const mf::Cavi cavi(ds, K, priors, opts.lambda0, co);
    const mf::CaviState st = cavi.run();
    const VectorXd &R = st.R;

    std::vector<double> vals(n_grid);
    const int chunks = 64;
    parallel_for(chunks, opts.threads, [&](int c) {
      for (long long i = c; i < n_grid; i += chunks)
        vals[i] = cavi.log_partition(grid_point(i), R);
    });
    long long arg = 0;
    for (long long i = 1; i < n_grid; ++i)
      if (vals[i] > vals[arg])
        arg = i;
    const VectorXd t0 = grid_point(arg);

    ConcentrationRow row;
    row.beta = beta;
    row.grid_argmax = chart::decode(t0, layout);

    auto neg = [&](const VectorXd &t) { return -cavi.log_partition(t, R) / cavi.lambda(); };
    auto neg_grad = [&](const VectorXd &t) {
      VectorXd a = -cavi.lambda() * cavi.phis(t) + R;
      a.array() -= mf::log_sum_exp(a);
      return cavi.gradient(cavi.sheets().average(a.array().exp().matrix()), t);
    };
    const VectorXd g0 = -cavi.lambda() * neg_grad(t0);
    const MatrixXd H = -cavi.lambda() * newton::fd_hessian(neg_grad, t0, 1e-4);
    row.grad_norm = g0.norm();
    row.grad_bound = (H.cwiseAbs() * spacing).norm();

    VectorXd t = t0;
    try {
      t = newton::minimize(neg, neg_grad, t0).x;
    } catch (const newton::Error &e) {
      t = e.best();
    }
    row.argmax = chart::decode(t, layout);
    row.log_z = cavi.log_partition(t, R);

    SweepOptions so;
    so.beta = beta;
    so.lambda0 = opts.lambda0;
    so.weighting = opts.weighting;
    so.threads = opts.threads;
    const SweepResult sw = sweep(lattice, truth, priors, so);
    row.A_star = sw.argmin().A;
    row.m_star = sw.argmin().m;
    row.grid_distance = point_distance(row.grid_argmax, row.m_star);
    row.distance = point_distance(row.argmax, row.m_star);

    const std::vector<double> gn = lattice_gradient_norms(sw, truth.classSizes);
    int nearest = 0;
    row.cavi_distance = kInf;
    for (std::size_t i = 0; i < sw.records.size(); ++i) {
      const double dist = point_distance(st.m, sw.records[i].m);
      if (dist < row.cavi_distance) {
        row.cavi_distance = dist;
        nearest = static_cast<int>(i);
      }
    }
    const auto below = std::count_if(gn.begin(), gn.end(),
                                     [&](double g) { return g < gn[nearest]; });
    row.cavi_grad_rank = static_cast<double>(below) / gn.size();
    rep.rows.push_back(row);
  }
  rep.distance_nonincreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (rep.rows[i].distance > rep.rows[i - 1].distance + 1e-8)
      rep.distance_nonincreasing = false;
  return rep;
}

} // namespace mfgmm::landscape
