#include "mfgmm/spd_geometry.hpp"

#include "mfgmm/error.hpp"
#include "mfgmm/gmm_core.hpp"
#include "mfgmm/parallel.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mfgmm::spd {

namespace {

constexpr double kEigFloor = 1e-12;

template <typename F>
MatrixXd spectral_map(const MatrixXd &m, F f, bool need_positive) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition failed");
  VectorXd ev = es.eigenvalues();
  if (need_positive && ev.minCoeff() <= kEigFloor)
    throw ConfigError(fmt::format(
        "matrix is not positive definite (min eigenvalue {:.3e})",
        ev.minCoeff()));
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    ev[i] = f(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

SpdPoint::SpdPoint(MatrixXd m) : m_(std::move(m)) {
  if (!is_spd(m_))
    throw ConfigError("SpdPoint: matrix is not symmetric positive definite");
}

MatrixXd spd_sqrt(const MatrixXd &m) {
  return spectral_map(m, [](double x) { return std::sqrt(x); }, true);
}
MatrixXd spd_inv_sqrt(const MatrixXd &m) {
  return spectral_map(m, [](double x) { return 1.0 / std::sqrt(x); }, true);
}
MatrixXd spd_log(const MatrixXd &m) {
  return spectral_map(m, [](double x) { return std::log(x); }, true);
}
MatrixXd sym_exp(const MatrixXd &m) {
  return spectral_map(m, [](double x) { return std::exp(x); }, false);
}

double rao_fisher_distance(const MatrixXd &x, const MatrixXd &y) {
  const MatrixXd is = spd_inv_sqrt(x);
  const MatrixXd w = is * y * is;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (w + w.transpose()),
                                             Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= kEigFloor)
    throw ConfigError("rao_fisher_distance: second argument is not SPD");
  return ev.array().log().matrix().norm();
}

double rao_fisher_distance(const SpdPoint &x, const SpdPoint &y) {
  return rao_fisher_distance(x.matrix(), y.matrix());
}

double distance_to_identity(const MatrixXd &x) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (x + x.transpose()),
                                             Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= kEigFloor)
    return kInf;
  return ev.array().log().matrix().norm();
}

SpdPoint spd_geodesic(const SpdPoint &x, const SpdPoint &y, double t) {
  const MatrixXd s = spd_sqrt(x.matrix());
  const MatrixXd is = spd_inv_sqrt(x.matrix());
  const MatrixXd inner = spd_log(is * y.matrix() * is);
  MatrixXd g = s * sym_exp(t * inner) * s;
  return SpdPoint(0.5 * (g + g.transpose()));
}

ModelPoint ProductGeodesic::at(double s) const {
  ModelPoint xi;
  xi.weights = weights;
  for (const auto &c : components) {
    xi.means.push_back(c.mean_start + (c.alpha * s) * c.direction);
    const VectorXd e = (c.exponents * (c.beta * s)).array().exp().matrix();
    MatrixXd lam =
        c.sqrt_start * c.frame * e.asDiagonal() * c.frame.transpose() *
        c.sqrt_start;
    xi.precisions.push_back(0.5 * (lam + lam.transpose()));
  }
  return xi;
}

double ProductGeodesic::speed_budget() const {
  double s = 0.0;
  for (const auto &c : components)
    s += c.alpha * c.alpha + c.beta * c.beta;
  return s;
}

ProductGeodesic product_geodesic(const ModelPoint &start, const ModelPoint &end,
                                 double R) {
  if (start.K() != end.K() || start.P() != end.P())
    throw ConfigError("product_geodesic: endpoint shapes differ");
  if (!gmm::in_cutoff(start, R) || !gmm::in_cutoff(end, R))
    throw ConfigError("product_geodesic: endpoints must lie inside the cut-off");
  const int K = start.K();
  const int P = start.P();
  ProductGeodesic g;
  g.weights = start.weights;
  std::vector<double> t1(K), t2(K);
  for (int k = 0; k < K; ++k) {
    ProductGeodesic::Component c;
    c.mean_start = start.means[k];
    const VectorXd dm = end.means[k] - start.means[k];
    t1[k] = dm.norm();
    c.direction = t1[k] > 0.0 ? VectorXd(dm / t1[k]) : VectorXd::Zero(P);
    c.sqrt_start = spd_sqrt(start.precisions[k]);
    const MatrixXd is = spd_inv_sqrt(start.precisions[k]);
    const MatrixXd w = is * end.precisions[k] * is;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (w + w.transpose()));
    c.frame = es.eigenvectors();
    const VectorXd logs = es.eigenvalues().array().log().matrix();
    t2[k] = logs.norm();
    c.exponents = t2[k] > 0.0 ? VectorXd(logs / t2[k]) : VectorXd::Zero(P);
    g.components.push_back(std::move(c));
  }
  double tt = 0.0;
  for (int k = 0; k < K; ++k)
    tt += t1[k] * t1[k] + t2[k] * t2[k];
  g.length = std::sqrt(tt);
  for (int k = 0; k < K; ++k) {
    g.components[k].alpha = g.length > 0.0 ? t1[k] / g.length : 0.0;
    g.components[k].beta = g.length > 0.0 ? t2[k] / g.length : 0.0;
  }
  return g;
}

namespace {

VectorXd uniform_in_ball(Rng &rng, int dim, double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i)
    v[i] = gauss(rng);
  const double n = v.norm();
  if (n == 0.0)
    return VectorXd::Zero(dim);
  return v * (radius * std::pow(unif(rng), 1.0 / dim) / n);
}

MatrixXd haar_orthogonal(Rng &rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      a(i, j) = gauss(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0)
      q.col(j) *= -1.0;
  return q;
}

} // namespace

ModelPoint sample_in_ball(Rng &rng, const ModelPoint &center,
                          double mean_radius, double precision_radius) {
  ModelPoint xi;
  xi.weights = center.weights;
  const int P = center.P();
  for (int k = 0; k < center.K(); ++k) {
    xi.means.push_back(center.means[k] + uniform_in_ball(rng, P, mean_radius));
    const VectorXd s = uniform_in_ball(rng, P, precision_radius);
    const MatrixXd q = haar_orthogonal(rng, P);
    const MatrixXd c = spd_sqrt(center.precisions[k]);
    MatrixXd lam = c * q * s.array().exp().matrix().asDiagonal() *
                   q.transpose() * c;
    xi.precisions.push_back(0.5 * (lam + lam.transpose()));
  }
  return xi;
}

ProductGeodesic sample_product_geodesic(Rng &rng, const ModelPoint &center,
                                        double radius, double R) {
  // Rejection keeps both endpoints strictly inside the cut-off.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    ModelPoint a = sample_in_ball(rng, center, radius, radius);
    ModelPoint b = sample_in_ball(rng, center, radius, radius);
    if (gmm::in_cutoff(a, R) && gmm::in_cutoff(b, R))
      return product_geodesic(a, b, R);
  }
  throw NumericalError(
      "sample_product_geodesic: could not draw endpoints inside the cut-off");
}

ConvexityReport convexity_scan(const SheetStats &stats, const VectorXd &weights,
                               const PriorConfig &priors,
                               const ConvexityOptions &opts) {
  if (opts.steps < 64)
    throw ConfigError(fmt::format(
        "convexity_scan: steps must be >= 64 (got {})", opts.steps));
  if (opts.geodesics < 1)
    throw ConfigError("convexity_scan: geodesics must be >= 1");
  const int K = static_cast<int>(stats.size());
  const int P = static_cast<int>(stats.front().sum.size());
  ModelPoint center =
      opts.center.K() == 0 ? ModelPoint::centered(K, P) : opts.center;
  center.weights = weights;
  const double radius =
      opts.mode == EndpointMode::Cutoff ? priors.R : opts.local_radius;
  const ModelPoint ball_center =
      opts.mode == EndpointMode::Cutoff ? [&] {
        ModelPoint c = ModelPoint::centered(K, P);
        c.weights = weights;
        return c;
      }()
                                        : center;

  struct PerGeodesic {
    std::vector<ConvexitySample> samples;
    bool clipped = false;
  };
  std::vector<PerGeodesic> results(opts.geodesics);
  parallel_for(opts.geodesics, opts.threads, [&](int gid) {
    Rng rng = make_rng(opts.seed, "convexity", static_cast<std::uint64_t>(gid));
    const ProductGeodesic geo =
        sample_product_geodesic(rng, ball_center, radius, priors.R);
    PerGeodesic &out = results[gid];
    if (geo.length == 0.0)
      return;
    const double h = geo.length / opts.steps;
    std::vector<double> f(opts.steps + 1);
    for (int j = 0; j <= opts.steps; ++j)
      f[j] = gmm::energy(stats, geo.at(j * h), priors);
    for (int j = 1; j < opts.steps; ++j) {
      if (!std::isfinite(f[j - 1]) || !std::isfinite(f[j]) ||
          !std::isfinite(f[j + 1])) {
        out.clipped = true;
        continue;
      }
      out.samples.push_back(
          {gid, j * h, (f[j + 1] - 2.0 * f[j] + f[j - 1]) / (h * h)});
    }
  });

  ConvexityReport rep;
  double min_count = kInf;
  for (const auto &s : stats)
    min_count = std::min(min_count, s.count);
  rep.min_class_size = static_cast<int>(min_count);
  for (int gid = 0; gid < opts.geodesics; ++gid) {
    if (results[gid].clipped)
      rep.clipped.push_back(gid);
    for (const auto &s : results[gid].samples) {
      rep.samples.push_back(s);
      rep.min = std::min(rep.min, s.value);
    }
  }
  rep.C_hat = min_count > 0.0 ? rep.min / min_count : kInf;
  rep.pass = !rep.samples.empty() && rep.min > 0.0;
  return rep;
}

ConvexityReport convexity_scan(const Dataset &ds, const Assignment &z,
                               const PriorConfig &priors,
                               const ConvexityOptions &opts) {
  const SheetStats stats = gmm::class_stats(ds, z);
  VectorXd w(z.K());
  for (int k = 0; k < z.K(); ++k)
    w[k] = std::max(1.0, static_cast<double>(z.counts()[k])) ;
  w /= w.sum();
  return convexity_scan(stats, w, priors, opts);
}

void ConvexityReport::write_csv(const std::string &path) const {
  std::ofstream out(path);
  if (!out)
    throw ConfigError(fmt::format("cannot write {}", path));
  out << "geodesic_id,t,second_diff\n";
  for (const auto &s : samples)
    out << fmt::format("{},{:.17g},{:.17g}\n", s.geodesic, s.t, s.value);
}

void ConvexityReport::write_summary(const std::string &path) const {
  nlohmann::ordered_json j;
  j["min"] = min;
  j["C_hat"] = C_hat;
  j["pass"] = pass;
  j["min_class_size"] = min_class_size;
  j["samples"] = samples.size();
  j["clipped"] = clipped;
  std::ofstream out(path);
  if (!out)
    throw ConfigError(fmt::format("cannot write {}", path));
  out << j.dump(2) << "\n";
}

} // namespace mfgmm::spd
