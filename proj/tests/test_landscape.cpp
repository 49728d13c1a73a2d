#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfgmm/error.hpp"
#include "mfgmm/gmm_core.hpp"
#include "mfgmm/landscape.hpp"
#include "mfgmm/mean_field.hpp"
#include "test_util.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

using namespace mfgmm;
using landscape::MatrixXi;
using landscape::Weighting;

namespace {

TrueMixture line_truth(double sep, std::vector<int> sizes,
                       VectorXd precisions = VectorXd::Ones(2)) {
  TrueMixture t;
  const int K = static_cast<int>(sizes.size());
  const double n = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  t.weights.resize(K);
  for (int k = 0; k < K; ++k) {
    t.weights[k] = sizes[k] / n;
    t.means.push_back(VectorXd::Constant(1, sep * (k - 0.5 * (K - 1))));
    t.precisions.push_back(MatrixXd::Constant(1, 1, precisions[k]));
  }
  t.classSizes = std::move(sizes);
  return t;
}

MatrixXd random_markov(Rng &rng, int K) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MatrixXd A(K, K);
  for (int j = 0; j < K; ++j) {
    for (int k = 0; k < K; ++k)
      A(k, j) = u(rng);
    A.col(j) /= A.col(j).sum();
  }
  return A;
}

MatrixXi counts2(int a, int b, int c, int d) {
  MatrixXi m(2, 2);
  m << a, b, c, d;
  return m;
}

std::pair<double, double> mean_std(const std::vector<double> &v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return {m, std::sqrt(s / (v.size() - 1))};
}

// Point and confusion counts for the Monte-Carlo checks.
struct McSetup {
  Dataset ds;
  TrueMixture truth;
  MatrixXi ad;
  ModelPoint xi;
};

McSetup mc_setup(int N, std::uint64_t seed) {
  gmm::TruthSpec ts{VectorXd::Constant(2, 0.5),
                    {VectorXd::Constant(1, -1.5), VectorXd::Constant(1, 1.5)},
                    {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)}};
  auto [ds, tm] = gmm::generate_dataset(MixtureConfig{2, 1, N, 1.0, seed}, ts);
  ModelPoint xi{ts.weights, ts.means, ts.precisions};
  xi.means[0][0] = -1.0;
  xi.precisions[1](0, 0) = 1.3;
  xi.weights << 0.45, 0.55;
  const int a0 = static_cast<int>(std::lround(0.7 * tm.classSizes[0]));
  const int a1 = static_cast<int>(std::lround(0.2 * tm.classSizes[1]));
  return {ds, tm,
          counts2(a0, a1, tm.classSizes[0] - a0, tm.classSizes[1] - a1), xi};
}

} // namespace

TEST_CASE("confusion_of: examples and column sums") {
  CHECK(landscape::confusion_of({0, 0, 1, 1}, {0, 1, 0, 1}, 2) == counts2(1, 1, 1, 1));
  const std::vector<int> z{0, 2, 1, 1, 2, 0, 2};
  CHECK(landscape::confusion_of(z, z, 3) ==
        MatrixXi(Eigen::Vector3i(2, 2, 3).asDiagonal()));
  Rng rng = make_rng(1, "confusion");
  std::uniform_int_distribution<int> d(0, 2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> a(15), b(15);
    for (int n = 0; n < 15; ++n) {
      a[n] = d(rng);
      b[n] = d(rng);
    }
    const MatrixXi ad = landscape::confusion_of(a, b, 3);
    const auto cols = landscape::column_sums(ad);
    for (int k = 0; k < 3; ++k) {
      CHECK(cols[k] == std::count(b.begin(), b.end(), k));
      CHECK(ad.row(k).sum() == std::count(a.begin(), a.end(), k));
    }
  }
  CHECK_THROWS_AS((void)landscape::confusion_of({0, 1}, {0}, 2), ConfigError);
}

TEST_CASE("markov_of: columns sum to one, empty columns uniform") {
  MatrixXi ad(3, 3);
  ad << 1, 0, 0, 2, 0, 5, 4, 0, 2;
  const MatrixXd A = landscape::markov_of(ad);
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(A.col(j).sum() - 1.0) <= 1e-15);
  CHECK(A(1, 0) == doctest::Approx(2.0 / 7.0));
  CHECK(A(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_NOTHROW(landscape::check_markov(A));
  MatrixXd bad = A;
  bad(0, 0) += 0.1;
  CHECK_THROWS_AS(landscape::check_markov(bad), ConfigError);
}

TEST_CASE("counts: the balanced 4x4 example and diagonal cells") {
  const MatrixXi ad = counts2(2, 2, 2, 2);
  CHECK(landscape::exact_log_count(ad) == doctest::Approx(std::log(36.0)).epsilon(1e-13));
  CHECK(std::abs(landscape::stirling_log_count(ad) - std::log(36.0)) <= 0.25);
  CHECK(landscape::stirling_log_count(counts2(7, 0, 0, 9)) == 0.0);
  CHECK(landscape::exact_log_count(counts2(0, 5, 4, 0)) == 0.0);
  const double lambda = 2.5;
  CHECK(-lambda * landscape::psi(ad, lambda) ==
        doctest::Approx(landscape::stirling_log_count(ad)).epsilon(1e-14));
}

TEST_CASE("counts: Stirling error bounds against log-gamma") {
  for (int n : {100}) {
    for (const auto &c0 : landscape::compositions(n, 2)) {
      if (c0[0] == 0 || c0[1] == 0)
        continue;
      for (int a : {1, 13, 50, 99}) {
        const MatrixXi ad = counts2(c0[0], a, c0[1], n - a);
        const double err = std::abs(landscape::stirling_log_count(ad) -
                                    landscape::exact_log_count(ad));
        CHECK(err <= 2.0 * 2.0 * std::log(200.0));
        CHECK(err <= 2.0 * (1.0 + std::log(100.0)));
      }
    }
  }
}

TEST_CASE("counts: cells partition all K^N labelings") {
  for (const auto &sizes : std::vector<std::vector<int>>{{7, 9}, {3, 4, 5}}) {
    const int K = static_cast<int>(sizes.size());
    const int N = std::accumulate(sizes.begin(), sizes.end(), 0);
    double total = 0.0;
    for (const auto &ad : landscape::enumerate_lattice({sizes}))
      total += std::exp(landscape::exact_log_count(ad));
    CHECK(total == doctest::Approx(std::pow(K, N)).epsilon(1e-10));
  }
}

TEST_CASE("counts: exact count matches brute-force enumeration") {
  // truth: first 3 points in class 0, last 5 in class 1
  const std::vector<int> truth{0, 0, 0, 1, 1, 1, 1, 1};
  std::map<std::vector<int>, int> seen;
  for (int code = 0; code < 256; ++code) {
    std::vector<int> z(8);
    for (int n = 0; n < 8; ++n)
      z[n] = (code >> n) & 1;
    const MatrixXi ad = landscape::confusion_of(z, truth, 2);
    ++seen[{ad(0, 0), ad(0, 1), ad(1, 0), ad(1, 1)}];
  }
  for (const auto &[key, count] : seen) {
    const MatrixXi ad = counts2(key[0], key[1], key[2], key[3]);
    CHECK(std::exp(landscape::exact_log_count(ad)) == doctest::Approx(count));
  }
  CHECK(seen.size() == static_cast<std::size_t>(landscape::lattice_size({{3, 5}})));
}

TEST_CASE("phi_hat: affine in A") {
  Rng rng = make_rng(2, "affine");
  const TrueMixture t = line_truth(3.0, {40, 60}, (VectorXd(2) << 1.5, 0.7).finished());
  PriorConfig pr = PriorConfig::flat(2, 10.0);
  pr.a = 0.01;
  pr.sigma_k = VectorXd::Constant(2, 10.0);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd A = random_markov(rng, 2), B = random_markov(rng, 2);
    const ModelPoint xi = testing::random_point(rng, 2, 1);
    const double t0 = 0.3;
    for (auto w : {Weighting::AsPrinted, Weighting::ClassConditional}) {
      const double mix = landscape::phi_hat(t0 * A + (1 - t0) * B, xi, t, pr, 4.0, w);
      const double lin = t0 * landscape::phi_hat(A, xi, t, pr, 4.0, w) +
                         (1 - t0) * landscape::phi_hat(B, xi, t, pr, 4.0, w);
      CHECK(std::abs(mix - lin) <= 1e-10 * (1.0 + std::abs(lin)));
    }
  }
}

TEST_CASE("m_of: K=1 matches a direct 1-D minimization") {
  TrueMixture t = line_truth(0.0, {50}, VectorXd::Constant(1, 2.0));
  t.means[0][0] = 1.5;
  PriorConfig pr = PriorConfig::flat(1, 10.0);
  pr.a = 0.1;
  const double W = 50.0, S1 = W * 1.5, S2 = W * (0.5 + 1.5 * 1.5);
  // profile out Lambda = W / q(mu), then golden-section search over mu
  auto profile = [&](double mu) {
    const double q = S2 - 2.0 * mu * S1 + W * mu * mu;
    return 0.5 * W * std::log(q / W) + 0.5 * W + pr.a * mu * mu;
  };
  double lo = -5.0, hi = 5.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  while (hi - lo > 1e-12) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (profile(x1) < profile(x2))
      hi = x2;
    else
      lo = x1;
  }
  const double mu = 0.5 * (lo + hi);
  const double lam = W / (S2 - 2.0 * mu * S1 + W * mu * mu);
  for (auto solver : {landscape::Solver::ClosedForm, landscape::Solver::Newton}) {
    const auto r = landscape::m_of(MatrixXd::Ones(1, 1), t, pr, 1.0, solver);
    CHECK(r.m.means[0][0] == doctest::Approx(mu).epsilon(1e-6));
    CHECK(r.m.precisions[0](0, 0) == doctest::Approx(lam).epsilon(1e-6));
    CHECK(r.m.weights[0] == 1.0);
    CHECK(r.status == "ok");
    CHECK(r.value == doctest::Approx(landscape::phi_hat(MatrixXd::Ones(1, 1), r.m, t, pr, 1.0)));
  }
  CHECK(mu < 1.5); // shrunk toward 0 by the prior
}

TEST_CASE("m_of: identity A with negligible priors recovers the truth") {
  const TrueMixture t = line_truth(4.0, {30, 70}, (VectorXd(2) << 0.8, 2.0).finished());
  const PriorConfig pr = PriorConfig::flat(2, 10.0);
  for (auto solver : {landscape::Solver::ClosedForm, landscape::Solver::Newton}) {
    const auto r = landscape::m_of(MatrixXd::Identity(2, 2), t, pr, 1.0, solver,
                                   Weighting::ClassConditional);
    for (int k = 0; k < 2; ++k) {
      CHECK(r.m.means[k][0] == doctest::Approx(t.means[k][0]).epsilon(1e-7));
      CHECK(r.m.precisions[k](0, 0) ==
            doctest::Approx(t.precisions[k](0, 0)).epsilon(1e-6));
      CHECK(r.m.weights[k] == doctest::Approx(t.weights[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("m_of: P=2 Newton solves the stationary equations") {
  TrueMixture t;
  t.weights = VectorXd::Constant(2, 0.5);
  t.means = {(VectorXd(2) << -1.0, 0.5).finished(), (VectorXd(2) << 2.0, 0.0).finished()};
  MatrixXd L(2, 2);
  L << 1.5, 0.3, 0.3, 0.8;
  t.precisions = {L, MatrixXd::Identity(2, 2)};
  t.classSizes = {25, 35};
  const PriorConfig pr = PriorConfig::flat(2, 10.0);
  Rng rng = make_rng(4, "p2");
  const MatrixXd A = random_markov(rng, 2);
  const auto r = landscape::m_of(A, t, pr, 1.0);
  REQUIRE(r.status == "ok");
  // flat priors: each component is the weighted moment match of its stats
  const SheetStats st = landscape::population_stats(A, t);
  for (int k = 0; k < 2; ++k) {
    const VectorXd mu = st[k].sum / st[k].count;
    const MatrixXd cov = st[k].sum_sq / st[k].count - mu * mu.transpose();
    CHECK((r.m.means[k] - mu).norm() < 1e-6);
    CHECK((r.m.precisions[k] - cov.inverse()).norm() < 1e-5);
  }
}

TEST_CASE("Phi_hat is concave in A") {
  Rng rng = make_rng(5, "concave");
  const TrueMixture t = line_truth(3.0, {40, 60}, (VectorXd(2) << 1.5, 0.7).finished());
  PriorConfig pr = PriorConfig::flat(2, 10.0);
  pr.a = 0.01;
  pr.sigma_k = VectorXd::Constant(2, 10.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd A = random_markov(rng, 2), B = random_markov(rng, 2);
    const double s = u(rng);
    const double mid = landscape::m_of(s * A + (1 - s) * B, t, pr, 1.0).value;
    const double chord = s * landscape::m_of(A, t, pr, 1.0).value +
                         (1 - s) * landscape::m_of(B, t, pr, 1.0).value;
    CHECK(mid >= chord - 1e-8);
  }
}

TEST_CASE("phi_hat: Monte-Carlo mean over Z_Ad") {
  const McSetup s = mc_setup(300, 7);
  const double l0 = gmm::lambda0_for(300, 0.1);
  const PriorConfig pr = PriorConfig::flat(2, 3.0);
  const auto v = landscape::sample_phi(s.ds, s.truth.trueLabels, s.ad, s.xi, pr, l0, 200, 7);
  const auto [m, sd] = mean_std(v);
  const double tol = 3.0 * sd / std::sqrt(200.0);
  const MatrixXd A = landscape::markov_of(s.ad);

  SUBCASE("class-conditional weights on the empirical class moments") {
    const TrueMixture emp = landscape::empirical_truth(s.ds, s.truth);
    const double ph = landscape::phi_hat(A, s.xi, emp, pr, l0, Weighting::ClassConditional);
    CHECK(std::abs(m - ph) <= tol);
  }
  SUBCASE("printed weights undercount the data terms by the factor pitilde") {
    const double ph = landscape::phi_hat(A, s.xi, s.truth, pr, l0, Weighting::AsPrinted);
    CHECK(std::abs(m - ph) > 10.0 * tol);
  }
}

TEST_CASE("empirical_truth: exact conditional mean of the class statistics") {
  const McSetup s = mc_setup(10, 3);
  const TrueMixture emp = landscape::empirical_truth(s.ds, s.truth);
  MatrixXi ad = counts2(1, 1, 0, 0);
  ad(1, 0) = s.truth.classSizes[0] - 1;
  ad(1, 1) = s.truth.classSizes[1] - 1;
  const SheetStats pop =
      landscape::population_stats(landscape::markov_of(ad), emp, Weighting::ClassConditional);
  // average over every labeling in Z_Ad
  SheetStats acc{ClassStats::zero(1), ClassStats::zero(1)};
  int members = 0;
  for (int code = 0; code < 1 << 10; ++code) {
    std::vector<int> z(10);
    for (int n = 0; n < 10; ++n)
      z[n] = (code >> n) & 1;
    if (landscape::confusion_of(z, s.truth.trueLabels, 2) != ad)
      continue;
    ++members;
    const SheetStats st = gmm::class_stats(s.ds, Assignment(z, 2));
    for (int k = 0; k < 2; ++k)
      acc[k].add_scaled(st[k], 1.0);
  }
  REQUIRE(members == static_cast<int>(std::lround(std::exp(landscape::exact_log_count(ad)))));
  for (int k = 0; k < 2; ++k) {
    CHECK(pop[k].count == doctest::Approx(acc[k].count / members).epsilon(1e-12));
    CHECK(pop[k].sum[0] == doctest::Approx(acc[k].sum[0] / members).epsilon(1e-12));
    CHECK(pop[k].sum_sq(0, 0) == doctest::Approx(acc[k].sum_sq(0, 0) / members).epsilon(1e-12));
  }
}

TEST_CASE("sample std of Phi over Z_Ad shrinks like 1/sqrt(N)") {
  const PriorConfig pr = PriorConfig::flat(2, 3.0);
  double sd[2];
  for (int i = 0; i < 2; ++i) {
    const int N = i == 0 ? 300 : 1200;
    const McSetup s = mc_setup(N, 7);
    const auto v = landscape::sample_phi(s.ds, s.truth.trueLabels, s.ad, s.xi, pr,
                                         gmm::lambda0_for(N, 0.1), 200, 7);
    sd[i] = mean_std(v).second;
  }
  CHECK(sd[1] / sd[0] >= 0.3);
  CHECK(sd[1] / sd[0] <= 0.8);
}

TEST_CASE("sample_class: draws stay in Z_Ad") {
  const McSetup s = mc_setup(60, 2);
  Rng rng = make_rng(1, "draws");
  for (int i = 0; i < 10; ++i) {
    const auto z = landscape::sample_class(s.ad, s.truth.trueLabels, rng);
    CHECK(landscape::confusion_of(z, s.truth.trueLabels, 2) == s.ad);
  }
}

TEST_CASE("lattice: compositions, sizes and strides") {
  const auto c = landscape::compositions(3, 3);
  CHECK(c.size() == 10);
  CHECK(c.front() == std::vector<int>{0, 0, 3});
  CHECK(c.back() == std::vector<int>{3, 0, 0});
  CHECK(landscape::full_lattice_size({{20, 20}}) == 441.0);
  CHECK(landscape::full_lattice_size({{4, 5, 6}}) == 15.0 * 21.0 * 28.0);
  CHECK(landscape::lattice_size({{20, 20}, 5}) == 25.0);
  CHECK(landscape::enumerate_lattice({{20, 20}, 5}).size() == 25);
  for (const auto &ad : landscape::enumerate_lattice({{4, 5, 6}})) {
    const auto cols = landscape::column_sums(ad);
    CHECK(cols == std::vector<int>{4, 5, 6});
  }
}

TEST_CASE("lattice: over budget names the size and suggests a stride") {
  try {
    (void)landscape::enumerate_lattice({{200, 200, 200}, 1, 1000});
    FAIL("expected BudgetError");
  } catch (const BudgetError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("stride") != std::string::npos);
    const double cells = std::pow(20301.0, 3); // C(202, 2)^3
    CHECK(msg.find(fmt::format("{:.0f}", cells)) != std::string::npos);
  }
}

TEST_CASE("sweep: K=1 is a single cell") {
  const TrueMixture t = line_truth(0.0, {12}, VectorXd::Ones(1));
  const auto r = landscape::sweep({{12}}, t, PriorConfig::flat(1, 10.0), {});
  REQUIRE(r.records.size() == 1);
  CHECK(r.argmin().A(0, 0) == 1.0);
  CHECK(r.argmin().psi == 0.0);
  CHECK(std::isfinite(r.argmin().F));
}

TEST_CASE("sweep: overlapping components give a column-swap symmetric F") {
  const TrueMixture t = line_truth(0.0, {20, 20});
  const auto r = landscape::sweep({{20, 20}}, t, PriorConfig::flat(2, 10.0), {});
  std::map<std::vector<int>, double> F;
  for (const auto &rec : r.records)
    F[{rec.counts(0, 0), rec.counts(0, 1)}] = rec.F;
  for (const auto &[key, f] : F)
    CHECK(F.at({key[1], key[0]}) == doctest::Approx(f).epsilon(1e-9));
  const auto &best = r.argmin().counts;
  CHECK(F.at({best(0, 1), best(0, 0)}) == doctest::Approx(r.argmin().F).epsilon(1e-9));
}

TEST_CASE("sweep: argmin at a vertex for a well separated truth") {
  const PriorConfig pr = PriorConfig::flat(2, 10.0);
  const auto r = landscape::sweep({{20, 20}}, line_truth(8.0, {20, 20}), pr, {});
  const MatrixXi &a = r.argmin().counts;
  CHECK((a == counts2(20, 0, 0, 20) || a == counts2(0, 20, 20, 0)));

  // with the printed weights the energy gap of a mixed cell is halved and
  // a moderate separation loses to the entropy at beta = 1
  const auto mid = landscape::sweep({{20, 20}}, line_truth(5.0, {20, 20}), pr, {});
  CHECK(mid.argmin().counts == counts2(10, 10, 10, 10));
  landscape::SweepOptions cc;
  cc.weighting = Weighting::ClassConditional;
  const auto fixed = landscape::sweep({{20, 20}}, line_truth(5.0, {20, 20}), pr, cc);
  const MatrixXi &b = fixed.argmin().counts;
  CHECK((b == counts2(20, 0, 0, 20) || b == counts2(0, 20, 20, 0)));
}

TEST_CASE("sweep: thread count does not change the records") {
  const TrueMixture t = line_truth(3.0, {9, 7, 5}, VectorXd::Ones(3));
  landscape::SweepOptions o1, o4;
  o4.threads = 4;
  const PriorConfig pr = PriorConfig::flat(3, 10.0);
  const auto a = landscape::sweep({{9, 7, 5}}, t, pr, o1);
  const auto b = landscape::sweep({{9, 7, 5}}, t, pr, o4);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].counts == b.records[i].counts);
    CHECK(a.records[i].F == b.records[i].F);
  }
  CHECK(a.best == b.best);
  CHECK(a.log_z_sum == b.log_z_sum);
}

TEST_CASE("sweep: CSV rows and JSON summary") {
  const TrueMixture t = line_truth(4.0, {6, 6});
  const auto r = landscape::sweep({{6, 6}}, t, PriorConfig::flat(2, 10.0), {});
  const auto dir = std::filesystem::temp_directory_path() / "mfgmm_landscape_test";
  std::filesystem::create_directories(dir);
  r.write_csv((dir / "records.csv").string());
  r.write_summary((dir / "summary.json").string());
  std::ifstream in(dir / "records.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "alpha_11,alpha_12,alpha_21,alpha_22,phi_hat,psi,F,solver_status");
  int rows = 0;
  while (std::getline(in, line))
    ++rows;
  CHECK(rows == 49);
  std::ifstream js(dir / "summary.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j.at("cells").get<int>() == 49);
  CHECK(j.at("F_star").get<double>() == doctest::Approx(r.argmin().F));
  CHECK(j.contains("M_star"));
  CHECK(j.contains("A_star"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("concentration: K=1 argmax is the single sheet minimizer") {
  gmm::TruthSpec ts{VectorXd::Ones(1), {VectorXd::Constant(1, 0.5)}, {MatrixXd::Ones(1, 1)}};
  auto [ds, tm] = gmm::generate_dataset(MixtureConfig{1, 1, 8, 1.0, 3}, ts);
  landscape::ConcentrationOptions o;
  o.betas = {1.0};
  const auto rep = landscape::concentration_check(ds, tm, PriorConfig::flat(1, 10.0), o);
  REQUIRE(rep.rows.size() == 1);
  const double mean = ds.points.col(0).mean();
  const double var = (ds.points.col(0).array() - mean).square().mean();
  const ModelPoint &x = rep.rows[0].argmax;
  CHECK(x.means[0][0] == doctest::Approx(mean).epsilon(1e-6));
  CHECK(x.precisions[0](0, 0) == doctest::Approx(1.0 / var).epsilon(1e-5));
  CHECK(rep.rows[0].grad_norm <= rep.rows[0].grad_bound);
}

TEST_CASE("point_distance: zero under relabeling, positive otherwise") {
  Rng rng = make_rng(6, "dist");
  const ModelPoint a = testing::random_point(rng, 2, 2);
  ModelPoint b = a;
  std::swap(b.means[0], b.means[1]);
  std::swap(b.precisions[0], b.precisions[1]);
  std::swap(b.weights[0], b.weights[1]);
  CHECK(landscape::point_distance(a, b) < 1e-12);
  b.means[0][0] += 0.5;
  CHECK(landscape::point_distance(a, b) == doctest::Approx(0.5).epsilon(1e-9));
}
