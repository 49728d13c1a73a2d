#include "mfgmm/harness.hpp"

#include "mfgmm/error.hpp"
#include "mfgmm/p1_forms.hpp"
#include "mfgmm/parallel.hpp"
#include "mfgmm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace mfgmm::harness {

namespace {

// Reads one JSON object and remembers which keys were consumed, so that
// typos surface as "unknown field" instead of silently taking a default.
class Section {
public:
  Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(fmt::format("{}: expected an object", path_));
  }

  [[nodiscard]] bool has(const std::string &key) const { return j_.contains(key); }
  [[nodiscard]] std::string where(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json &at(const std::string &key) {
    if (!j_.contains(key))
      throw ConfigError(fmt::format("{}: missing required field", where(key)));
    seen_.insert(key);
    return j_.at(key);
  }

  void number(const std::string &key, double &out, bool required = false) {
    if (!required && !has(key))
      return;
    const json &v = at(key);
    if (!v.is_number())
      throw ConfigError(fmt::format("{}: expected a number", where(key)));
    out = v.get<double>();
  }

  template <typename Int>
  void integer(const std::string &key, Int &out, bool required = false) {
    if (!required && !has(key))
      return;
    const json &v = at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError(fmt::format("{}: expected an integer", where(key)));
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_integer() && v.get<long long>() < 0)
        throw ConfigError(fmt::format("{}: expected a nonnegative integer", where(key)));
    }
    out = v.get<Int>();
  }

  void string(const std::string &key, std::string &out, bool required = false) {
    if (!required && !has(key))
      return;
    const json &v = at(key);
    if (!v.is_string())
      throw ConfigError(fmt::format("{}: expected a string", where(key)));
    out = v.get<std::string>();
  }

  template <typename E>
  void choice(const std::string &key, E &out,
              const std::vector<std::pair<std::string, E>> &options) {
    if (!has(key))
      return;
    std::string s;
    string(key, s);
    std::string names;
    for (const auto &[name, value] : options) {
      if (name == s) {
        out = value;
        return;
      }
      names += (names.empty() ? "" : ", ") + name;
    }
    throw ConfigError(fmt::format("{}: '{}' is not one of {}", where(key), s, names));
  }

  void finish() const {
    for (const auto &[key, value] : j_.items())
      if (!seen_.count(key))
        throw ConfigError(fmt::format("{}: unknown field", where(key)));
  }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::vector<std::pair<std::string, mf::Backend>> kBackends{
    {"laplace", mf::Backend::Laplace}, {"quadrature", mf::Backend::Quadrature}};
const std::vector<std::pair<std::string, spd::EndpointMode>> kModes{
    {"cutoff", spd::EndpointMode::Cutoff}, {"local", spd::EndpointMode::Local}};
const std::vector<std::pair<std::string, landscape::Weighting>> kWeightings{
    {"as_printed", landscape::Weighting::AsPrinted},
    {"class_conditional", landscape::Weighting::ClassConditional}};
const std::vector<std::pair<std::string, landscape::Solver>> kSolvers{
    {"auto", landscape::Solver::Auto},
    {"newton", landscape::Solver::Newton},
    {"closed_form", landscape::Solver::ClosedForm}};

template <typename E>
std::string name_of(E v, const std::vector<std::pair<std::string, E>> &options) {
  for (const auto &[name, value] : options)
    if (value == v)
      return name;
  return "?";
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

TrueMixture truth_of(const gmm::TruthSpec &t) {
  TrueMixture tm;
  tm.weights = t.weights;
  tm.means = t.means;
  tm.precisions = t.precisions;
  return tm;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

bool is_number(const std::string &s) {
  if (s.empty())
    return false;
  char *end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
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

// Second difference of alpha(k,.) -> u log v - u log u along x, in long
// double with one Richardson step; near the kernel the form is small and a
// plain double difference loses most digits to cancellation.
double composed_fd(const MatrixXd &A, const TrueMixture &truth, int k,
                   double mu_k, const VectorXd &x) {
  const p1::Coefficients c = p1::coefficients(A, truth, 1.0, k, mu_k);
  auto g = [&](long double t) {
    long double u = 0.0L, v = 0.0L;
    for (int j = 0; j < x.size(); ++j) {
      const long double a = static_cast<long double>(A(k, j)) + t * x[j];
      u += c.r[j] * a;
      v += static_cast<long double>(c.c_kk[j]) * c.r[j] * a;
    }
    return u * std::log(v) - u * std::log(u);
  };
  auto d2 = [&](long double h) { return (g(h) - 2.0L * g(0.0L) + g(-h)) / (h * h); };
  const long double h = 1e-3L;
  return static_cast<double>((4.0L * d2(h / 2) - d2(h)) / 3.0L);
}

// ------------------------------------------------------------------ stages

struct Context {
  const ExperimentConfig &cfg;
  std::string dir;
  int threads;
  Dataset ds;
  TrueMixture tm;
  bool generated = false;

  [[nodiscard]] std::string path(const std::string &name) const {
    return (fs::path(dir) / name).string();
  }
  void ensure_data() {
    if (generated)
      return;
    std::tie(ds, tm) = gmm::generate_dataset(cfg.mixture, cfg.truth);
    generated = true;
  }
  [[nodiscard]] landscape::SweepOptions sweep_options() const {
    landscape::SweepOptions so;
    so.beta = cfg.mixture.beta;
    so.lambda0 = cfg.landscape.lambda0.value_or(cfg.lambda0());
    so.solver = cfg.landscape.solver;
    so.weighting = cfg.landscape.weighting;
    so.threads = threads;
    return so;
  }
  [[nodiscard]] landscape::LatticeSpec lattice() const {
    return {tm.classSizes, cfg.landscape.stride, cfg.landscape.budget};
  }
};

StageRecord stage_generate(Context &cx) {
  cx.ensure_data();
  io::write_dataset_csv(cx.path("data.csv"), cx.ds);
  io::write_json(cx.path("truth.json"), io::to_json(cx.tm));
  json s;
  s["N"] = cx.ds.N();
  s["K"] = cx.tm.K();
  s["P"] = cx.ds.P();
  s["class_sizes"] = cx.tm.classSizes;
  s["lambda0"] = cx.cfg.lambda0();
  io::write_json(cx.path("generate.json"), s);
  return {"generate", "PASS", 0.0, {"data.csv", "truth.json", "generate.json"}};
}

StageRecord stage_convexity(Context &cx) {
  cx.ensure_data();
  const ExperimentConfig &cfg = cx.cfg;
  spd::ConvexityOptions o;
  o.geodesics = cfg.convexity.geodesics;
  o.steps = cfg.convexity.steps;
  o.seed = derive_seed(cfg.mixture.seed, "convexity");
  o.mode = cfg.convexity.mode;
  o.local_radius = cfg.convexity.local_radius;
  o.center = ModelPoint{cfg.truth.weights, cfg.truth.means, cfg.truth.precisions};
  o.threads = cx.threads;
  const auto r = spd::convexity_scan(cx.ds, Assignment(cx.tm.trueLabels, cx.tm.K()),
                                     cfg.priors, o);
  r.write_csv(cx.path("convexity.csv"));
  r.write_summary(cx.path("convexity.json"));
  return {"convexity", r.pass ? "PASS" : "FAIL", 0.0, {"convexity.csv", "convexity.json"}};
}

StageRecord stage_cavi(Context &cx) {
  cx.ensure_data();
  const ExperimentConfig &cfg = cx.cfg;
  mf::CaviOptions o;
  o.beta = cfg.mixture.beta;
  o.max_iter = cfg.cavi.max_iter;
  o.tol = cfg.cavi.tol;
  o.backend = cfg.cavi.backend;
  o.gh_nodes = cfg.cavi.gh_nodes;
  o.init_kappa = cfg.cavi.init_kappa;
  o.seed = derive_seed(cfg.mixture.seed, "cavi");
  o.threads = cx.threads;
  o.budget = cfg.cavi.exact_z_budget;
  const mf::Cavi cv(cx.ds, cfg.mixture.K, cfg.priors, cfg.lambda0(), o);
  const mf::CaviState s = cv.run();
  json j = cavi_state_json(cv, s);
  const double scale = cv.mean_sheet_gradient_norm(s.m);
  const double bound = cfg.tolerances.critical_point * scale + cfg.tolerances.critical_floor;
  j["critical_point"] = {{"residual", s.residual},
                         {"mean_sheet_gradient_norm", scale},
                         {"bound", bound}};
  io::write_json(cx.path("cavi_state.json"), j);
  std::ofstream out(cx.path("cavi_trace.csv"));
  out << "iteration,dv,dm,residual,kl\n";
  for (const auto &t : s.trace)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", t.iteration, t.dv, t.dm,
                       t.residual, t.kl);
  const bool ok = s.converged && s.residual <= bound;
  return {"cavi", ok ? "PASS" : "FAIL", 0.0, {"cavi_state.json", "cavi_trace.csv"}};
}

StageRecord stage_landscape(Context &cx) {
  cx.ensure_data();
  const auto sw = landscape::sweep(cx.lattice(), cx.tm, cx.cfg.priors, cx.sweep_options());
  sw.write_csv(cx.path("landscape.csv"));
  sw.write_summary(cx.path("landscape_summary.json"));
  const bool failed = std::any_of(sw.records.begin(), sw.records.end(),
                                  [](const auto &r) { return r.status == "failed"; });
  const bool ok = !failed && std::isfinite(sw.argmin().F);
  return {"landscape", ok ? "PASS" : "FAIL", 0.0,
          {"landscape.csv", "landscape_summary.json"}};
}

StageRecord stage_p1(Context &cx) {
  const ExperimentConfig &cfg = cx.cfg;
  if (cfg.mixture.P != 1)
    return {"p1-check", "skipped (needs P = 1)", 0.0, {}};
  cx.ensure_data();
  const int K = cfg.mixture.K;
  const double lambda0 = cx.sweep_options().lambda0;
  TrueMixture truth = cx.tm;
  Rng rng = make_rng(cfg.mixture.seed, "p1-check");

  json samples = json::array();
  double max_delta = 0.0, max_value = 0.0;
  for (int i = 0; i < cfg.p1.random_A; ++i) {
    const MatrixXd A = random_markov(rng, K);
    json r = p1_report(A, truth, cfg.priors, lambda0, cfg.landscape.weighting);
    max_delta = std::max(max_delta, r["cross_validation"]["max_param_delta"].get<double>());
    max_value = std::max(max_value, r["cross_validation"]["value_rel_delta"].get<double>());
    samples.push_back(std::move(r));
  }

  // the Hessian form on random (A, x) pairs
  std::normal_distribution<double> g(0.0, 1.0);
  double max_fd = 0.0, max_form = -kInf;
  for (int i = 0; i < cfg.p1.hessian_directions; ++i) {
    const MatrixXd A = random_markov(rng, K);
    VectorXd x(K);
    for (int j = 0; j < K; ++j)
      x[j] = g(rng);
    const int k = i % K;
    const double mu = truth.means[k][0] + g(rng);
    const double form = p1::hessian_row(A, truth, k, mu, x);
    const double fd = composed_fd(A, truth, k, mu, x);
    const double err = std::abs(form) > 1e-10 ? std::abs(fd - form) / std::abs(form)
                                              : std::abs(fd - form);
    max_fd = std::max(max_fd, err);
    max_form = std::max(max_form, form);
  }

  p1::RecoveryTolerance tol{cfg.tolerances.recovery_cells, cfg.tolerances.recovery_mean,
                            cfg.tolerances.recovery_precision_rel};
  const auto v = p1::vertex_recovery_check(truth, cfg.priors, cx.lattice(),
                                           cx.sweep_options(), tol);
  json vj;
  vj["verdict"] = p1::to_string(v.verdict);
  vj["detail"] = v.detail;
  vj["vertex_distance"] = v.vertex_distance;
  vj["near_vertex"] = v.near_vertex;
  vj["recovered"] = v.recovered;
  vj["max_mean_error"] = v.max_mean_error;
  vj["max_precision_rel_error"] = v.max_precision_rel_error;
  vj["counts_star"] = io::matrix_json(v.counts.cast<double>());
  vj["A_star"] = io::matrix_json(v.A_star);
  vj["M_star"] = io::to_json(v.m_star);

  json j;
  j["weighting"] = name_of(cfg.landscape.weighting, kWeightings);
  j["cross_validation"] = {{"count", cfg.p1.random_A},
                          {"max_param_delta", max_delta},
                          {"max_value_rel_delta", max_value},
                          {"tolerance", cfg.tolerances.closed_form}};
  j["hessian"] = {{"count", cfg.p1.hessian_directions},
                  {"max_rel_fd_error", max_fd},
                  {"max_form", finite_or_null(max_form)},
                  {"tolerance", cfg.tolerances.hessian_fd}};
  j["vertex"] = vj;
  j["samples"] = samples;
  io::write_json(cx.path("p1_check.json"), j);

  const bool ok = max_delta <= cfg.tolerances.closed_form &&
                  max_fd <= cfg.tolerances.hessian_fd && max_form <= 0.0 &&
                  v.verdict != p1::Verdict::Fail;
  return {"p1-check", ok ? "PASS" : "FAIL", 0.0, {"p1_check.json"}};
}

StageRecord stage_concentration(Context &cx) {
  cx.ensure_data();
  const ExperimentConfig &cfg = cx.cfg;
  landscape::ConcentrationOptions o;
  o.betas = cfg.concentration.betas;
  o.grid = cfg.concentration.grid;
  o.mean_halfwidth = cfg.concentration.mean_halfwidth;
  o.log_precision_halfwidth = cfg.concentration.log_precision_halfwidth;
  o.eta_halfwidth = cfg.concentration.eta_halfwidth;
  o.grid_budget = cfg.concentration.grid_budget;
  o.lambda0 = cfg.lambda0();
  o.weighting = cfg.landscape.weighting;
  o.threads = cx.threads;
  o.seed = derive_seed(cfg.mixture.seed, "concentration");
  const auto rep = landscape::concentration_check(cx.ds, cx.tm, cfg.priors, o);
  json rows = json::array();
  bool grad_ok = true;
  for (const auto &r : rep.rows) {
    json j;
    j["beta"] = r.beta;
    j["grid_argmax"] = io::to_json(r.grid_argmax);
    j["argmax"] = io::to_json(r.argmax);
    j["log_z"] = r.log_z;
    j["grad_norm"] = r.grad_norm;
    j["grad_bound"] = r.grad_bound;
    j["A_star"] = io::matrix_json(r.A_star);
    j["M_star"] = io::to_json(r.m_star);
    j["grid_distance"] = r.grid_distance;
    j["distance"] = r.distance;
    j["cavi_distance"] = r.cavi_distance;
    j["cavi_grad_rank"] = r.cavi_grad_rank;
    rows.push_back(j);
    grad_ok = grad_ok && r.grad_norm <= r.grad_bound;
  }
  json j;
  j["weighting"] = name_of(cfg.landscape.weighting, kWeightings);
  j["rows"] = rows;
  j["distance_nonincreasing"] = rep.distance_nonincreasing;
  j["grid_gradient_within_bound"] = grad_ok;
  io::write_json(cx.path("concentration.json"), j);
  const bool ok = rep.distance_nonincreasing && grad_ok;
  return {"concentration", ok ? "PASS" : "FAIL", 0.0, {"concentration.json"}};
}

} // namespace

// ------------------------------------------------------------------ config

void ExperimentConfig::validate() const {
  if (std::find(scenarios().begin(), scenarios().end(), scenario) == scenarios().end())
    throw ConfigError(fmt::format("scenario: unknown scenario '{}'", scenario));
  mixture.validate();
  TrueMixture tm = truth_of(truth);
  tm.validate();
  if (tm.K() != mixture.K || tm.P() != mixture.P)
    throw ConfigError(fmt::format("truth: has K={}, P={} but mixture has K={}, P={}",
                                  tm.K(), tm.P(), mixture.K, mixture.P));
  priors.validate(mixture.K);
  if (!(l0 > 0.0) || l0 > 1.0)
    throw ConfigError(fmt::format("l0: must lie in (0, 1] (got {})", l0));
  if (cavi.max_iter < 1 || !(cavi.tol > 0.0) || cavi.gh_nodes < 1)
    throw ConfigError("cavi: max_iter, tol and gh_nodes must be positive");
  if (convexity.geodesics < 1 || convexity.steps < 64 || !(convexity.local_radius > 0.0))
    throw ConfigError("convexity: geodesics >= 1, steps >= 64, local_radius > 0");
  if (landscape.stride < 1)
    throw ConfigError("landscape.stride: must be >= 1");
  if (landscape.lambda0 && !(*landscape.lambda0 > 0.0))
    throw ConfigError("landscape.lambda0: must be > 0");
  if (landscape.solver == landscape::Solver::ClosedForm && mixture.P != 1)
    throw ConfigError("landscape.solver: closed_form needs P = 1");
  if (p1.random_A < 0 || p1.hessian_directions < 0)
    throw ConfigError("p1: counts must be >= 0");
  if (concentration.betas.empty() || concentration.grid < 2)
    throw ConfigError("concentration: needs at least one beta and grid >= 2");
  for (double b : concentration.betas)
    if (!(b > 0.0))
      throw ConfigError("concentration.betas: every beta must be > 0");
}

ExperimentConfig config_from_json(const json &j) {
  ExperimentConfig c;
  Section root(j, "");
  root.string("scenario", c.scenario, true);

  Section mix(root.at("mixture"), "mixture");
  mix.integer("K", c.mixture.K, true);
  mix.integer("P", c.mixture.P, true);
  mix.integer("N", c.mixture.N, true);
  mix.number("beta", c.mixture.beta);
  mix.integer("seed", c.mixture.seed);
  mix.finish();

  const TrueMixture tm = io::truth_from_json(root.at("truth"));
  c.truth = {tm.weights, tm.means, tm.precisions};
  c.priors = io::priors_from_json(root.at("priors"), c.mixture.K);
  root.number("l0", c.l0);

  if (root.has("cavi")) {
    Section s(root.at("cavi"), "cavi");
    s.choice("backend", c.cavi.backend, kBackends);
    s.number("tol", c.cavi.tol);
    s.integer("max_iter", c.cavi.max_iter);
    s.integer("gh_nodes", c.cavi.gh_nodes);
    s.number("init_kappa", c.cavi.init_kappa);
    s.integer("exact_z_budget", c.cavi.exact_z_budget);
    s.finish();
  }
  if (root.has("convexity")) {
    Section s(root.at("convexity"), "convexity");
    s.integer("geodesics", c.convexity.geodesics);
    s.integer("steps", c.convexity.steps);
    s.choice("mode", c.convexity.mode, kModes);
    s.number("local_radius", c.convexity.local_radius);
    s.finish();
  }
  if (root.has("landscape")) {
    Section s(root.at("landscape"), "landscape");
    s.integer("stride", c.landscape.stride);
    s.integer("budget", c.landscape.budget);
    s.choice("weighting", c.landscape.weighting, kWeightings);
    s.choice("solver", c.landscape.solver, kSolvers);
    if (s.has("lambda0") && !s.at("lambda0").is_null()) {
      double l = 0.0;
      s.number("lambda0", l);
      c.landscape.lambda0 = l;
    }
    s.finish();
  }
  if (root.has("p1")) {
    Section s(root.at("p1"), "p1");
    s.integer("random_A", c.p1.random_A);
    s.integer("hessian_directions", c.p1.hessian_directions);
    s.finish();
  }
  if (root.has("concentration")) {
    Section s(root.at("concentration"), "concentration");
    if (s.has("betas"))
      c.concentration.betas.clear();
    if (s.has("betas")) {
      const VectorXd b = io::vector_from_json(s.at("betas"), "concentration.betas");
      c.concentration.betas.assign(b.data(), b.data() + b.size());
    }
    s.integer("grid", c.concentration.grid);
    s.number("mean_halfwidth", c.concentration.mean_halfwidth);
    s.number("log_precision_halfwidth", c.concentration.log_precision_halfwidth);
    s.number("eta_halfwidth", c.concentration.eta_halfwidth);
    s.integer("grid_budget", c.concentration.grid_budget);
    s.finish();
  }
  if (root.has("tolerances")) {
    Section s(root.at("tolerances"), "tolerances");
    s.number("critical_point", c.tolerances.critical_point);
    s.number("critical_floor", c.tolerances.critical_floor);
    s.number("closed_form", c.tolerances.closed_form);
    s.number("hessian_fd", c.tolerances.hessian_fd);
    s.integer("recovery_cells", c.tolerances.recovery_cells);
    s.number("recovery_mean", c.tolerances.recovery_mean);
    s.number("recovery_precision_rel", c.tolerances.recovery_precision_rel);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig &c) {
  json j;
  j["scenario"] = c.scenario;
  j["mixture"] = {{"K", c.mixture.K},
                  {"P", c.mixture.P},
                  {"N", c.mixture.N},
                  {"beta", c.mixture.beta},
                  {"seed", c.mixture.seed}};
  j["truth"] = io::to_json(ModelPoint{c.truth.weights, c.truth.means, c.truth.precisions});
  j["priors"] = io::to_json(c.priors);
  j["l0"] = c.l0;
  j["lambda0"] = c.lambda0();
  j["cavi"] = {{"backend", name_of(c.cavi.backend, kBackends)},
               {"tol", c.cavi.tol},
               {"max_iter", c.cavi.max_iter},
               {"gh_nodes", c.cavi.gh_nodes},
               {"init_kappa", c.cavi.init_kappa},
               {"exact_z_budget", c.cavi.exact_z_budget}};
  j["convexity"] = {{"geodesics", c.convexity.geodesics},
                    {"steps", c.convexity.steps},
                    {"mode", name_of(c.convexity.mode, kModes)},
                    {"local_radius", c.convexity.local_radius}};
  j["landscape"] = {{"stride", c.landscape.stride},
                    {"budget", c.landscape.budget},
                    {"weighting", name_of(c.landscape.weighting, kWeightings)},
                    {"solver", name_of(c.landscape.solver, kSolvers)},
                    {"lambda0", c.landscape.lambda0 ? json(*c.landscape.lambda0)
                                                    : json(nullptr)}};
  j["p1"] = {{"random_A", c.p1.random_A}, {"hessian_directions", c.p1.hessian_directions}};
  j["concentration"] = {{"betas", c.concentration.betas},
                        {"grid", c.concentration.grid},
                        {"mean_halfwidth", c.concentration.mean_halfwidth},
                        {"log_precision_halfwidth", c.concentration.log_precision_halfwidth},
                        {"eta_halfwidth", c.concentration.eta_halfwidth},
                        {"grid_budget", c.concentration.grid_budget}};
  j["tolerances"] = {{"critical_point", c.tolerances.critical_point},
                     {"critical_floor", c.tolerances.critical_floor},
                     {"closed_form", c.tolerances.closed_form},
                     {"hessian_fd", c.tolerances.hessian_fd},
                     {"recovery_cells", c.tolerances.recovery_cells},
                     {"recovery_mean", c.tolerances.recovery_mean},
                     {"recovery_precision_rel", c.tolerances.recovery_precision_rel}};
  return j;
}

ExperimentConfig load_config(const std::string &path) {
  try {
    return config_from_json(io::read_json(path));
  } catch (const ConfigError &e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

// ------------------------------------------------------------------ hashing

std::string fnv1a_hex(const std::string &bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string file_hash(const std::string &path) { return fnv1a_hex(read_file(path)); }

// ------------------------------------------------------------------ run

bool RunManifest::all_pass() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageRecord &s) {
    return s.status == "PASS" || s.status.rfind("skipped", 0) == 0;
  });
}

json RunManifest::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["version"] = version;
  json st = json::array();
  for (const auto &s : stages)
    st.push_back({{"name", s.name},
                  {"status", s.status},
                  {"seconds", s.seconds},
                  {"outputs", s.outputs}});
  j["stages"] = st;
  json out = json::array();
  for (const auto &o : outputs)
    out.push_back({{"name", o.name}, {"fnv1a", o.hash}, {"bytes", o.bytes}});
  j["outputs"] = out;
  j["config"] = config;
  return j;
}

RunManifest run(const ExperimentConfig &cfg, const RunOptions &opts) {
  cfg.validate();
  fs::create_directories(opts.out_dir);
  Context cx{cfg, opts.out_dir, resolve_threads(opts.threads), {}, {}, false};

  RunManifest m;
  m.scenario = cfg.scenario;
  m.config = to_json(cfg);
  m.config_hash = fnv1a_hex(m.config.dump());
  m.seed = cfg.mixture.seed;

  using StageFn = StageRecord (*)(Context &);
  const std::map<std::string, StageFn> table{
      {"generate", stage_generate},   {"convexity", stage_convexity},
      {"cavi", stage_cavi},           {"landscape", stage_landscape},
      {"p1-check", stage_p1},         {"concentration", stage_concentration}};
  std::vector<std::string> todo;
  if (cfg.scenario == "full-pipeline")
    todo = stages();
  else
    todo = {cfg.scenario};

  std::exception_ptr failure;
  for (const auto &name : todo) {
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord rec;
    try {
      rec = table.at(name)(cx);
    } catch (const std::exception &e) {
      rec = {name, fmt::format("error ({})", e.what()), 0.0, {}};
      failure = std::current_exception();
    }
    rec.seconds = seconds_since(t0);
    for (const auto &f : rec.outputs) {
      const std::string p = cx.path(f);
      m.outputs.push_back({f, file_hash(p), fs::file_size(p)});
    }
    m.stages.push_back(rec);
    if (failure)
      break;
  }
  io::write_json(cx.path("manifest.json"), m.to_json());
  if (failure)
    std::rethrow_exception(failure);
  return m;
}

// ------------------------------------------------------------------ files

CsvTable read_csv(const std::string &path, const std::vector<std::string> &text_columns) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(fmt::format("cannot open {}", path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ConfigError(fmt::format("{}, row 1: missing header", path));
  t.header = split(line);
  std::vector<bool> text(t.header.size(), false);
  for (std::size_t c = 0; c < t.header.size(); ++c)
    text[c] = std::find(text_columns.begin(), text_columns.end(), t.header[c]) !=
              text_columns.end();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw ConfigError(fmt::format("{}, row {}: expected {} fields, got {}", path, lineno,
                                    t.header.size(), cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!text[c] && !is_number(cells[c]))
        throw ConfigError(fmt::format("{}, row {}: column '{}' has non-numeric value '{}'",
                                      path, lineno, t.header[c], cells[c]));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

landscape::LatticeSpec parse_lattice(const std::string &arg, int K, std::uint64_t budget) {
  std::vector<int> v;
  for (const auto &cell : split(arg)) {
    int x = 0;
    std::size_t used = 0;
    try {
      x = std::stoi(cell, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != cell.size() || cell.empty() || x < 0)
      throw ConfigError(fmt::format("--lattice: '{}' is not a nonnegative integer", cell));
    v.push_back(x);
  }
  landscape::LatticeSpec spec;
  spec.budget = budget;
  if (static_cast<int>(v.size()) == K + 1) {
    spec.stride = v.back();
    v.pop_back();
    if (spec.stride < 1)
      throw ConfigError("--lattice: stride must be >= 1");
  }
  if (static_cast<int>(v.size()) != K)
    throw ConfigError(fmt::format("--lattice: expected {} class sizes and an optional "
                                  "stride, got '{}'", K, arg));
  spec.class_sizes = v;
  return spec;
}

json p1_report(const MatrixXd &A, const TrueMixture &truth, const PriorConfig &priors,
               double lambda0, landscape::Weighting weighting) {
  const int K = truth.K();
  landscape::check_markov(A);
  const auto sol = p1::solve(A, truth, priors, lambda0, weighting);
  const auto newton =
      landscape::m_of(A, truth, priors, lambda0, landscape::Solver::Newton, weighting);
  json rows = json::array();
  for (int k = 0; k < K; ++k) {
    json r;
    r["k"] = k + 1;
    if (sol.degenerate[k]) {
      r["degenerate"] = true;
      rows.push_back(r);
      continue;
    }
    const auto &mh = sol.mu[k];
    const double mu = sol.m.means[k][0];
    const auto c = p1::coefficients(A, truth, 1.0, k, mu, weighting);
    r["degenerate"] = false;
    r["a"] = c.a;
    r["b"] = c.b;
    r["c"] = c.c;
    r["tau"] = io::vector_json(c.tau);
    r["theta"] = io::vector_json(c.theta);
    r["r"] = io::vector_json(c.r);
    r["c_kk"] = io::vector_json(c.c_kk);
    r["lambda_hat"] = sol.m.precisions[k](0, 0);
    r["lambda_asymptotic"] = sol.lambda_asymptotic[k];
    r["mu_leading"] = mh.leading;
    r["mu_fixed_point"] = mh.fixed_point;
    r["mu_bisection"] = mh.bisection;
    r["mu_iterations"] = mh.iterations;
    r["mu_converged"] = mh.converged;
    r["per_class_value"] = p1::per_class_value(A, truth, k, mu, weighting);
    rows.push_back(r);
  }
  double delta = 0.0;
  for (int k = 0; k < K; ++k) {
    delta = std::max(delta, (sol.m.means[k] - newton.m.means[k]).cwiseAbs().maxCoeff());
    delta = std::max(delta,
                     (sol.m.precisions[k] - newton.m.precisions[k]).cwiseAbs().maxCoeff());
    delta = std::max(delta, std::abs(sol.m.weights[k] - newton.m.weights[k]));
  }
  json j;
  j["A"] = io::matrix_json(A);
  j["rows"] = rows;
  j["closed_form"] = io::to_json(sol.m);
  j["newton"] = io::to_json(newton.m);
  j["newton_status"] = newton.status;
  j["phi_hat_closed_form"] = finite_or_null(sol.value);
  j["phi_hat_newton"] = finite_or_null(newton.value);
  j["cross_validation"] = {
      {"max_param_delta", delta},
      {"value_rel_delta", std::abs(sol.value - newton.value) /
                              std::max(1.0, std::abs(newton.value))}};
  return j;
}

json cavi_state_json(const mf::Cavi &cavi, const mf::CaviState &s) {
  const auto &table = cavi.sheets();
  json j;
  j["iterations"] = s.iteration;
  j["converged"] = s.converged;
  j["lambda"] = cavi.lambda();
  j["lambda0"] = table.lambda0();
  j["backend"] = name_of(cavi.options().backend, kBackends);
  j["sheets"] = table.size();
  j["m"] = io::to_json(s.m);
  j["residual"] = s.residual;
  j["kl"] = s.kl;
  if (table.size() <= 4096) {
    j["v"] = io::vector_json(s.v);
    j["R"] = io::vector_json(s.R);
  }
  // u summed over labelings with the same class counts
  std::map<std::vector<int>, double> agg;
  for (int i = 0; i < table.size(); ++i)
    agg[table.assignment(i).counts()] += s.u[i];
  json a = json::array();
  for (const auto &[counts, mass] : agg)
    a.push_back({{"counts", counts}, {"u", mass}});
  j["u_by_counts"] = a;
  json tr = json::array();
  for (const auto &t : s.trace)
    tr.push_back({{"iteration", t.iteration},
                  {"dv", finite_or_null(t.dv)},
                  {"dm", finite_or_null(t.dm)},
                  {"residual", t.residual},
                  {"kl", t.kl}});
  j["trace"] = tr;
  return j;
}

// ------------------------------------------------------------------ report

namespace {

const std::map<std::string, std::vector<std::string>> kTextColumns{
    {"landscape.csv", {"solver_status"}}};

std::string md_value(const json &v) {
  if (v.is_string())
    return v.get<std::string>();
  if (v.is_number_float())
    return fmt::format("{:.6g}", v.get<double>());
  return v.dump();
}

} // namespace

Report report(const std::string &out_dir) {
  const std::string mpath = (fs::path(out_dir) / "manifest.json").string();
  const json manifest = io::read_json(mpath);
  Report rep;
  std::map<std::string, json> stage_of;
  for (const auto &s : io::field(manifest, "stages", mpath))
    stage_of[s.at("name").get<std::string>()] = s;
  std::map<std::string, std::string> hash_of;
  for (const auto &o : io::field(manifest, "outputs", mpath))
    hash_of[o.at("name").get<std::string>()] = o.at("fnv1a").get<std::string>();

  // verify every listed output; a file that fails is dropped from the summary
  std::set<std::string> bad;
  for (const auto &[name, hash] : hash_of) {
    const std::string p = (fs::path(out_dir) / name).string();
    if (!fs::exists(p)) {
      rep.errors.push_back(fmt::format("{}: missing", p));
      bad.insert(name);
      continue;
    }
    if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
      try {
        const auto it = kTextColumns.find(name);
        (void)read_csv(p, it == kTextColumns.end() ? std::vector<std::string>{} : it->second);
      } catch (const ConfigError &e) {
        rep.errors.push_back(e.what());
        bad.insert(name);
        continue;
      }
    }
    if (file_hash(p) != hash)
      rep.errors.push_back(fmt::format("{}: content differs from the manifest hash", p));
  }
  auto load = [&](const std::string &name) -> std::optional<json> {
    if (bad.count(name) || !hash_of.count(name))
      return std::nullopt;
    try {
      return io::read_json((fs::path(out_dir) / name).string());
    } catch (const ConfigError &e) {
      rep.errors.push_back(e.what());
      bad.insert(name);
      return std::nullopt;
    }
  };

  json summary;
  summary["scenario"] = manifest.value("scenario", "");
  summary["config_hash"] = manifest.value("config_hash", "");
  summary["version"] = manifest.value("version", "");
  for (const auto &name : stages()) {
    json sec;
    if (!stage_of.count(name)) {
      sec["status"] = "not run";
      summary[name] = sec;
      continue;
    }
    sec["status"] = stage_of[name].at("status");
    sec["seconds"] = stage_of[name].at("seconds");
    if (name == "generate") {
      if (auto g = load("generate.json"))
        sec.update(*g);
    } else if (name == "convexity") {
      if (auto c = load("convexity.json")) {
        sec["min_second_difference"] = (*c)["min"];
        sec["C_hat"] = (*c)["C_hat"];
        sec["pass"] = (*c)["pass"];
      }
    } else if (name == "cavi") {
      if (auto c = load("cavi_state.json")) {
        sec["iterations"] = (*c)["iterations"];
        sec["converged"] = (*c)["converged"];
        sec["critical_point"] = (*c)["critical_point"];
        json trace = json::array();
        for (const auto &t : (*c)["trace"])
          trace.push_back(t["residual"]);
        sec["residual_trace"] = trace;
      }
    } else if (name == "landscape") {
      if (auto l = load("landscape_summary.json")) {
        sec["cells"] = (*l)["cells"];
        sec["A_star"] = (*l)["A_star"];
        sec["M_star"] = (*l)["M_star"];
        sec["F_star"] = (*l)["F_star"];
        sec["solver_status_star"] = (*l)["solver_status_star"];
      }
    } else if (name == "p1-check") {
      if (auto p = load("p1_check.json")) {
        sec["vertex_verdict"] = (*p)["vertex"]["verdict"];
        sec["vertex_detail"] = (*p)["vertex"]["detail"];
        sec["cross_validation"] = (*p)["cross_validation"];
        sec["hessian"] = (*p)["hessian"];
      }
    } else if (name == "concentration") {
      if (auto c = load("concentration.json")) {
        json rows = json::array();
        for (const auto &r : (*c)["rows"])
          rows.push_back({{"beta", r["beta"]},
                          {"distance", r["distance"]},
                          {"grid_distance", r["grid_distance"]},
                          {"grad_norm", r["grad_norm"]},
                          {"grad_bound", r["grad_bound"]}});
        sec["rows"] = rows;
        sec["distance_nonincreasing"] = (*c)["distance_nonincreasing"];
      }
    }
    for (const auto &f : stage_of[name].at("outputs"))
      if (bad.count(f.get<std::string>()))
        sec["incomplete"] = true;
    summary[name] = sec;
  }
  summary["errors"] = rep.errors;
  rep.summary = summary;

  std::string md = fmt::format("# mfgmm report\n\nscenario: {}, config hash {}, version {}\n",
                               md_value(summary["scenario"]),
                               md_value(summary["config_hash"]),
                               md_value(summary["version"]));
  for (const auto &name : stages()) {
    md += fmt::format("\n## {}\n\n", name);
    for (const auto &[key, value] : summary[name].items())
      md += fmt::format("- {}: {}\n", key, md_value(value));
  }
  if (!rep.errors.empty()) {
    md += "\n## errors\n\n";
    for (const auto &e : rep.errors)
      md += fmt::format("- {}\n", e);
  }
  rep.markdown = md;
  return rep;
}

Report write_report(const std::string &out_dir) {
  Report r = report(out_dir);
  io::write_json((fs::path(out_dir) / "report.json").string(), r.summary);
  std::ofstream md(fs::path(out_dir) / "report.md");
  if (!md)
    throw ConfigError(fmt::format("cannot write {}/report.md", out_dir));
  md << r.markdown;
  return r;
}

} // namespace mfgmm::harness
