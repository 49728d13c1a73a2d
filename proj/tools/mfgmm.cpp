#include "mfgmm/error.hpp"
#include "mfgmm/harness.hpp"
#include "mfgmm/io.hpp"
#include "mfgmm/landscape.hpp"
#include "mfgmm/mean_field.hpp"
#include "mfgmm/parallel.hpp"
#include "mfgmm/random.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace mfgmm;
namespace h = mfgmm::harness;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App *app, Common &c) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--out", c.out, "output directory (or file in module mode)");
  app->add_option("--seed", c.seed, "override the master seed");
  app->add_option("--threads", c.threads, "worker threads (default: MFGMM_THREADS or 1)");
}

int run_scenario(const std::string &scenario, const Common &c) {
  if (c.config.empty())
    throw ConfigError(fmt::format("{}: --config is required", scenario));
  h::ExperimentConfig cfg = h::load_config(c.config);
  cfg.scenario = scenario;
  if (c.seed)
    cfg.mixture.seed = *c.seed;
  h::RunOptions opts;
  opts.out_dir = c.out.empty() ? "out" : c.out;
  opts.threads = c.threads;
  const h::RunManifest m = h::run(cfg, opts);
  for (const auto &s : m.stages)
    fmt::print("{:<14} {:<10} {:.3f} s\n", s.name, s.status, s.seconds);
  fmt::print("manifest: {}\n", (fs::path(opts.out_dir) / "manifest.json").string());
  return 0;
}

std::string summary_path(const std::string &csv) {
  fs::path p(csv);
  return (p.parent_path() / (p.stem().string() + "_summary.json")).string();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mean-field variational Bayes for Gaussian mixtures: experiments and checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(h::kVersion));

  Common common;
  std::map<std::string, CLI::App *> subs;
  for (const auto &s : h::scenarios()) {
    subs[s] = app.add_subcommand(s, fmt::format("run the {} scenario", s));
    add_common(subs[s], common);
  }

  // module modes
  std::string truth_file, priors_file, lattice_arg, a_file, data_file;
  std::string weighting = "as_printed", solver = "auto";
  double lambda0 = 1.0, beta = 1.0;
  std::uint64_t budget = 1'000'000;
  bool exact_z = false, laplace = false;

  auto *ls = subs["landscape"];
  ls->add_option("--truth", truth_file, "true mixture (JSON)");
  ls->add_option("--priors", priors_file, "priors (JSON)");
  ls->add_option("--lattice", lattice_arg, "N1,...,NK[,stride]");
  ls->add_option("--lambda0", lambda0, "lambda0 for module mode")->check(CLI::PositiveNumber);
  ls->add_option("--beta", beta, "inverse temperature for module mode")
      ->check(CLI::PositiveNumber);
  ls->add_option("--budget", budget, "lattice cell budget");
  ls->add_option("--weighting", weighting)->check(CLI::IsMember({"as_printed", "class_conditional"}));
  ls->add_option("--solver", solver)->check(CLI::IsMember({"auto", "newton", "closed_form"}));

  auto *p1 = subs["p1-check"];
  p1->add_option("--truth", truth_file, "true mixture (JSON)");
  p1->add_option("--A", a_file, "Markov matrix (JSON array of rows)");
  p1->add_option("--priors", priors_file, "priors (JSON, default flat with R = 10)");
  p1->add_option("--lambda0", lambda0)->check(CLI::PositiveNumber);
  p1->add_option("--weighting", weighting)->check(CLI::IsMember({"as_printed", "class_conditional"}));

  auto *cv = subs["cavi"];
  cv->add_option("--data", data_file, "dataset CSV (n,x1..xP)");
  auto *ez = cv->add_flag("--exact-z", exact_z, "quadrature corrections R_i");
  cv->add_flag("--laplace", laplace, "Laplace corrections R_i")->excludes(ez);

  std::string report_dir = "out";
  auto *rp = app.add_subcommand("report", "summarize a run directory");
  rp->add_option("dir", report_dir, "run directory holding manifest.json");
  rp->add_option("--out", report_dir, "run directory holding manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::ConfigError);
  }

  try {
    if (rp->parsed()) {
      const auto r = h::write_report(report_dir);
      std::cout << r.markdown;
      for (const auto &e : r.errors)
        fmt::print(stderr, "report: {}\n", e);
      return 0;
    }

    if (ls->parsed() && !truth_file.empty()) {
      if (priors_file.empty() || lattice_arg.empty() || common.out.empty())
        throw ConfigError("landscape: --truth needs --priors, --lattice and --out");
      const TrueMixture tm = io::truth_from_json(io::read_json(truth_file));
      const PriorConfig pr = io::priors_from_json(io::read_json(priors_file), tm.K());
      const auto spec = h::parse_lattice(lattice_arg, tm.K(), budget);
      landscape::SweepOptions so;
      so.beta = beta;
      so.lambda0 = lambda0;
      so.weighting = weighting == "as_printed" ? landscape::Weighting::AsPrinted
                                               : landscape::Weighting::ClassConditional;
      so.solver = solver == "auto"     ? landscape::Solver::Auto
                  : solver == "newton" ? landscape::Solver::Newton
                                       : landscape::Solver::ClosedForm;
      so.threads = resolve_threads(common.threads);
      const auto sw = landscape::sweep(spec, tm, pr, so);
      sw.write_csv(common.out);
      sw.write_summary(summary_path(common.out));
      fmt::print("{} cells, F* = {:.10g}\n", sw.records.size(), sw.argmin().F);
      return 0;
    }

    if (p1->parsed() && !truth_file.empty()) {
      if (a_file.empty() || common.out.empty())
        throw ConfigError("p1-check: --truth needs --A and --out");
      const TrueMixture tm = io::truth_from_json(io::read_json(truth_file));
      if (tm.classSizes.empty())
        throw ConfigError(fmt::format("{}: p1-check needs classSizes (or trueLabels)", truth_file));
      const PriorConfig pr = priors_file.empty()
                                 ? PriorConfig::flat(tm.K(), 10.0)
                                 : io::priors_from_json(io::read_json(priors_file), tm.K());
      const MatrixXd A = io::matrix_from_json(io::read_json(a_file), "A");
      const auto w = weighting == "as_printed" ? landscape::Weighting::AsPrinted
                                               : landscape::Weighting::ClassConditional;
      io::write_json(common.out, h::p1_report(A, tm, pr, lambda0, w));
      return 0;
    }

    if (cv->parsed() && !data_file.empty()) {
      if (common.config.empty() || common.out.empty())
        throw ConfigError("cavi: --data needs --config and --out");
      const h::ExperimentConfig cfg = h::load_config(common.config);
      const Dataset ds = io::read_dataset_csv(data_file);
      if (ds.P() != cfg.mixture.P)
        throw ConfigError(fmt::format("{}: has P = {} but the config has P = {}", data_file,
                                      ds.P(), cfg.mixture.P));
      mf::CaviOptions o;
      o.beta = cfg.mixture.beta;
      o.max_iter = cfg.cavi.max_iter;
      o.tol = cfg.cavi.tol;
      o.backend = exact_z   ? mf::Backend::Quadrature
                  : laplace ? mf::Backend::Laplace
                            : cfg.cavi.backend;
      o.gh_nodes = cfg.cavi.gh_nodes;
      o.init_kappa = cfg.cavi.init_kappa;
      o.seed = derive_seed(common.seed.value_or(cfg.mixture.seed), "cavi");
      o.threads = resolve_threads(common.threads);
      o.budget = cfg.cavi.exact_z_budget;
      const mf::Cavi cavi(ds, cfg.mixture.K, cfg.priors, gmm::lambda0_for(ds.N(), cfg.l0), o);
      const mf::CaviState s = cavi.run();
      io::write_json(common.out, h::cavi_state_json(cavi, s));
      fmt::print("{} iterations, converged: {}, residual {:.3e}\n", s.iteration, s.converged,
                 s.residual);
      return 0;
    }

    for (const auto &[name, sub] : subs)
      if (sub->parsed())
        return run_scenario(name, common);
    return 0;
  } catch (const Error &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::NumericalFailure);
  }
}
