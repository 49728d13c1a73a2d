#pragma once

#include "mfgmm/gmm_core.hpp"
#include "mfgmm/io.hpp"
#include "mfgmm/landscape.hpp"
#include "mfgmm/mean_field.hpp"
#include "mfgmm/spd_geometry.hpp"
#include "mfgmm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Experiment configuration, scenario dispatch, manifests and reports.
namespace mfgmm::harness {

using io::json;

inline constexpr const char *kVersion = "0.1.0";

inline const std::vector<std::string> &scenarios() {
  static const std::vector<std::string> s{
      "generate", "convexity",     "cavi",         "landscape",
      "p1-check", "concentration", "full-pipeline"};
  return s;
}

/// The six stages, in pipeline order.
inline const std::vector<std::string> &stages() {
  static const std::vector<std::string> s{"generate", "convexity", "cavi",
                                          "landscape", "p1-check",
                                          "concentration"};
  return s;
}

struct CaviFlags {
  mf::Backend backend = mf::Backend::Laplace;
  double tol = 1e-8;
  int max_iter = 500;
  int gh_nodes = 7;
  double init_kappa = 2.0;
  std::uint64_t exact_z_budget = mf::SheetTable::kDefaultBudget;
};

struct ConvexityFlags {
  int geodesics = 200;
  int steps = 64;
  spd::EndpointMode mode = spd::EndpointMode::Cutoff;
  double local_radius = 0.5;
};

struct LandscapeFlags {
  int stride = 1;
  std::uint64_t budget = 1'000'000;
  landscape::Weighting weighting = landscape::Weighting::AsPrinted;
  landscape::Solver solver = landscape::Solver::Auto;
  std::optional<double> lambda0; // defaults to the run's lambda0
};

struct P1Flags {
  int random_A = 50;
  int hessian_directions = 100;
};

struct ConcentrationFlags {
  std::vector<double> betas{0.5, 1.0, 2.0};
  int grid = 9;
  double mean_halfwidth = 3.0;
  double log_precision_halfwidth = 2.0;
  double eta_halfwidth = 2.0;
  std::uint64_t grid_budget = 2'000'000;
};

struct Tolerances {
  double critical_point = 1e-4;  // residual / mean sheet gradient norm
  double critical_floor = 1e-8;  // absolute, for a zero gradient scale
  double closed_form = 1e-6;     // p1 closed form vs Newton, parameters
  double hessian_fd = 1e-5;      // relative
  int recovery_cells = 2;
  double recovery_mean = 0.2;
  double recovery_precision_rel = 0.2;
};

struct ExperimentConfig {
  std::string scenario = "full-pipeline";
  MixtureConfig mixture;
  gmm::TruthSpec truth;
  PriorConfig priors;
  double l0 = 0.1; // lambda0 = max(1, floor(l0 N))
  CaviFlags cavi;
  ConvexityFlags convexity;
  LandscapeFlags landscape;
  P1Flags p1;
  ConcentrationFlags concentration;
  Tolerances tolerances;

  [[nodiscard]] int lambda0() const { return gmm::lambda0_for(mixture.N, l0); }
  /// Checks every module's preconditions; throws ConfigError.
  void validate() const;
};

/// Unknown or ill-typed fields are rejected with the field path.
[[nodiscard]] ExperimentConfig config_from_json(const json &j);
/// Every field, defaults included.
[[nodiscard]] json to_json(const ExperimentConfig &cfg);
[[nodiscard]] ExperimentConfig load_config(const std::string &path);

/// 64-bit FNV-1a, printed as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(const std::string &bytes);
[[nodiscard]] std::string file_hash(const std::string &path);

struct StageRecord {
  std::string name;
  std::string status; // PASS | FAIL | skipped (reason) | error (message)
  double seconds = 0.0;
  std::vector<std::string> outputs; // file names relative to the out dir
};

struct OutputFile {
  std::string name;
  std::string hash;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string scenario;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  json config;
  std::vector<StageRecord> stages;
  std::vector<OutputFile> outputs;

  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] json to_json() const;
};

struct RunOptions {
  std::string out_dir = "out";
  int threads = 0; // 0: MFGMM_THREADS or 1
};

/// Runs the configured scenario and writes manifest.json into the output
/// directory. A stage that throws is recorded as an error and the exception
/// is rethrown after the manifest is written.
RunManifest run(const ExperimentConfig &cfg, const RunOptions &opts);

struct Report {
  json summary;                    // one object per stage
  std::vector<std::string> errors; // missing or corrupted outputs
  std::string markdown;
};

/// Reads manifest.json and the stage outputs of `out_dir`. Missing stages
/// are marked "not run"; unreadable outputs are listed in `errors` and the
/// rest of the summary is still produced.
[[nodiscard]] Report report(const std::string &out_dir);
/// report() plus report.json and report.md in `out_dir`.
Report write_report(const std::string &out_dir);

/// "N1,...,NK[,stride]" for K true classes.
[[nodiscard]] landscape::LatticeSpec parse_lattice(const std::string &arg,
                                                   int K,
                                                   std::uint64_t budget);

/// Coefficients, roots and closed-form vs Newton deltas for one A (P = 1).
[[nodiscard]] json p1_report(const MatrixXd &A, const TrueMixture &truth,
                             const PriorConfig &priors, double lambda0,
                             landscape::Weighting weighting);

/// v (when |Z_0| <= 4096), u aggregated by class counts, m, R and the trace.
[[nodiscard]] json cavi_state_json(const mf::Cavi &cavi,
                                   const mf::CaviState &state);

/// Rows of a CSV file with a header. Throws ConfigError naming the file and
/// the 1-based line when a row has the wrong field count or a value that is
/// not a number (columns listed in `text_columns` are kept as text).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
[[nodiscard]] CsvTable read_csv(const std::string &path,
                                const std::vector<std::string> &text_columns = {});

} // namespace mfgmm::harness
