#pragma once

#include "mfgmm/random.hpp"
#include "mfgmm/types.hpp"

#include <string>
#include <vector>

namespace mfgmm::spd {

/// A symmetric positive-definite matrix; construction validates.
class SpdPoint {
public:
  explicit SpdPoint(MatrixXd m);
  [[nodiscard]] const MatrixXd &matrix() const { return m_; }

private:
  MatrixXd m_;
};

/// f(M) = U f(D) U^T for symmetric M. Throws when an eigenvalue falls below
/// the 1e-12 floor and `f` needs positivity.
[[nodiscard]] MatrixXd spd_sqrt(const MatrixXd &m);
[[nodiscard]] MatrixXd spd_inv_sqrt(const MatrixXd &m);
[[nodiscard]] MatrixXd spd_log(const MatrixXd &m);
[[nodiscard]] MatrixXd sym_exp(const MatrixXd &m);

/// Norm of the log-eigenvalues of X^{-1/2} Y X^{-1/2}.
[[nodiscard]] double rao_fisher_distance(const SpdPoint &x, const SpdPoint &y);
/// Same, without the validating wrapper.
[[nodiscard]] double rao_fisher_distance(const MatrixXd &x, const MatrixXd &y);
[[nodiscard]] double distance_to_identity(const MatrixXd &x);

/// gamma(t) = X^{1/2} (X^{-1/2} Y X^{-1/2})^t X^{1/2}, t in [0, 1].
[[nodiscard]] SpdPoint spd_geodesic(const SpdPoint &x, const SpdPoint &y,
                                    double t);

/// Unit-speed geodesic of the product of (mean, precision) factors; the
/// mixture weights stay fixed along it.
struct ProductGeodesic {
  struct Component {
    VectorXd mean_start;
    VectorXd direction;   // b_k, unit norm (zero when the segment is empty)
    MatrixXd sqrt_start;  // X^{1/2}
    MatrixXd frame;       // orthogonal Q diagonalizing X^{-1/2} Y X^{-1/2}
    VectorXd exponents;   // r_k, unit norm (zero when the segment is empty)
    double alpha = 0.0;   // speed fraction of the mean factor
    double beta = 0.0;    // speed fraction of the precision factor
  };
  std::vector<Component> components;
  VectorXd weights;
  double length = 0.0;

  [[nodiscard]] ModelPoint at(double s) const;
  /// sum_k alpha_k^2 + beta_k^2 (equals 1 for a non-degenerate geodesic).
  [[nodiscard]] double speed_budget() const;
};

/// The product geodesic from `start` to `end`. Both must lie strictly inside
/// the cut-off of radius R.
[[nodiscard]] ProductGeodesic product_geodesic(const ModelPoint &start,
                                               const ModelPoint &end,
                                               double R);

/// Point drawn uniformly in |mu| < radius for each mean and with log-spectrum
/// uniform in the ball of the same radius around `center` (Haar frame).
[[nodiscard]] ModelPoint sample_in_ball(Rng &rng, const ModelPoint &center,
                                        double mean_radius,
                                        double precision_radius);

/// Random product geodesic between two endpoints drawn inside the cut-off.
[[nodiscard]] ProductGeodesic sample_product_geodesic(Rng &rng,
                                                      const ModelPoint &center,
                                                      double radius, double R);

enum class EndpointMode {
  Cutoff, // endpoints uniform in the whole cut-off set
  Local,  // endpoints in a ball of `local_radius` around `center`
};

struct ConvexityOptions {
  int geodesics = 200;
  int steps = 64;
  std::uint64_t seed = 0;
  EndpointMode mode = EndpointMode::Cutoff;
  double local_radius = 0.5;
  ModelPoint center; // defaults to ModelPoint::centered when empty
  int threads = 1;
};

struct ConvexitySample {
  int geodesic = 0;
  double t = 0.0;
  double value = 0.0;
};

struct ConvexityReport {
  std::vector<ConvexitySample> samples;
  std::vector<int> clipped; // geodesic ids that left the cut-off
  double min = kInf;
  double C_hat = kInf;
  int min_class_size = 0;
  bool pass = false;

  void write_csv(const std::string &path) const;
  void write_summary(const std::string &path) const;
};

/// Central second differences of -log P_N (= lambda0 * Phi) on the sheet
/// `z` along random product geodesics.
[[nodiscard]] ConvexityReport convexity_scan(const Dataset &ds,
                                             const Assignment &z,
                                             const PriorConfig &priors,
                                             const ConvexityOptions &opts);

/// Same scan for arbitrary sufficient statistics (e.g. a u-weighted mixture
/// of sheets).
[[nodiscard]] ConvexityReport convexity_scan(const SheetStats &stats,
                                             const VectorXd &weights,
                                             const PriorConfig &priors,
                                             const ConvexityOptions &opts);

} // namespace mfgmm::spd
