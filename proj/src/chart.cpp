#include "mfgmm/chart.hpp"

#include "mfgmm/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace mfgmm::chart {

VectorXd encode(const ModelPoint &xi, const Layout &layout) {
  const int P = layout.P;
  VectorXd theta(layout.dim());
  int o = 0;
  for (int k = 0; k < layout.K; ++k) {
    theta.segment(o, P) = xi.means[k];
    o += P;
    Eigen::LLT<MatrixXd> llt(xi.precisions[k]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("chart::encode: precision is not positive definite");
    const MatrixXd L = llt.matrixL();
    for (int j = 0; j < P; ++j)
      for (int i = j; i < P; ++i)
        theta[o++] = i == j ? std::log(L(i, i)) : L(i, j);
  }
  if (layout.weights)
    for (int k = 0; k + 1 < layout.K; ++k)
      theta[o++] = std::log(xi.weights[k] / xi.weights[layout.K - 1]);
  return theta;
}

ModelPoint decode(const VectorXd &theta, const Layout &layout,
                  const VectorXd &fixed_weights) {
  if (theta.size() != layout.dim())
    throw ConfigError(fmt::format("chart::decode: expected {} coordinates, got {}",
                                  layout.dim(), theta.size()));
  const int P = layout.P;
  ModelPoint xi;
  int o = 0;
  for (int k = 0; k < layout.K; ++k) {
    xi.means.push_back(theta.segment(o, P));
    o += P;
    MatrixXd L = MatrixXd::Zero(P, P);
    for (int j = 0; j < P; ++j)
      for (int i = j; i < P; ++i)
        L(i, j) = i == j ? std::exp(theta[o++]) : theta[o++];
    xi.precisions.push_back(L * L.transpose());
  }
  if (layout.weights) {
    VectorXd eta = VectorXd::Zero(layout.K);
    eta.head(layout.K - 1) = theta.segment(o, layout.K - 1);
    const double mx = eta.maxCoeff();
    VectorXd e = (eta.array() - mx).exp().matrix();
    xi.weights = e / e.sum();
  } else {
    if (fixed_weights.size() != layout.K)
      throw ConfigError("chart::decode: fixed weights required");
    xi.weights = fixed_weights;
  }
  return xi;
}

VectorXd pull_back(const gmm::TangentVector &g, const ModelPoint &xi,
                   const Layout &layout) {
  const int P = layout.P;
  VectorXd out(layout.dim());
  int o = 0;
  for (int k = 0; k < layout.K; ++k) {
    out.segment(o, P) = g.means[k];
    o += P;
    Eigen::LLT<MatrixXd> llt(xi.precisions[k]);
    const MatrixXd L = llt.matrixL();
    // d tr(G L L^T) / dL = 2 G L for symmetric G.
    const MatrixXd gl = 2.0 * g.precisions[k] * L;
    for (int j = 0; j < P; ++j)
      for (int i = j; i < P; ++i)
        out[o++] = i == j ? gl(i, i) * L(i, i) : gl(i, j);
  }
  if (layout.weights) {
    const double mean = xi.weights.dot(g.weights);
    for (int k = 0; k + 1 < layout.K; ++k)
      out[o++] = xi.weights[k] * (g.weights[k] - mean);
  }
  return out;
}

} // namespace mfgmm::chart
