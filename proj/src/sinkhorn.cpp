#include "gencaps/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gencaps {

double marginal_deviation(const Eigen::MatrixXd& m) {
  const double rows = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (m.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(rows, cols);
}

SinkhornResult sinkhorn_scale(Eigen::MatrixXd m, const SinkhornOptions& opts) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("sinkhorn: matrix must be square and non-empty");
  }
  if (!m.allFinite() || (m.array() < 0.0).any()) {
    throw std::invalid_argument("sinkhorn: entries must be finite and nonnegative");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  if ((m.rowwise().sum().array() <= 0.0).any() || (m.colwise().sum().array() <= 0.0).any()) {
    throw SinkhornError("sinkhorn: all-zero row or column", inf);
  }

  SinkhornResult res;
  for (int it = 1; it <= opts.max_iters; ++it) {
    m.array().colwise() /= m.rowwise().sum().array();
    m.array().rowwise() /= m.colwise().sum().array();
    // Columns sum to one after the half-step; the row sums carry the error.
    res.deviation = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
    res.iterations = it;
    if (res.deviation <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.matrix = std::move(m);
  return res;
}

Eigen::MatrixXd sinkhorn_knopp(const Eigen::MatrixXd& m, double tol, int max_iters) {
  auto res = sinkhorn_scale(m, {tol, max_iters});
  if (!res.converged) {
    throw SinkhornError("sinkhorn: no convergence after " + std::to_string(max_iters) +
                            " iterations (deviation " + std::to_string(res.deviation) + ")",
                        res.deviation);
  }
  return std::move(res.matrix);
}

}  // namespace gencaps
