#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace gencaps {

class SinkhornError : public std::runtime_error {
 public:
  SinkhornError(const std::string& what, double deviation)
      : std::runtime_error(what), deviation_(deviation) {}
  /// Worst marginal deviation at the point of failure (inf for a zero line).
  double deviation() const { return deviation_; }

 private:
  double deviation_;
};

struct SinkhornOptions {
  double tol = 1e-6;
  int max_iters = 1000;
};

struct SinkhornResult {
  Eigen::MatrixXd matrix;
  int iterations = 0;
  double deviation = 0.0;  // max |row or column sum - 1|
  bool converged = false;
};

/// Alternating row/column normalization of a nonnegative square matrix.
/// Each iteration ends on the column half-step. Non-convergence is reported
/// in the result rather than thrown. Throws SinkhornError for a zero row or
/// column, std::invalid_argument for a non-square or negative input.
SinkhornResult sinkhorn_scale(Eigen::MatrixXd m, const SinkhornOptions& opts = {});

/// As sinkhorn_scale, but throws SinkhornError when max_iters is exhausted.
Eigen::MatrixXd sinkhorn_knopp(const Eigen::MatrixXd& m, double tol = 1e-6, int max_iters = 1000);

/// max |row sum - 1| and |col sum - 1|.
double marginal_deviation(const Eigen::MatrixXd& m);

}  // namespace gencaps
