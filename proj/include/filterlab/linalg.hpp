#pragma once

#include <Eigen/Dense>

#include "filterlab/model.hpp"

namespace filterlab {

enum class CovMode { centered, uncentered };

// Empirical cross-covariance of the paired samples.
//   centered:   (1/(n-1)) * sum_i (x_i - mean_x)(xt_i - mean_xt)^T   (n >= 2)
//   uncentered: (1/n)     * sum_i x_i xt_i^T                         (n >= 1)
// The parallel kernel accumulates fixed-size blocks and combines them in
// block order, so the result is bit-identical to the serial reference.
Eigen::MatrixXd cross_covariance(const PairedData& data,
                                 CovMode mode = CovMode::centered,
                                 int threads = 0);
Eigen::MatrixXd cross_covariance_serial(const PairedData& data,
                                        CovMode mode = CovMode::centered);

struct TruncatedSvd {
  Eigen::MatrixXd u;  // m x a, orthonormal columns
  Eigen::VectorXd s;  // a singular values, nonincreasing
  Eigen::MatrixXd v;  // n x a, orthonormal columns
};

// Top-a singular triplets with a deterministic sign convention: in each left
// singular vector the entry of largest magnitude (lowest index on ties) is
// made positive, and the right vector's sign follows.
TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, int a);

// Orthonormal basis of the orthogonal complement of span(x); x must have
// orthonormal columns. Returns an m x (m-k) matrix (empty when m == k).
Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& x);

// Frobenius norm of the sines of the principal angles between the column
// spans of x and y (equal shapes, orthonormal columns), computed as
// ||x_perp^T y||_F. Value in [0, sqrt(k)].
double sin_theta_dist(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

}  // namespace filterlab
