#pragma once

#include <Eigen/Dense>

#include "filterlab/linalg.hpp"
#include "filterlab/model.hpp"

namespace filterlab {

// Learned linear encoder pair. Only the product g^T g_tilde (and hence the
// row spaces) is pinned by the objective; the factor split is the symmetric
// square-root split.
struct Encoders {
  Eigen::MatrixXd g;        // r x d
  Eigen::MatrixXd g_tilde;  // r x d_tilde
  double rho = 1.0;

  Eigen::MatrixXd product() const { return g.transpose() * g_tilde; }
};

// Regularized contrastive loss via the reduction to the centered
// cross-covariance: -tr(G S_n G~^T) + (rho/2) ||G^T G~||_F^2.
double loss(const Encoders& enc, const PairedData& data);

// The same objective evaluated as the literal pairwise double sum over the
// n x n similarity grid. Kept as an independent cross-check of `loss`.
double loss_pairwise(const Encoders& enc, const PairedData& data);

// Global minimizer: G^T G~ = (1/rho) SVD_r(S_n), split symmetrically as
// G = rho^{-1/2} S_r^{1/2} U_r^T, G~ = rho^{-1/2} S_r^{1/2} V_r^T.
Encoders solve_closed_form(const PairedData& data, int r, double rho,
                           CovMode mode = CovMode::centered, int threads = 0);

}  // namespace filterlab
