#pragma once

#include "filterlab/contrastive.hpp"
#include "filterlab/model.hpp"

namespace filterlab {

struct MetricReport {
  double err_ssd = 0.0;
  double err_ccd = 0.0;
  double err_def3 = 0.0;
  double err_lpe = 0.0;
  bool rank_deficient = false;
};

// Subspace recovery error: max over the two modalities of the sin-Theta
// distance between the encoder's row space and the ground-truth subspace.
// A rank-deficient encoder (k < r independent rows) is measured on its actual
// row space with the missing r-k directions counted as fully misaligned.
double err_ssd(const Encoders& enc, const ModelParams& model);

// || U U~^T - Uhat Uhat~^T ||_F with Uhat / Uhat~ the top-r left/right
// singular factors of g^T g_tilde.
double err_ccd(const Encoders& enc, const ModelParams& model);

// || U^T Uhat - U~^T Uhat~ ||_F.
double err_def3(const Encoders& enc, const ModelParams& model);

// Latent prediction error via the trace identity on
// M = U^T Uhat Uhat~^T U~ - I: sqrt(tr(M)^2 + tr(M^2) + tr(M^T M)).
double err_lpe(const Encoders& enc, const ModelParams& model);

MetricReport all_metrics(const Encoders& enc, const ModelParams& model);

// Orthonormal basis of the row space of g (d x k, k = numerical rank <= r).
Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& g);

}  // namespace filterlab
