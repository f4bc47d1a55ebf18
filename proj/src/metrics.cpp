#include "filterlab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "filterlab/linalg.hpp"

namespace filterlab {

namespace {

// Numerical rank cut relative to the top singular value.
constexpr double kRankRelTol = 1e-12;

// sin-Theta distance of a k-dimensional basis against the r-dimensional truth
// with k <= r; the r-k missing directions each contribute a full right angle.
double ssd_side(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& truth,
                bool* deficient) {
  const Eigen::Index r = truth.cols();
  const Eigen::Index k = basis.cols();
  if (k == r) return sin_theta_dist(basis, truth);
  *deficient = true;
  if (k == 0) return std::sqrt(static_cast<double>(r));
  // Principal-angle cosines between the k-dim row space and the r-dim truth.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.transpose() * truth);
  double sin_sq = static_cast<double>(r - k);
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::min(1.0, svd.singularValues()[i]);
    sin_sq += std::max(0.0, 1.0 - c * c);
  }
  return std::sqrt(sin_sq);
}

struct ProductFactors {
  Eigen::MatrixXd u_hat;
  Eigen::MatrixXd ut_hat;
};

ProductFactors product_factors(const Encoders& enc, int r) {
  const TruncatedSvd svd = truncated_svd(enc.product(), r);
  return {svd.u, svd.v};
}

}  // namespace

Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& g) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = s.size() > 0 ? s[0] * kRankRelTol : 0.0;
  Eigen::Index k = 0;
  while (k < s.size() && s[k] > cut && s[k] > 0.0) ++k;
  return svd.matrixV().leftCols(k);
}

double err_ssd(const Encoders& enc, const ModelParams& model) {
  bool deficient = false;
  const double a = ssd_side(row_space_basis(enc.g), model.u, &deficient);
  const double b = ssd_side(row_space_basis(enc.g_tilde), model.u_tilde, &deficient);
  return std::max(a, b);
}

double err_ccd(const Encoders& enc, const ModelParams& model) {
  const ProductFactors f = product_factors(enc, model.r);
  return (model.u * model.u_tilde.transpose() - f.u_hat * f.ut_hat.transpose()).norm();
}

double err_def3(const Encoders& enc, const ModelParams& model) {
  const ProductFactors f = product_factors(enc, model.r);
  return (model.u.transpose() * f.u_hat - model.u_tilde.transpose() * f.ut_hat).norm();
}

double err_lpe(const Encoders& enc, const ModelParams& model) {
  const ProductFactors f = product_factors(enc, model.r);
  const Eigen::MatrixXd m = model.u.transpose() * f.u_hat * f.ut_hat.transpose() *
                                model.u_tilde -
                            Eigen::MatrixXd::Identity(model.r, model.r);
  const double tr = m.trace();
  const double val = tr * tr + (m * m).trace() + m.squaredNorm();
  return std::sqrt(std::max(0.0, val));
}

MetricReport all_metrics(const Encoders& enc, const ModelParams& model) {
  MetricReport rep;
  bool deficient = false;
  const double a = ssd_side(row_space_basis(enc.g), model.u, &deficient);
  const double b = ssd_side(row_space_basis(enc.g_tilde), model.u_tilde, &deficient);
  rep.err_ssd = std::max(a, b);
  rep.rank_deficient = deficient;
  rep.err_ccd = err_ccd(enc, model);
  rep.err_def3 = err_def3(enc, model);
  rep.err_lpe = err_lpe(enc, model);
  return rep;
}

}  // namespace filterlab
