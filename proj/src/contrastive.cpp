#include "filterlab/contrastive.hpp"

#include <stdexcept>

namespace filterlab {

double loss(const Encoders& enc, const PairedData& data) {
  if (data.n() < 2) throw std::invalid_argument("loss: need n >= 2");
  const Eigen::MatrixXd s_n = cross_covariance(data, CovMode::centered);
  const double unreg = -(enc.g * s_n * enc.g_tilde.transpose()).trace();
  return unreg + 0.5 * enc.rho * enc.product().squaredNorm();
}

double loss_pairwise(const Encoders& enc, const PairedData& data) {
  const std::int64_t n = data.n();
  if (n < 2) throw std::invalid_argument("loss_pairwise: need n >= 2");
  // Embeddings, one row per sample.
  const Eigen::MatrixXd e = data.x * enc.g.transpose();
  const Eigen::MatrixXd et = data.x_tilde * enc.g_tilde.transpose();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double s_ii = e.row(i).dot(et.row(i));
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double s_ij = e.row(i).dot(et.row(j));
      const double s_ji = e.row(j).dot(et.row(i));
      acc += (s_ij - s_ii) + (s_ji - s_ii);
    }
  }
  const double nn = static_cast<double>(n);
  return acc / (2.0 * nn * (nn - 1.0)) + 0.5 * enc.rho * enc.product().squaredNorm();
}

Encoders solve_closed_form(const PairedData& data, int r, double rho,
                           CovMode mode, int threads) {
  if (!(rho > 0.0)) throw std::invalid_argument("solve_closed_form: rho must be > 0");
  const std::int64_t min_n = mode == CovMode::centered ? 2 : 1;
  if (data.n() < min_n) throw std::invalid_argument("solve_closed_form: too few samples");
  if (r < 1 || r > std::min(data.x.cols(), data.x_tilde.cols()))
    throw std::invalid_argument("solve_closed_form: r out of range");

  const Eigen::MatrixXd s_n = cross_covariance(data, mode, threads);
  const TruncatedSvd svd = truncated_svd(s_n, r);
  const Eigen::VectorXd scale = (svd.s.cwiseSqrt() / std::sqrt(rho));
  Encoders enc;
  enc.g = scale.asDiagonal() * svd.u.transpose();
  enc.g_tilde = scale.asDiagonal() * svd.v.transpose();
  enc.rho = rho;
  return enc;
}

}  // namespace filterlab
