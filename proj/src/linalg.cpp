#include "filterlab/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "filterlab/parallel.hpp"

namespace filterlab {

namespace {

constexpr std::int64_t kCovBlock = 4096;

struct CovPartial {
  Eigen::MatrixXd prod;   // x^T xt over the block
  Eigen::VectorXd sum_x;
  Eigen::VectorXd sum_xt;
};

Eigen::MatrixXd assemble(const CovPartial& acc, std::int64_t n, CovMode mode) {
  if (mode == CovMode::uncentered) {
    return acc.prod / static_cast<double>(n);
  }
  const double nn = static_cast<double>(n);
  Eigen::MatrixXd c = acc.prod - (acc.sum_x / nn) * acc.sum_xt.transpose();
  return c / (nn - 1.0);
}

void check_n(std::int64_t n, CovMode mode) {
  if (mode == CovMode::centered && n < 2)
    throw std::invalid_argument("cross_covariance: centered mode needs n >= 2");
  if (n < 1) throw std::invalid_argument("cross_covariance: n must be >= 1");
}

}  // namespace

Eigen::MatrixXd cross_covariance(const PairedData& data, CovMode mode, int threads) {
  const std::int64_t n = data.n();
  check_n(n, mode);
  const Eigen::Index d = data.x.cols();
  const Eigen::Index dt = data.x_tilde.cols();
  CovPartial init{Eigen::MatrixXd::Zero(d, dt), Eigen::VectorXd::Zero(d),
                  Eigen::VectorXd::Zero(dt)};
  CovPartial acc = blocked_reduce<CovPartial>(
      n, kCovBlock, init,
      [&](std::int64_t lo, std::int64_t hi, CovPartial& p) {
        const auto xb = data.x.middleRows(lo, hi - lo);
        const auto xtb = data.x_tilde.middleRows(lo, hi - lo);
        p.prod.noalias() += xb.transpose() * xtb;
        p.sum_x += xb.colwise().sum().transpose();
        p.sum_xt += xtb.colwise().sum().transpose();
      },
      [](CovPartial& a, const CovPartial& b) {
        a.prod += b.prod;
        a.sum_x += b.sum_x;
        a.sum_xt += b.sum_xt;
      },
      threads);
  return assemble(acc, n, mode);
}

Eigen::MatrixXd cross_covariance_serial(const PairedData& data, CovMode mode) {
  const std::int64_t n = data.n();
  check_n(n, mode);
  const Eigen::Index d = data.x.cols();
  const Eigen::Index dt = data.x_tilde.cols();
  CovPartial acc{Eigen::MatrixXd::Zero(d, dt), Eigen::VectorXd::Zero(d),
                 Eigen::VectorXd::Zero(dt)};
  // Accumulates per-block temporaries exactly like the parallel kernel, so
  // the two paths round identically.
  Eigen::MatrixXd block(d, dt);
  for (std::int64_t lo = 0; lo < n; lo += kCovBlock) {
    const std::int64_t hi = std::min(n, lo + kCovBlock);
    const auto xb = data.x.middleRows(lo, hi - lo);
    const auto xtb = data.x_tilde.middleRows(lo, hi - lo);
    block.setZero();
    block.noalias() += xb.transpose() * xtb;
    acc.prod += block;
    acc.sum_x += xb.colwise().sum().transpose();
    acc.sum_xt += xtb.colwise().sum().transpose();
  }
  return assemble(acc, n, mode);
}

TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, int a) {
  if (a < 1 || a > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("truncated_svd: need 1 <= a <= min(rows, cols)");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = svd.matrixU().leftCols(a);
  out.s = svd.singularValues().head(a);
  out.v = svd.matrixV().leftCols(a);
  for (int j = 0; j < a; ++j) {
    Eigen::Index pivot = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.u.rows(); ++i) {
      const double mag = std::abs(out.u(i, j));
      if (mag > best) {
        best = mag;
        pivot = i;
      }
    }
    if (out.u(pivot, j) < 0.0) {
      out.u.col(j) = -out.u.col(j);
      out.v.col(j) = -out.v.col(j);
    }
  }
  return out;
}

Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.rows();
  const Eigen::Index k = x.cols();
  if (k > m) throw std::invalid_argument("complete_basis: more columns than rows");
  if (k > 0) {
    const double defect =
        (x.transpose() * x - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
    if (defect > 1e-8)
      throw std::invalid_argument("complete_basis: input columns are not orthonormal");
  }
  if (m == k) return Eigen::MatrixXd(m, 0);
  if (k == 0) return Eigen::MatrixXd::Identity(m, m);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(m - k);
}

double sin_theta_dist(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("sin_theta_dist: shape mismatch");
  if (x.cols() == 0 || x.rows() == x.cols()) return 0.0;
  const Eigen::MatrixXd x_perp = complete_basis(x);
  return (x_perp.transpose() * y).norm();
}

}  // namespace filterlab
