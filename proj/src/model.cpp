#include "filterlab/model.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "filterlab/parallel.hpp"

namespace filterlab {

namespace {

constexpr std::uint64_t kPurposeU = 1;
constexpr std::uint64_t kPurposeUTilde = 2;

std::uint64_t fold_double(std::uint64_t h, double v) {
  return mix64(h ^ std::bit_cast<std::uint64_t>(v));
}

void fix_column_signs(Eigen::MatrixXd& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      if (q(i, j) != 0.0) {
        if (q(i, j) < 0.0) q.col(j) = -q.col(j);
        break;
      }
    }
  }
}

}  // namespace

std::uint64_t ModelParams::digest() const {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  h = mix64(h ^ static_cast<std::uint64_t>(d));
  h = mix64(h ^ static_cast<std::uint64_t>(d_tilde));
  h = mix64(h ^ static_cast<std::uint64_t>(r));
  h = fold_double(h, eta);
  h = fold_double(h, gamma);
  h = fold_double(h, gamma_tilde);
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    for (Eigen::Index i = 0; i < u.rows(); ++i) h = fold_double(h, u(i, j));
  for (Eigen::Index j = 0; j < u_tilde.cols(); ++j)
    for (Eigen::Index i = 0; i < u_tilde.rows(); ++i) h = fold_double(h, u_tilde(i, j));
  return h;
}

Eigen::MatrixXd orthonormal_columns(int rows, int cols, RngStream stream) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = stream.next_gaussian();

  // Gram-Schmidt with a second re-orthogonalization pass.
  for (Eigen::Index j = 0; j < cols; ++j) {
    Eigen::VectorXd v = a.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        v -= a.col(i).dot(v) * a.col(i);
      }
    }
    const double norm = v.norm();
    if (norm < 1e-12) throw std::runtime_error("orthonormal_columns: degenerate draw");
    a.col(j) = v / norm;
  }
  fix_column_signs(a);
  return a;
}

ModelParams make_model(std::uint64_t seed, int d, int d_tilde, int r,
                       double gamma, double gamma_tilde, double eta) {
  if (r < 1 || r > std::min(d, d_tilde))
    throw std::invalid_argument("make_model: need 1 <= r <= min(d, d_tilde)");
  if (!(eta > 0.0 && eta <= 1.0))
    throw std::invalid_argument("make_model: eta must lie in (0, 1]");
  if (!(gamma > 0.0) || !(gamma_tilde > 0.0))
    throw std::invalid_argument("make_model: gamma, gamma_tilde must be positive (or +inf)");

  ModelParams m;
  m.d = d;
  m.d_tilde = d_tilde;
  m.r = r;
  m.eta = eta;
  m.gamma = gamma;
  m.gamma_tilde = gamma_tilde;
  RngStream root(seed);
  m.u = orthonormal_columns(d, r, root.child(kPurposeU));
  m.u_tilde = orthonormal_columns(d_tilde, r, root.child(kPurposeUTilde));
  return m;
}

namespace {

// Draw order within a sample's stream: coin, z, (z_tilde), xi, xi_tilde.
void sample_into(const ModelParams& model, RngStream& stream, Eigen::VectorXd& x,
                 Eigen::VectorXd& xt, bool& clean) {
  clean = stream.next_double() < model.eta;

  Eigen::VectorXd z(model.r);
  stream.fill_gaussian(z.data(), static_cast<std::size_t>(model.r));
  Eigen::VectorXd z_tilde;
  if (clean) {
    z_tilde = z;
  } else {
    z_tilde.resize(model.r);
    stream.fill_gaussian(z_tilde.data(), static_cast<std::size_t>(model.r));
  }

  x = model.u * z;
  if (!std::isinf(model.gamma)) {
    const double sigma = std::sqrt(1.0 / model.gamma);
    for (int i = 0; i < model.d; ++i) x[i] += sigma * stream.next_gaussian();
  }
  xt = model.u_tilde * z_tilde;
  if (!std::isinf(model.gamma_tilde)) {
    const double sigma = std::sqrt(1.0 / model.gamma_tilde);
    for (int i = 0; i < model.d_tilde; ++i) xt[i] += sigma * stream.next_gaussian();
  }
}

}  // namespace

SamplePair sample_pair(const ModelParams& model, RngStream& stream) {
  SamplePair p;
  sample_into(model, stream, p.x, p.x_tilde, p.clean_flag);
  return p;
}

Dataset sample_dataset(const ModelParams& model, std::int64_t n, RngStream stream,
                       int threads) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Dataset ds;
  ds.pairs.x.resize(n, model.d);
  ds.pairs.x_tilde.resize(n, model.d_tilde);
  ds.clean_flags.assign(static_cast<std::size_t>(n), 0);
  ds.provenance = {stream.key(), model.digest()};
#pragma omp parallel for schedule(static, 1024) num_threads(effective_threads(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream s = stream.child(static_cast<std::uint64_t>(i));
    bool clean = false;
    Eigen::VectorXd x, xt;
    sample_into(model, s, x, xt, clean);
    ds.pairs.x.row(i) = x.transpose();
    ds.pairs.x_tilde.row(i) = xt.transpose();
    ds.clean_flags[static_cast<std::size_t>(i)] = clean ? 1 : 0;
  }
  return ds;
}

Dataset sample_dataset_serial(const ModelParams& model, std::int64_t n, RngStream stream) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Dataset ds;
  ds.pairs.x.resize(n, model.d);
  ds.pairs.x_tilde.resize(n, model.d_tilde);
  ds.clean_flags.assign(static_cast<std::size_t>(n), 0);
  ds.provenance = {stream.key(), model.digest()};
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream s = stream.child(static_cast<std::uint64_t>(i));
    bool clean = false;
    Eigen::VectorXd x, xt;
    sample_into(model, s, x, xt, clean);
    ds.pairs.x.row(i) = x.transpose();
    ds.pairs.x_tilde.row(i) = xt.transpose();
    ds.clean_flags[static_cast<std::size_t>(i)] = clean ? 1 : 0;
  }
  return ds;
}

PairedData subset(const PairedData& data, const std::vector<std::int64_t>& rows) {
  PairedData out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  out.x_tilde.resize(static_cast<Eigen::Index>(rows.size()), data.x_tilde.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = data.x.row(rows[k]);
    out.x_tilde.row(static_cast<Eigen::Index>(k)) = data.x_tilde.row(rows[k]);
  }
  return out;
}

}  // namespace filterlab
