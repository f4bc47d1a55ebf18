#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/rng.hpp"

namespace filterlab {

// Ground-truth generative model: paired observations
//   x = U z + xi,  x_tilde = U_tilde z_tilde + xi_tilde,
// where z, z_tilde share an r-dimensional latent with probability eta and are
// independent otherwise, and the noise is isotropic Gaussian with inverse
// variances gamma, gamma_tilde. gamma = +inf means exactly zero noise.
struct ModelParams {
  int d = 0;
  int d_tilde = 0;
  int r = 0;
  double eta = 1.0;
  double gamma = 1.0;
  double gamma_tilde = 1.0;
  Eigen::MatrixXd u;        // d x r, orthonormal columns
  Eigen::MatrixXd u_tilde;  // d_tilde x r, orthonormal columns

  std::uint64_t digest() const;
};

// Inverse noise variance as a finite number; +inf maps to exactly 0.
inline double inv_or_zero(double gamma) {
  return std::isinf(gamma) ? 0.0 : 1.0 / gamma;
}

ModelParams make_model(std::uint64_t seed, int d, int d_tilde, int r,
                       double gamma, double gamma_tilde, double eta);

// Orthonormalizes the columns of a Gaussian matrix (two-pass Gram-Schmidt),
// then fixes each column's sign so its first nonzero entry is positive.
Eigen::MatrixXd orthonormal_columns(int rows, int cols, RngStream stream);

struct SamplePair {
  Eigen::VectorXd x;
  Eigen::VectorXd x_tilde;
  bool clean_flag = false;  // diagnostics only
};

// The view training code is allowed to see: paired samples, one per row,
// with no clean/corrupt flags.
struct PairedData {
  Eigen::MatrixXd x;        // n x d
  Eigen::MatrixXd x_tilde;  // n x d_tilde

  std::int64_t n() const { return x.rows(); }
};

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t model_digest = 0;
};

struct Dataset {
  PairedData pairs;
  std::vector<std::uint8_t> clean_flags;  // diagnostics only; training paths take PairedData
  Provenance provenance;

  std::int64_t n() const { return pairs.n(); }
};

SamplePair sample_pair(const ModelParams& model, RngStream& stream);

// n independent draws in order. Sample i is generated from stream.child(i),
// so the parallel and serial paths produce bit-identical datasets.
Dataset sample_dataset(const ModelParams& model, std::int64_t n, RngStream stream,
                       int threads = 0);
Dataset sample_dataset_serial(const ModelParams& model, std::int64_t n, RngStream stream);

// Extracts the rows listed in `rows` (ascending dataset order expected).
PairedData subset(const PairedData& data, const std::vector<std::int64_t>& rows);

}  // namespace filterlab
