#include <cmath>

#include <doctest.h>

#include "filterlab/metrics.hpp"
#include "filterlab/rng.hpp"

using namespace filterlab;

namespace {

// Encoders whose product has the prescribed singular factors u_hat, ut_hat
// (distinct positive spectrum pins the SVD up to signs).
Encoders encoders_from_factors(const Eigen::MatrixXd& u_hat,
                               const Eigen::MatrixXd& ut_hat) {
  const int r = static_cast<int>(u_hat.cols());
  Eigen::VectorXd spectrum(r);
  for (int i = 0; i < r; ++i) spectrum[i] = std::sqrt(double(r - i) + 1.0);
  Encoders enc;
  enc.g = spectrum.asDiagonal() * u_hat.transpose();
  enc.g_tilde = spectrum.asDiagonal() * ut_hat.transpose();
  enc.rho = 1.0;
  return enc;
}

}  // namespace

TEST_CASE("exact recovery scores zero on every metric") {
  const ModelParams m = make_model(0, 10, 8, 4, 1e4, 1e4, 0.5);
  Encoders enc{m.u.transpose(), m.u_tilde.transpose(), 1.0};
  const MetricReport rep = all_metrics(enc, m);
  CHECK(rep.err_ssd == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.err_ccd == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.err_def3 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.err_lpe == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_FALSE(rep.rank_deficient);
}

TEST_CASE("fully misaligned rows give the maximal chordal distance") {
  const ModelParams m = make_model(1, 10, 8, 4, 1e4, 1e4, 0.5);
  const Eigen::MatrixXd u_perp = complete_basis(m.u);
  Encoders enc{u_perp.leftCols(m.r).transpose(), m.u_tilde.transpose(), 1.0};
  CHECK(err_ssd(enc, m) == doctest::Approx(std::sqrt(double(m.r))).epsilon(1e-9));
}

TEST_CASE("shared rotation of both factors is invisible to every metric") {
  const ModelParams m = make_model(2, 10, 8, 4, 1e4, 1e4, 0.5);
  const Eigen::MatrixXd q = orthonormal_columns(m.r, m.r, RngStream(77));
  const Encoders enc = encoders_from_factors(m.u * q, m.u_tilde * q);
  CHECK(err_ssd(enc, m) < 1e-9);
  CHECK(err_ccd(enc, m) < 1e-9);
  CHECK(err_def3(enc, m) < 1e-9);
  CHECK(err_lpe(enc, m) < 1e-8);
}

TEST_CASE("one-sided rotation separates the metrics") {
  const ModelParams m = make_model(3, 10, 8, 4, 1e4, 1e4, 0.5);
  const Eigen::MatrixXd q = orthonormal_columns(m.r, m.r, RngStream(78));
  const Encoders enc = encoders_from_factors(m.u * q, m.u_tilde);
  CHECK(err_ssd(enc, m) < 1e-9);  // row spaces unchanged
  const double direct = (m.u * m.u_tilde.transpose() -
                         (m.u * q) * m.u_tilde.transpose())
                            .norm();
  CHECK(direct > 0.1);
  CHECK(err_ccd(enc, m) == doctest::Approx(direct).epsilon(1e-8));
  const double def3_direct = (q - Eigen::MatrixXd::Identity(m.r, m.r)).norm();
  CHECK(err_def3(enc, m) == doctest::Approx(def3_direct).epsilon(1e-8));
}

TEST_CASE("ccd and def3 match direct-formula oracles on random factors") {
  RngStream root(5);
  for (int t = 0; t < 20; ++t) {
    const ModelParams m = make_model(100 + t, 9, 7, 3, 1e3, 1e3, 0.5);
    const Eigen::MatrixXd u_hat = orthonormal_columns(m.d, m.r, root.child(2 * t));
    const Eigen::MatrixXd ut_hat =
        orthonormal_columns(m.d_tilde, m.r, root.child(2 * t + 1));
    const Encoders enc = encoders_from_factors(u_hat, ut_hat);
    // Direct formulas; the SVD inside the metric may flip matched sign pairs,
    // which leaves both expressions unchanged.
    const double ccd =
        (m.u * m.u_tilde.transpose() - u_hat * ut_hat.transpose()).norm();
    CHECK(err_ccd(enc, m) == doctest::Approx(ccd).epsilon(1e-8));
    const Eigen::MatrixXd mm = m.u.transpose() * u_hat * ut_hat.transpose() *
                                   m.u_tilde -
                               Eigen::MatrixXd::Identity(m.r, m.r);
    const double lpe = std::sqrt(mm.trace() * mm.trace() + (mm * mm).trace() +
                                 mm.squaredNorm());
    CHECK(err_lpe(enc, m) == doctest::Approx(lpe).epsilon(1e-8));
  }
}

TEST_CASE("annihilated signal hits the lpe corner value") {
  const ModelParams m = make_model(6, 12, 10, 3, 1e4, 1e4, 0.5);
  const Eigen::MatrixXd u_hat = complete_basis(m.u).leftCols(m.r);
  const Encoders enc = encoders_from_factors(u_hat, m.u_tilde);
  // M = -I: sqrt(r^2 + r + r)
  const double expect = std::sqrt(double(m.r) * m.r + 2.0 * m.r);
  CHECK(err_lpe(enc, m) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("lpe trace formula agrees with a Monte-Carlo evaluation") {
  const ModelParams m = make_model(8, 8, 6, 3, 1e4, 1e4, 0.5);
  const Eigen::MatrixXd u_hat = orthonormal_columns(m.d, m.r, RngStream(91));
  const Eigen::MatrixXd ut_hat = orthonormal_columns(m.d_tilde, m.r, RngStream(92));
  const Encoders enc = encoders_from_factors(u_hat, ut_hat);
  const double formula = err_lpe(enc, m);

  const Eigen::MatrixXd mm = m.u.transpose() * u_hat * ut_hat.transpose() *
                                 m.u_tilde -
                             Eigen::MatrixXd::Identity(m.r, m.r);
  RngStream s(93);
  const std::int64_t n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  Eigen::VectorXd z(m.r);
  for (std::int64_t i = 0; i < n; ++i) {
    s.fill_gaussian(z.data(), m.r);
    const double v = z.dot(mm * z);
    sum += v * v;
    sum_sq += v * v * v * v;
  }
  const double mc_mean = sum / double(n);
  const double mc_se =
      std::sqrt(std::max(0.0, sum_sq / double(n) - mc_mean * mc_mean) / double(n));
  CHECK(std::abs(formula * formula - mc_mean) <= 3.0 * mc_se);
}

TEST_CASE("rank-deficient encoders are flagged and inflated") {
  const ModelParams m = make_model(9, 10, 8, 4, 1e4, 1e4, 0.5);
  Encoders enc{m.u.transpose(), m.u_tilde.transpose(), 1.0};
  enc.g.row(3).setZero();  // drop one direction
  const MetricReport rep = all_metrics(enc, m);
  CHECK(rep.rank_deficient);
  CHECK(rep.err_ssd == doctest::Approx(1.0).epsilon(1e-6));  // sqrt(r - k) = 1
  CHECK(rep.err_ssd <= std::sqrt(double(m.r)));
}

TEST_CASE("err_ssd is invariant under left rotations") {
  const ModelParams m = make_model(10, 10, 8, 4, 1e4, 1e4, 0.5);
  const Dataset d = sample_dataset(m, 2000, RngStream(44));
  const Encoders enc = solve_closed_form(d.pairs, m.r, 1.0);
  const Eigen::MatrixXd q = orthonormal_columns(m.r, m.r, RngStream(45));
  Encoders rotated{q * enc.g, q * enc.g_tilde, enc.rho};
  CHECK(std::abs(err_ssd(enc, m) - err_ssd(rotated, m)) < 1e-10);
}
