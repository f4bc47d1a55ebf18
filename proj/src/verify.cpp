#include "filterlab/verify.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "filterlab/experiments.hpp"
#include "filterlab/filtering.hpp"
#include "filterlab/linalg.hpp"
#include "filterlab/metrics.hpp"
#include "filterlab/model.hpp"
#include "filterlab/score_stats.hpp"

namespace filterlab {

namespace {

using Check = CheckResult (*)(std::uint64_t, int);

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

CheckResult check_orthonormality(std::uint64_t seed, int) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    for (auto [d, dt, r] : {std::tuple{10, 8, 4}, {50, 40, 8}, {1, 1, 1}}) {
      const ModelParams m = make_model(seed + s, d, dt, r, 1e4, 1e4, 0.5);
      const auto defect = [](const Eigen::MatrixXd& u) {
        return (u.transpose() * u -
                Eigen::MatrixXd::Identity(u.cols(), u.cols()))
            .cwiseAbs()
            .maxCoeff();
      };
      worst = std::max({worst, defect(m.u), defect(m.u_tilde)});
    }
  }
  return {"orthonormality", worst < 1e-10, "max defect " + fmt(worst)};
}

CheckResult check_determinism(std::uint64_t seed, int) {
  const ModelParams m1 = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const ModelParams m2 = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  bool ok = (m1.u - m2.u).cwiseAbs().maxCoeff() == 0.0;
  const Dataset a = sample_dataset(m1, 20000, RngStream(seed + 1));
  const Dataset b = sample_dataset(m1, 20000, RngStream(seed + 1));
  ok = ok && (a.pairs.x - b.pairs.x).cwiseAbs().maxCoeff() == 0.0;
  ok = ok && a.clean_flags == b.clean_flags;
  return {"determinism_same_seed", ok, ok ? "bit-identical" : "mismatch"};
}

CheckResult check_thread_invariance(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const Dataset d1 = sample_dataset(m, 50000, RngStream(seed + 1), 1);
  const Dataset d2 = sample_dataset(m, 50000, RngStream(seed + 1), 2);
  const Dataset d3 = sample_dataset_serial(m, 50000, RngStream(seed + 1));
  bool ok = (d1.pairs.x - d2.pairs.x).cwiseAbs().maxCoeff() == 0.0 &&
            (d1.pairs.x - d3.pairs.x).cwiseAbs().maxCoeff() == 0.0;
  const Eigen::MatrixXd c1 = cross_covariance(d1.pairs, CovMode::centered, 1);
  const Eigen::MatrixXd c2 = cross_covariance(d1.pairs, CovMode::centered, 2);
  const Eigen::MatrixXd c3 = cross_covariance_serial(d1.pairs, CovMode::centered);
  ok = ok && (c1 - c2).cwiseAbs().maxCoeff() == 0.0 &&
       (c1 - c3).cwiseAbs().maxCoeff() == 0.0;

  ExperimentConfig cfg;
  cfg.n = 20000;
  cfg.eta_grid = {1.0, 0.3};
  cfg.methods = {Method::no_filter, Method::teacher_filter};
  cfg.seeds = {0, 1};
  cfg.master_seed = seed;
  cfg.threads = 1;
  const SweepResult r1 = run_eta_sweep(cfg);
  cfg.threads = 2;
  const SweepResult r2 = run_eta_sweep(cfg);
  ok = ok && r1.records.size() == r2.records.size();
  if (ok) {
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
      const auto& a = r1.records[i];
      const auto& b = r2.records[i];
      // wall_ms is timing, everything else must match bit for bit
      if (!(a.eta == b.eta && a.method == b.method && a.theta_desc == b.theta_desc &&
            a.seed == b.seed && a.n_sel == b.n_sel && a.valid == b.valid &&
            a.failed == b.failed &&
            (a.err == b.err || (std::isnan(a.err) && std::isnan(b.err))))) {
        ok = false;
        break;
      }
    }
  }
  return {"thread_count_invariance", ok, ok ? "1/2-thread runs identical" : "mismatch"};
}

CheckResult check_clean_fraction(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const Dataset d = sample_dataset(m, 10000, RngStream(seed + 7));
  std::int64_t clean = 0;
  for (auto f : d.clean_flags) clean += f;
  const double expect = 0.3 * 10000;
  const double band = 4.0 * std::sqrt(10000 * 0.3 * 0.7);
  const bool ok = std::abs(clean - expect) <= band;
  return {"clean_fraction_concentration", ok,
          "count " + fmt(double(clean)) + " vs " + fmt(expect) + " +- " + fmt(band)};
}

CheckResult check_latent_correlation(std::uint64_t seed, int) {
  const double eta = 0.2;
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, eta);
  const std::int64_t n = 200000;
  const Dataset d = sample_dataset(m, n, RngStream(seed + 11));
  const Eigen::MatrixXd a = d.pairs.x * m.u;         // n x r
  const Eigen::MatrixXd b = d.pairs.x_tilde * m.u_tilde;
  const Eigen::MatrixXd est = (a.transpose() * b) / double(n);
  // per-entry standard error of the mean of a_i * b_j products
  double worst_z = 0.0;
  for (int i = 0; i < m.r; ++i) {
    for (int j = 0; j < m.r; ++j) {
      double mean = est(i, j);
      double ss = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        const double v = a(k, i) * b(k, j);
        ss += (v - mean) * (v - mean);
      }
      const double se = std::sqrt(ss / (double(n) - 1.0) / double(n));
      const double target = i == j ? eta : 0.0;
      worst_z = std::max(worst_z, std::abs(mean - target) / se);
    }
  }
  return {"latent_correlation_eta_identity", worst_z <= 5.0,
          "max |z| = " + fmt(worst_z) + " (<= 5)"};
}

CheckResult check_ambient_covariance(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const std::int64_t n = 100000;
  const Dataset d = sample_dataset(m, n, RngStream(seed + 13));
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.d, m.d);
  cov = (d.pairs.x.transpose() * d.pairs.x) / double(n);
  const Eigen::MatrixXd truth =
      m.u * m.u.transpose() +
      inv_or_zero(m.gamma) * Eigen::MatrixXd::Identity(m.d, m.d);
  const double err = (cov - truth).norm();
  const double tol = 5.0 * std::sqrt(double(m.d) / double(n));
  return {"ambient_covariance", err <= tol, fmt(err) + " <= " + fmt(tol)};
}

CheckResult check_sin_theta_oracle(std::uint64_t seed, int) {
  RngStream root(seed + 17);
  double worst = 0.0, worst_sym = 0.0, worst_rot = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int m = 5 + (t % 4);
    const int k = 1 + (t % 3);
    const Eigen::MatrixXd x = orthonormal_columns(m, k, root.child(2 * t));
    const Eigen::MatrixXd y = orthonormal_columns(m, k, root.child(2 * t + 1));
    const double dist = sin_theta_dist(x, y);
    // cosine-route oracle
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x.transpose() * y);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      const double c = std::min(1.0, svd.singularValues()[i]);
      const double theta = std::acos(c);
      acc += std::sin(theta) * std::sin(theta);
    }
    worst = std::max(worst, std::abs(dist - std::sqrt(acc)));
    worst_sym = std::max(worst_sym, std::abs(dist - sin_theta_dist(y, x)));
    const Eigen::MatrixXd q = orthonormal_columns(k, k, root.child(1000 + t));
    worst_rot = std::max(worst_rot, std::abs(dist - sin_theta_dist(x, y * q)));
  }
  const bool ok = worst < 1e-8 && worst_sym < 1e-8 && worst_rot < 1e-8;
  return {"sin_theta_oracle_equivalence", ok,
          "max dev " + fmt(worst) + ", sym " + fmt(worst_sym) + ", rot " + fmt(worst_rot)};
}

CheckResult check_wedin(std::uint64_t seed, int) {
  RngStream root(seed + 19);
  int violations = 0;
  for (int t = 0; t < 120; ++t) {
    RngStream s = root.child(t);
    const int m = 8, n = 6, r = 3;
    const Eigen::MatrixXd u = orthonormal_columns(m, r, s.child(0));
    const Eigen::MatrixXd v = orthonormal_columns(n, r, s.child(1));
    Eigen::VectorXd sv(r);
    RngStream s2 = s.child(2);
    for (int i = 0; i < r; ++i) sv[i] = 1.0 + s2.next_double();
    const Eigen::MatrixXd a = u * sv.asDiagonal() * v.transpose();
    Eigen::MatrixXd e(m, n);
    RngStream s3 = s.child(3);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) e(i, j) = s3.next_gaussian();
    const double sr = sv.minCoeff();
    e *= 0.25 * sr / e.operatorNorm();
    const Eigen::MatrixXd b = a + e;
    const double lhs = sin_theta_dist(truncated_svd(a, r).u, truncated_svd(b, r).u);
    const double rhs = e.norm() / (sr - e.operatorNorm());
    if (lhs > rhs + 1e-12) ++violations;
  }
  return {"wedin_consistency", violations == 0,
          fmt(double(violations)) + " violations in 120 trials"};
}

CheckResult check_weyl(std::uint64_t seed, int) {
  RngStream root(seed + 23);
  int violations = 0;
  for (int t = 0; t < 120; ++t) {
    RngStream s = root.child(t);
    const int m = 7, n = 5;
    Eigen::MatrixXd a(m, n), b(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        a(i, j) = s.next_gaussian();
        b(i, j) = a(i, j) + 0.3 * s.next_gaussian();
      }
    Eigen::JacobiSVD<Eigen::MatrixXd> sa(a), sb(b);
    const double gap = (a - b).operatorNorm();
    for (int j = 0; j < n; ++j) {
      if (std::abs(sa.singularValues()[j] - sb.singularValues()[j]) > gap + 1e-12)
        ++violations;
    }
  }
  return {"weyl_consistency", violations == 0,
          fmt(double(violations)) + " violations in 120 trials"};
}

CheckResult check_filter_monotonicity(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const Dataset d = sample_dataset(m, 5000, RngStream(seed + 29));
  const Eigen::MatrixXd a = m.u * m.u_tilde.transpose();
  bool ok = true;
  std::vector<std::int64_t> prev;
  for (double theta : {-1e9, -2.0, 0.0, 1.0, 3.0, 8.0}) {
    const auto sel = filter_dataset(d.pairs, a, theta).selected_indices;
    if (!prev.empty()) {
      ok = ok && std::includes(prev.begin(), prev.end(), sel.begin(), sel.end());
    }
    prev = sel;
  }
  // scale invariance of the selection set
  const auto s1 = filter_dataset(d.pairs, a, 0.7).selected_indices;
  const auto s2 = filter_dataset(d.pairs, 3.5 * a, 3.5 * 0.7).selected_indices;
  ok = ok && s1 == s2;
  return {"filter_monotonicity_and_scale", ok, ok ? "nested and scale-invariant" : "violated"};
}

CheckResult check_rho_invariance(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.5);
  const Dataset d = sample_dataset(m, 5000, RngStream(seed + 31));
  std::vector<Encoders> solutions;
  for (double rho : {0.1, 1.0, 10.0})
    solutions.push_back(solve_closed_form(d.pairs, m.r, rho));
  double worst = 0.0;
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    for (std::size_t j = i + 1; j < solutions.size(); ++j) {
      worst = std::max(worst, sin_theta_dist(row_space_basis(solutions[i].g),
                                             row_space_basis(solutions[j].g)));
      worst = std::max(worst, sin_theta_dist(row_space_basis(solutions[i].g_tilde),
                                             row_space_basis(solutions[j].g_tilde)));
    }
  }
  return {"rho_invariance_of_subspaces", worst < 1e-8, "max pairwise sin-theta " + fmt(worst)};
}

CheckResult check_loss_equivalence(std::uint64_t seed, int) {
  RngStream root(seed + 37);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    RngStream s = root.child(t);
    const ModelParams m = make_model(s.next_u64(), 3, 2, 1, 10.0, 10.0, 0.5);
    const Dataset d = sample_dataset(m, 6, RngStream(s.next_u64()));
    Encoders enc;
    enc.g.resize(1, 3);
    enc.g_tilde.resize(1, 2);
    for (int i = 0; i < 3; ++i) enc.g(0, i) = s.next_gaussian();
    for (int i = 0; i < 2; ++i) enc.g_tilde(0, i) = s.next_gaussian();
    enc.rho = 1.0;
    worst = std::max(worst, std::abs(loss(enc, d.pairs) - loss_pairwise(enc, d.pairs)));
  }
  return {"loss_two_route_equivalence", worst < 1e-10, "max gap " + fmt(worst)};
}

CheckResult check_metric_invariances(std::uint64_t seed, int) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.5);
  const Dataset d = sample_dataset(m, 4000, RngStream(seed + 41));
  const Encoders enc = solve_closed_form(d.pairs, m.r, 1.0);
  const Eigen::MatrixXd q = orthonormal_columns(m.r, m.r, RngStream(seed + 43));
  Encoders rotated = enc;
  rotated.g = q * enc.g;
  rotated.g_tilde = q * enc.g_tilde;
  const double gap_ssd = std::abs(err_ssd(enc, m) - err_ssd(rotated, m));
  const double gap_product = (enc.product() - rotated.product()).cwiseAbs().maxCoeff();
  const double gap_loss = std::abs(loss(enc, d.pairs) - loss(rotated, d.pairs));
  const double ssd = err_ssd(enc, m);
  const bool bounds = ssd >= 0.0 && ssd <= std::sqrt(double(m.r)) + 1e-12;
  const bool ok = gap_ssd < 1e-10 && gap_product < 1e-10 && gap_loss < 1e-10 && bounds;
  return {"metric_invariances", ok,
          "ssd gap " + fmt(gap_ssd) + ", product gap " + fmt(gap_product) +
              ", loss gap " + fmt(gap_loss)};
}

CheckResult check_mixture_identity(std::uint64_t seed, int threads) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const ScoreMoments mom = theory_moments(m);
  bool ok = true;
  double worst_z = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double theta = -2.0 + i * (double(m.r) + 4.0) / 9.0;
    const TailStats t = estimate_tail_stats(m, theta, 200000, seed + 100 + i, threads);
    const double combo = m.eta * t.p1 + (1.0 - m.eta) * t.p0;
    const double se = std::sqrt(t.se_p_mix * t.se_p_mix +
                                m.eta * m.eta * t.se_p1 * t.se_p1 +
                                (1 - m.eta) * (1 - m.eta) * t.se_p0 * t.se_p0);
    const double z = std::abs(t.p_mix - combo) / std::max(se, 1e-12);
    worst_z = std::max(worst_z, z);
    ok = ok && z <= 4.0;
  }
  (void)mom;
  return {"mixture_tail_identity", ok, "max |z| = " + fmt(worst_z) + " (<= 4)"};
}

CheckResult check_tail_monotonicity(std::uint64_t seed, int threads) {
  const ModelParams m = make_model(seed, 10, 8, 4, 1e4, 1e4, 0.3);
  const int n_theta = 5;
  const int n_seeds = 3;
  bool ok = true;
  // medians over seeds damp the Monte-Carlo noise
  std::vector<double> e0(n_theta), e1(n_theta), p0(n_theta), p1(n_theta);
  for (int i = 0; i < n_theta; ++i) {
    std::vector<double> ve0, ve1, vp0, vp1;
    const double theta = -1.0 + i * 1.25;
    for (int s = 0; s < n_seeds; ++s) {
      const TailStats t =
          estimate_tail_stats(m, theta, 200000, seed + 997 * s + i, threads);
      ve0.push_back(t.e0);
      ve1.push_back(t.e1);
      vp0.push_back(t.p0);
      vp1.push_back(t.p1);
    }
    e0[i] = median(ve0);
    e1[i] = median(ve1);
    p0[i] = median(vp0);
    p1[i] = median(vp1);
  }
  for (int i = 1; i < n_theta; ++i) {
    ok = ok && e0[i] >= e0[i - 1] - 0.05 && e1[i] >= e1[i - 1] - 0.05;
    ok = ok && p0[i] <= p0[i - 1] + 0.01 && p1[i] <= p1[i - 1] + 0.01;
  }
  return {"conditional_mean_monotonicity", ok,
          ok ? "E nondecreasing, P nonincreasing" : "violated"};
}

CheckResult check_teacher_convergence(std::uint64_t seed, int) {
  const double eta = 0.4;
  std::vector<double> medians;
  for (std::int64_t n_t : {1000L, 10000L, 100000L}) {
    std::vector<double> gaps;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const ModelParams m = make_model(derive_key(seed, s), 10, 8, 4, 1e4, 1e4, eta);
      const Dataset d =
          sample_dataset(m, n_t, RngStream(derive_key(seed + 1, s * 100 + n_t)));
      const Encoders teacher = solve_closed_form(d.pairs, m.r, 1.0);
      Eigen::MatrixXd mt = teacher.product();
      Eigen::MatrixXd mo = m.u * m.u_tilde.transpose();
      mt /= mt.operatorNorm();
      mo /= mo.operatorNorm();
      gaps.push_back((mt - mo).operatorNorm());
    }
    medians.push_back(median(gaps));
  }
  const bool ok = medians[1] < medians[0] && medians[2] < medians[1];
  return {"teacher_score_matrix_convergence", ok,
          fmt(medians[0]) + " > " + fmt(medians[1]) + " > " + fmt(medians[2])};
}

CheckResult check_score_moments(std::uint64_t seed, int threads) {
  RngStream root(seed + 47);
  bool exact_ok = true;
  for (int t = 0; t < 30; ++t) {
    RngStream s = root.child(t);
    const int r = 1 + int(s.next_u64() % 16);
    const double g = 0.5 + 100.0 * s.next_double();
    const double gt = 0.5 + 100.0 * s.next_double();
    ModelParams m;
    m.r = r;
    m.gamma = g;
    m.gamma_tilde = gt;
    const ScoreMoments mom = theory_moments(m);
    exact_ok = exact_ok && mom.var0 <= mom.var1 + 1e-12 &&
               mom.var1 <= 2.0 * mom.var0 + 1e-12;
  }
  // Monte-Carlo agreement on the Fig-2b-style configuration.
  const ModelParams m = make_model(seed, 20, 18, 16, 1e4, 1e4, 0.3);
  const ScoreMoments mom = theory_moments(m);
  const TailStats t = estimate_tail_stats(
      m, -std::numeric_limits<double>::infinity(), 200000, seed + 53, threads);
  const double z1 = std::abs(t.e1 - mom.mu1) / t.se_e1;
  const double z0 = std::abs(t.e0 - mom.mu0) / t.se_e0;
  const bool ok = exact_ok && z1 <= 4.0 && z0 <= 4.0;
  return {"score_moments", ok,
          "variance ordering ok; mean z-scores " + fmt(z0) + ", " + fmt(z1)};
}

CheckResult check_hanson_wright_envelope(std::uint64_t seed, int threads) {
  // Reported only: the absolute constant in the exponential envelope is not
  // pinned, so we fit the multiplier that makes the envelope cover the
  // observed clean-score tail frequencies.
  const ModelParams m = make_model(seed, 20, 18, 16, 1e4, 1e4, 0.3);
  const double gi = inv_or_zero(m.gamma);
  const double gti = inv_or_zero(m.gamma_tilde);
  const double scale = m.r * (1.0 + (1.0 + gi) * (1.0 + gti));
  std::vector<double> constants;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::int64_t n = 50000;
    RngStream root(derive_key(seed + 59, s));
    std::vector<double> scores(n);
    for (std::int64_t i = 0; i < n; ++i) {
      RngStream draw = root.child(static_cast<std::uint64_t>(i));
      Eigen::VectorXd z(m.r);
      draw.fill_gaussian(z.data(), m.r);
      Eigen::VectorXd za = z, zb = z;
      const double sg = std::sqrt(gi), sgt = std::sqrt(gti);
      for (int k = 0; k < m.r; ++k) za[k] += sg * draw.next_gaussian();
      for (int k = 0; k < m.r; ++k) zb[k] += sgt * draw.next_gaussian();
      scores[static_cast<std::size_t>(i)] = za.dot(zb);
    }
    double fitted = 0.0;
    for (double tval : {4.0, 8.0, 12.0, 16.0}) {
      std::int64_t exceed = 0;
      for (double v : scores)
        if (std::abs(v - m.r) > tval) ++exceed;
      const double emp = double(exceed) / double(n);
      const double envelope = std::exp(
          -std::min(2.0 * tval * tval / scale, std::numbers::sqrt2 * tval / std::sqrt(scale)));
      if (emp > 0.0) fitted = std::max(fitted, emp / envelope);
    }
    constants.push_back(fitted);
  }
  CheckResult res{"hanson_wright_envelope", true,
                  "fitted envelope multiplier (median over 20 seeds): " +
                      fmt(median(constants))};
  res.report_only = true;
  return res;
}

}  // namespace

VerifyReport run_verification(std::uint64_t seed, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyReport report;
  const Check checks[] = {
      check_orthonormality,     check_determinism,
      check_thread_invariance,  check_clean_fraction,
      check_latent_correlation, check_ambient_covariance,
      check_sin_theta_oracle,   check_wedin,
      check_weyl,               check_filter_monotonicity,
      check_rho_invariance,     check_loss_equivalence,
      check_metric_invariances, check_mixture_identity,
      check_tail_monotonicity,  check_teacher_convergence,
      check_score_moments,      check_hanson_wright_envelope,
  };
  for (Check c : checks) {
    CheckResult r = c(seed, threads);
    report.all_pass = report.all_pass && (r.pass || r.report_only);
    report.checks.push_back(std::move(r));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace filterlab
