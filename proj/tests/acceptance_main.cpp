// Acceptance suite: runs the headline experiments end to end and prints one
// pass/fail line per criterion. Stated runtime budgets assume 8 cores; they
// are rescaled when fewer workers are available.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <omp.h>

#include "filterlab/cli_io.hpp"
#include "filterlab/experiments.hpp"
#include "filterlab/score_stats.hpp"
#include "filterlab/verify.hpp"
#include "support/gradient_descent.hpp"

using namespace filterlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Criterion {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_results.push_back({id, name, pass, detail});
  std::printf("[%s] criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Budgets are stated for 8 cores.
double scaled_budget(double budget_seconds) {
  const double workers = std::max(1, omp_get_max_threads());
  return budget_seconds * std::max(1.0, 8.0 / workers);
}

std::vector<double> geometric_grid(double hi, double lo, int points) {
  std::vector<double> grid;
  for (int i = 0; i < points; ++i)
    grid.push_back(hi * std::pow(lo / hi, double(i) / double(points - 1)));
  return grid;
}

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 4;
  c.gamma = 1e4;
  c.gamma_tilde = 1e4;
  c.n = 1000000;
  c.eta_grid = geometric_grid(1.0, 0.004, 8);
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(s);
  return c;
}

// ---------------------------------------------------------------- criteria 1+2

void criteria_1_and_2() {
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig fixed = desk_config();
  fixed.methods = {Method::no_filter, Method::teacher_filter};
  fixed.theta_policy = ThetaPolicy::fixed_value;
  fixed.theta_values = {0.0};
  const SweepResult sweep = run_eta_sweep(fixed);

  ExperimentConfig retention = desk_config();
  retention.methods = {Method::teacher_filter};
  retention.theta_policy = ThetaPolicy::retention_fraction;
  retention.theta_values = {0.1, 0.3, 0.5};
  const SweepResult retention_sweep = run_eta_sweep(retention);

  const double wall = seconds_since(t0);
  const double budget = scaled_budget(600.0);

  // Criterion 1: no-filter slope over the guard-valid points.
  {
    const auto series = median_series(sweep, Method::no_filter, "-", true);
    bool pass = false;
    std::string detail;
    if (series.size() >= 3) {
      const SlopeFit fit = fit_loglog_slope(series);
      pass = fit.slope >= -1.2 && fit.slope <= -0.8 && wall <= budget;
      detail = "slope " + fmt(fit.slope) + " over " + std::to_string(series.size()) +
               " valid points, target [-1.2,-0.8]; sweep wall " + fmt(wall) +
               "s <= " + fmt(budget) + "s";
    } else {
      detail = "too few valid points";
    }
    record(1, "no-filter eta slope", pass, detail);
  }

  // Criterion 2: teacher regimes plus the per-eta ordering.
  {
    const RegimeSplit regimes = split_regimes(fixed.eta_grid, fixed.r);
    // Small-eta regime at theta = 0. The guard constant of the filtered
    // pipeline's own sample-size condition is not pinned by the no-filter
    // guard, so the fit uses every small-regime grid point.
    const auto theta0 = median_series(sweep, Method::teacher_filter, "theta=0", false);
    std::vector<std::pair<double, double>> small_pts;
    for (const auto& p : theta0) {
      if (std::find(regimes.small.begin(), regimes.small.end(), p.first) !=
          regimes.small.end())
        small_pts.push_back(p);
    }
    bool small_ok = false;
    std::string small_detail = "too few small-regime points";
    if (small_pts.size() >= 3) {
      const SlopeFit fit = fit_loglog_slope(small_pts);
      small_ok = fit.slope >= -0.25 && fit.slope <= 0.25;
      small_detail = "small-eta slope " + fmt(fit.slope) + " over " +
                     std::to_string(small_pts.size()) + " points, target [-0.25,0.25]";
      // Context: the flat window measured on the three smallest guard-valid
      // points, where the filtered estimator's own sample-size condition holds.
      std::vector<std::pair<double, double>> plateau;
      for (const auto& p : theta0) {
        if (eta_point_valid(fixed, p.first)) plateau.push_back(p);
      }
      if (plateau.size() > 3)
        plateau.erase(plateau.begin(), plateau.end() - 3);
      if (plateau.size() == 3) {
        small_detail += " (in-validity plateau slope " +
                        fmt(fit_loglog_slope(plateau).slope) + ")";
      }
    }

    // Large-eta regime with the per-eta best retention of {10%, 30%, 50%}.
    std::vector<std::pair<double, double>> best_series;
    for (double eta : retention.eta_grid) {
      double best = kInf;
      for (const char* desc : {"retention=0.1", "retention=0.3", "retention=0.5"}) {
        for (const auto& p :
             median_series(retention_sweep, Method::teacher_filter, desc, true)) {
          if (p.first == eta) best = std::min(best, p.second);
        }
      }
      if (std::isfinite(best)) best_series.emplace_back(eta, best);
    }
    std::vector<std::pair<double, double>> large_pts;
    for (const auto& p : best_series) {
      if (std::find(regimes.large.begin(), regimes.large.end(), p.first) !=
          regimes.large.end())
        large_pts.push_back(p);
    }
    bool large_ok = false;
    std::string large_detail = "too few large-regime points";
    if (large_pts.size() >= 3) {
      const SlopeFit fit = fit_loglog_slope(large_pts);
      large_ok = fit.slope >= -0.75 && fit.slope <= -0.3;
      large_detail = "large-eta best-retention slope " + fmt(fit.slope) +
                     ", target [-0.75,-0.3]";
    }

    // Teacher at theta = 0 strictly below no filtering for valid eta <= 0.1.
    bool order_ok = true;
    std::string order_detail = "teacher(theta=0) < no-filter at eta in {";
    const auto nf = median_series(sweep, Method::no_filter, "-", true);
    for (const auto& p : nf) {
      if (p.first > 0.1) continue;
      double teacher = kInf;
      for (const auto& q : theta0)
        if (q.first == p.first) teacher = q.second;
      order_ok = order_ok && teacher < p.second;
      order_detail += fmt(p.first) + " ";
    }
    order_detail += "}";

    record(2, "teacher-filter regimes",
           small_ok && large_ok && order_ok,
           small_detail + "; " + large_detail + "; " + order_detail +
               (order_ok ? " ok" : " violated"));
  }
}

// ------------------------------------------------------------------ criterion 3

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 4;
  c.gamma = 1e4;
  c.gamma_tilde = 1e4;
  // Each training stage (teacher half, filtered pool) sees 10000 samples,
  // matching the protocol behind the reference table; the train-filter-train
  // split therefore runs on 20000 total.
  c.n = 20000;
  c.eta_grid = {0.3};
  c.theta_policy = ThetaPolicy::retention_fraction;
  c.theta_values = {0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0};
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 50; ++s) c.seeds.push_back(s);
  const auto rows = run_threshold_sweep(c);
  const double wall = seconds_since(t0);
  const double budget = scaled_budget(120.0);

  // Reference table (x 1e-4): mean +- 1 sigma.
  const double ref_mean[] = {28.76, 11.79, 9.85, 9.08, 8.97, 8.71, 16.51};
  const double ref_sigma[] = {4.00, 1.20, 1.39, 1.15, 1.09, 1.05, 2.03};
  bool pass = rows.size() == 7 && wall <= budget;
  std::string detail;
  for (std::size_t i = 0; i < rows.size() && pass; ++i) {
    const double mean_e4 = rows[i].mean_err * 1e4;
    if (std::abs(mean_e4 - ref_mean[i]) > 3.0 * ref_sigma[i]) {
      pass = false;
      detail = "fraction " + fmt(rows[i].fraction) + ": mean " + fmt(mean_e4) +
               "e-4 outside " + fmt(ref_mean[i]) + " +- 3*" + fmt(ref_sigma[i]);
    }
  }
  if (pass) {
    const double err1 = rows[0].mean_err;    // 1%
    const double err100 = rows[6].mean_err;  // 100%
    const double mid =
        std::min({rows[3].mean_err, rows[4].mean_err, rows[5].mean_err});
    const bool order = err1 > err100 && err100 > mid;
    pass = order;
    detail = "means(e-4):";
    for (const auto& row : rows) detail += " " + fmt(row.mean_err * 1e4);
    detail += order ? "; ordering 1% > 100% > 30-50% ok" : "; ordering violated";
    detail += "; wall " + fmt(wall) + "s <= " + fmt(budget) + "s";
  }
  record(3, "threshold-sensitivity table", pass, detail);
}

// ------------------------------------------------------------------ criterion 4

void criterion_4() {
  const double eta = 0.3;
  const ModelParams m = make_model(424242, 20, 18, 16, 1e4, 1e4, eta);
  const std::int64_t n = 50000;
  const Dataset d = sample_dataset(m, n, RngStream(31337));
  const Eigen::MatrixXd a = m.u * m.u_tilde.transpose();
  const ScoreMoments mom = theory_moments(m);

  std::vector<double> clean, corrupt;
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = d.pairs.x.row(i).dot(a * d.pairs.x_tilde.row(i).transpose());
    (d.clean_flags[std::size_t(i)] ? clean : corrupt).push_back(s);
  }
  const auto moments = [](const std::vector<double>& v) {
    double m1 = 0;
    for (double x : v) m1 += x;
    m1 /= v.size();
    double m2 = 0, m4 = 0;
    for (double x : v) {
      const double c = x - m1;
      m2 += c * c;
      m4 += c * c * c * c;
    }
    m2 /= v.size();
    m4 /= v.size();
    return std::tuple{m1, m2, m4};
  };
  const auto [mean1, var1, m4_1] = moments(clean);
  const auto [mean0, var0, m4_0] = moments(corrupt);
  const double se_mean1 = std::sqrt(var1 / clean.size());
  const double se_mean0 = std::sqrt(var0 / corrupt.size());
  const double se_var1 = std::sqrt(std::max(0.0, m4_1 - var1 * var1) / clean.size());
  const double se_var0 = std::sqrt(std::max(0.0, m4_0 - var0 * var0) / corrupt.size());

  bool pass = std::abs(mean1 - mom.mu1) <= 4 * se_mean1 &&
              std::abs(mean0 - mom.mu0) <= 4 * se_mean0 &&
              std::abs(var1 - mom.var1) <= 4 * se_var1 &&
              std::abs(var0 - mom.var0) <= 4 * se_var0;
  std::string detail = "clean mean " + fmt(mean1) + " (theory " + fmt(mom.mu1) +
                       "), var " + fmt(var1) + " (theory " + fmt(mom.var1) +
                       "); corrupt mean " + fmt(mean0) + ", var " + fmt(var0);

  // Mixture tail identity on a 10-point grid.
  double worst_z = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double theta = -8.0 + i * (28.0 / 9.0);
    const TailStats t = estimate_tail_stats(m, theta, 300000, 5000 + i);
    const double combo = eta * t.p1 + (1 - eta) * t.p0;
    const double se = std::sqrt(t.se_p_mix * t.se_p_mix + eta * eta * t.se_p1 * t.se_p1 +
                                (1 - eta) * (1 - eta) * t.se_p0 * t.se_p0);
    worst_z = std::max(worst_z, std::abs(t.p_mix - combo) / std::max(se, 1e-12));
  }
  pass = pass && worst_z <= 4.0;
  detail += "; mixture identity max |z| " + fmt(worst_z) + " (<= 4)";
  record(4, "score-distribution moments", pass, detail);
}

// ------------------------------------------------------------------ criterion 5

void criterion_5() {
  const double eta = 0.3;
  const ModelParams m = make_model(777, 10, 8, 4, 1e4, 1e4, eta);
  bool pass = true;
  std::string detail;
  for (double theta : {0.0, double(m.r) / 2.0}) {
    // Draw enough to clear 1e5 conditioning hits at both thresholds.
    const std::int64_t mc_n = theta == 0.0 ? 200000 : 400000;
    const ConditionalCrossCov cc = conditional_cross_cov(m, theta, mc_n, 900 + int(theta));
    const double bound =
        eta * f1_lower_bound(m, theta) + (1 - eta) * f0_lower_bound(m, theta);
    const bool hits_ok = cc.hits >= 100000;
    const bool off_ok = cc.off_mass_debiased <= 4.0 * cc.off_mass_se;
    const bool diag_ok = cc.diag_anisotropy <= 0.05;
    const bool scalar_ok = cc.scalar_estimate >= bound - 4.0 * cc.scalar_se;
    pass = pass && hits_ok && off_ok && diag_ok && scalar_ok;
    detail += "theta=" + fmt(theta) + ": hits " + std::to_string(cc.hits) +
              ", off-mass(debiased) " + fmt(cc.off_mass_debiased) + " <= 4*" +
              fmt(cc.off_mass_se) + (off_ok ? " ok" : " FAIL") + ", anisotropy " +
              fmt(cc.diag_anisotropy) + (diag_ok ? " ok" : " FAIL") + ", scalar " +
              fmt(cc.scalar_estimate) + " >= " + fmt(bound) + " - 4se" +
              (scalar_ok ? " ok" : " FAIL") + "; ";
  }
  record(5, "conditional cross-covariance structure", pass, detail);
}

// ------------------------------------------------------------------ criterion 6

void criterion_6() {
  bool pass = true;
  double worst_gap = 0.0;
  int candidate_losses = 0;
  for (int t = 0; t < 20 && pass; ++t) {
    RngStream s(derive_key(606060, t));
    const ModelParams m =
        make_model(s.next_u64(), 3, 2, 1, 100.0, 100.0, 0.3 + 0.6 * s.next_double());
    const Dataset d = sample_dataset(m, 50, RngStream(s.next_u64()));
    const Encoders closed = solve_closed_form(d.pairs, 1, 1.0);
    const auto gd = testing::gradient_descent_solve(d.pairs, 1, 1.0,
                                                    RngStream(s.next_u64()));
    const double gap = (gd.encoders.product() - closed.product()).norm();
    worst_gap = std::max(worst_gap, gap);
    pass = pass && gd.converged && gap < 1e-3;

    const double base = loss(closed, d.pairs);
    RngStream cs(s.next_u64());
    for (int k = 0; k < 100; ++k) {
      Encoders cand;
      cand.g.resize(1, 3);
      cand.g_tilde.resize(1, 2);
      const double scale = std::exp(cs.next_gaussian());
      for (int i = 0; i < 3; ++i) cand.g(0, i) = scale * cs.next_gaussian();
      for (int i = 0; i < 2; ++i) cand.g_tilde(0, i) = scale * cs.next_gaussian();
      cand.rho = 1.0;
      if (base <= loss(cand, d.pairs) + 1e-12) ++candidate_losses;
      pass = pass && base <= loss(cand, d.pairs) + 1e-12;
    }
  }
  record(6, "closed-form optimality", pass,
         "max |gd - closed| " + fmt(worst_gap) + " (< 1e-3); closed form beat " +
             std::to_string(candidate_losses) + "/2000 random candidates");
}

// ------------------------------------------------------------------ criterion 7

void criterion_7() {
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 1;
  c.gamma = 100.0;
  c.gamma_tilde = kInf;
  c.n = 1000000;
  c.eta_grid = geometric_grid(1.0, 0.02, 6);
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(s);
  const SweepResult probe = run_lower_bound_probe(c);
  const auto series = median_series(probe, Method::no_filter, "-", true);
  bool slope_ok = false;
  double slope = 0;
  if (series.size() >= 3) {
    slope = fit_loglog_slope(series).slope;
    slope_ok = slope >= -1.2 && slope <= -0.8;
  }

  // n-doubling at eta = 1: the 2n dataset extends the n dataset sample for
  // sample, so the ratio is a paired comparison.
  ExperimentConfig half = c;
  half.eta_grid = {1.0};
  ExperimentConfig full = half;
  full.n = 2000000;
  const SweepResult r_half = run_lower_bound_probe(half);
  const SweepResult r_full = run_lower_bound_probe(full);
  std::vector<double> ratios;
  for (const auto& a : r_half.records) {
    for (const auto& b : r_full.records) {
      if (a.seed == b.seed) ratios.push_back(b.err / a.err);
    }
  }
  const double med_ratio = median(ratios);
  const bool ratio_ok = med_ratio >= 0.62 && med_ratio <= 0.80;
  record(7, "lower-bound probe", slope_ok && ratio_ok,
         "slope " + fmt(slope) + " in [-1.2,-0.8]; n-doubling median ratio " +
             fmt(med_ratio) + " in [0.62,0.80]");
}

// ------------------------------------------------------------------ criterion 8

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  const VerifyReport report = run_verification(2026, 0);
  const double wall = seconds_since(t0);
  const double budget = scaled_budget(300.0);
  int failed = 0;
  std::string names;
  for (const auto& c : report.checks) {
    if (!c.pass && !c.report_only) {
      ++failed;
      names += " " + c.name;
    }
  }
  const bool pass = report.all_pass && wall <= budget;
  record(8, "property suites", pass,
         std::to_string(report.checks.size()) + " checks, " + std::to_string(failed) +
             " failed" + names + "; wall " + fmt(wall) + "s <= " + fmt(budget) + "s");
}

}  // namespace

int main() {
  std::printf("acceptance suite (%d threads)\n", omp_get_max_threads());
  const auto t0 = std::chrono::steady_clock::now();
  criteria_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  int failures = 0;
  for (const auto& c : g_results) failures += c.pass ? 0 : 1;
  std::printf("%d/%d criteria passed (total wall %.1fs)\n",
              int(g_results.size()) - failures, int(g_results.size()),
              seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
