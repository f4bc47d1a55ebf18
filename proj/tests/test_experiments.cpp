#include <cmath>
#include <limits>

#include <doctest.h>

#include "filterlab/experiments.hpp"

using namespace filterlab;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 4;
  c.gamma = 1e4;
  c.gamma_tilde = 1e4;
  c.n = 20000;
  c.eta_grid = {1.0, 0.3, 0.1};
  c.methods = {Method::no_filter, Method::teacher_filter};
  c.theta_values = {0.0};
  c.seeds = {0, 1, 2};
  return c;
}
}  // namespace

TEST_CASE("slope fitting on exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double eta : {1.0, 0.5, 0.25, 0.125, 0.0625}) pts.emplace_back(eta, 1.0 / eta);
  SlopeFit fit = fit_loglog_slope(pts);
  CHECK(std::abs(fit.slope + 1.0) < 1e-10);
  CHECK(fit.r2_defined);
  CHECK(fit.r_squared == doctest::Approx(1.0));

  pts.clear();
  for (double eta : {1.0, 0.5, 0.25, 0.125}) pts.emplace_back(eta, 1.0 / std::sqrt(eta));
  CHECK(std::abs(fit_loglog_slope(pts).slope + 0.5) < 1e-10);

  pts.clear();
  for (double eta : {1.0, 0.5, 0.25}) pts.emplace_back(eta, 3.0);
  fit = fit_loglog_slope(pts);
  CHECK(std::abs(fit.slope) < 1e-10);
  CHECK_FALSE(fit.r2_defined);

  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {0.5, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {0.5, 2.0}, {0.25, -1.0}}),
                  std::invalid_argument);
}

TEST_CASE("regime split applies the factor-2 buffer around 1/r^2") {
  const RegimeSplit s = split_regimes({1.0, 0.1, 0.01}, 4);
  // boundary 0.0625: large needs eta > 0.125, small needs eta < 0.03125
  CHECK(s.large == std::vector<double>{1.0});
  CHECK(s.buffer == std::vector<double>{0.1});
  CHECK(s.small == std::vector<double>{0.01});

  const RegimeSplit r1 = split_regimes({1.0, 0.4, 0.05}, 1);
  CHECK(r1.large.empty());
  CHECK(r1.small == std::vector<double>{0.4, 0.05});
  CHECK(r1.buffer == std::vector<double>{1.0});
}

TEST_CASE("validity guard matches the sample-size rule") {
  ExperimentConfig c = small_config();
  c.n = 1000000;
  // eta threshold = sqrt(10 * 10 * (1+1e-4)^2 / 1e6) ~ 0.0100005
  CHECK(eta_point_valid(c, 0.02));
  CHECK_FALSE(eta_point_valid(c, 0.009));
}

TEST_CASE("the sweep covers the grid and is schedule-independent") {
  ExperimentConfig c = small_config();
  c.threads = 1;
  const SweepResult r1 = run_eta_sweep(c);
  c.threads = 2;
  const SweepResult r2 = run_eta_sweep(c);
  // 3 etas x 3 seeds x (no_filter + teacher@0) records
  CHECK(r1.records.size() == 18);
  REQUIRE(r1.records.size() == r2.records.size());
  for (std::size_t i = 0; i < r1.records.size(); ++i) {
    CHECK(r1.records[i].err == r2.records[i].err);
    CHECK(r1.records[i].n_sel == r2.records[i].n_sel);
    CHECK(r1.records[i].seed == r2.records[i].seed);
  }
}

TEST_CASE("every grid point appears exactly once per entry") {
  ExperimentConfig c = small_config();
  const SweepResult res = run_eta_sweep(c);
  for (double eta : c.eta_grid) {
    for (std::uint64_t seed : c.seeds) {
      int n_nf = 0, n_tf = 0;
      for (const auto& rec : res.records) {
        if (rec.eta == eta && rec.seed == seed) {
          if (rec.method == Method::no_filter) ++n_nf;
          if (rec.method == Method::teacher_filter) ++n_tf;
        }
      }
      CHECK(n_nf == 1);
      CHECK(n_tf == 1);
    }
  }
}

TEST_CASE("noise-free fully clean point is solved to numerical zero") {
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 4;
  c.gamma = kInf;
  c.gamma_tilde = kInf;
  c.n = 5000;
  c.eta_grid = {1.0};
  c.methods = {Method::no_filter};
  c.seeds = {0};
  const SweepResult res = run_eta_sweep(c);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].err < 1e-6);
}

TEST_CASE("empty eta grid is rejected") {
  ExperimentConfig c = small_config();
  c.eta_grid.clear();
  CHECK_THROWS_AS(run_eta_sweep(c), std::invalid_argument);
}

TEST_CASE("duplicate seeds are rejected") {
  ExperimentConfig c = small_config();
  c.seeds = {0, 0};
  CHECK_THROWS_AS(run_eta_sweep(c), std::invalid_argument);
}

TEST_CASE("threshold sweep: full retention equals no filtering on the pool") {
  ExperimentConfig c = small_config();
  c.eta_grid = {0.3};
  c.n = 4000;
  c.theta_policy = ThetaPolicy::retention_fraction;
  c.theta_values = {1.0, 0.5};
  c.seeds = {0, 1, 2, 3};
  const auto rows = run_threshold_sweep(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fraction == 1.0);
  CHECK(rows[0].n_ok == 4);

  // cross-check one seed by hand
  const std::uint64_t trial_key = derive_key(c.master_seed, 0);
  const ModelParams model = make_model(derive_key(trial_key, 0x4D4F44ULL), c.d,
                                       c.d_tilde, c.r, c.gamma, c.gamma_tilde, 0.3);
  const std::uint64_t data_key = derive_key(derive_key(trial_key, 0x444154ULL), 0);
  const Dataset data = sample_dataset(model, c.n, RngStream(data_key));
  PairedData pool;
  pool.x = data.pairs.x.bottomRows(2000);
  pool.x_tilde = data.pairs.x_tilde.bottomRows(2000);
  const Encoders direct = run_no_filter(pool, c.r, c.rho);
  const double expect = err_ssd(direct, model);
  bool found = false;
  const SweepResult raw = [&] {
    ExperimentConfig cc = c;
    cc.methods = {Method::teacher_filter};
    return run_eta_sweep(cc);
  }();
  for (const auto& rec : raw.records) {
    if (rec.seed == 0 && rec.theta_desc == "retention=1") {
      CHECK(rec.err == doctest::Approx(expect).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("threshold sweep records starvation instead of aborting") {
  ExperimentConfig c = small_config();
  c.eta_grid = {0.3};
  c.n = 40;  // pool of 20; 1% retention keeps 1 < r + 1
  c.theta_policy = ThetaPolicy::retention_fraction;
  c.theta_values = {0.01};
  c.seeds = {0, 1};
  const auto rows = run_threshold_sweep(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_failed == 2);
  CHECK(rows[0].n_ok == 0);
}

TEST_CASE("lower-bound probe validates its instance family") {
  ExperimentConfig c;
  c.d = 10;
  c.d_tilde = 8;
  c.r = 1;
  c.gamma = 100.0;
  c.gamma_tilde = kInf;
  c.n = 20000;
  c.eta_grid = {1.0, 0.5, 0.25};
  c.seeds = {0, 1};
  CHECK_NOTHROW(run_lower_bound_probe(c));

  ExperimentConfig bad = c;
  bad.r = 2;
  CHECK_THROWS_AS(run_lower_bound_probe(bad), std::invalid_argument);
  bad = c;
  bad.gamma_tilde = 100.0;
  CHECK_THROWS_AS(run_lower_bound_probe(bad), std::invalid_argument);
  bad = c;
  bad.gamma = kInf;
  CHECK_THROWS_AS(run_lower_bound_probe(bad), std::invalid_argument);
}

TEST_CASE("metric comparison shares pipeline outputs across metrics") {
  ExperimentConfig c = small_config();
  c.n = 4000;
  c.eta_grid = {1.0, 0.5};
  c.seeds = {0, 1};
  const auto results = run_metric_comparison(c);
  REQUIRE(results.size() == 4);
  const auto& ssd = results.at(MetricKind::ssd);
  const auto& lpe = results.at(MetricKind::lpe);
  REQUIRE(ssd.records.size() == lpe.records.size());
  for (std::size_t i = 0; i < ssd.records.size(); ++i) {
    CHECK(ssd.records[i].eta == lpe.records[i].eta);
    CHECK(ssd.records[i].err >= 0.0);
    CHECK(lpe.records[i].err >= 0.0);
  }
}

TEST_CASE("median helper") {
  CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
  CHECK(std::isnan(median({})));
}
