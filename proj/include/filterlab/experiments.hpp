#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "filterlab/filtering.hpp"
#include "filterlab/metrics.hpp"
#include "filterlab/model.hpp"

namespace filterlab {

enum class Method { no_filter, oracle_filter, teacher_filter };
enum class ThetaPolicy { fixed_value, retention_fraction };
enum class MetricKind { ssd, ccd, def3, lpe };

std::string to_string(Method m);
std::string to_string(MetricKind m);
std::string to_string(ThetaPolicy p);
std::string to_string(CovMode m);
Method method_from_string(const std::string& s);
MetricKind metric_from_string(const std::string& s);
ThetaPolicy theta_policy_from_string(const std::string& s);
CovMode cov_mode_from_string(const std::string& s);

struct ExperimentConfig {
  int d = 10;
  int d_tilde = 8;
  int r = 4;
  double gamma = 1e4;
  double gamma_tilde = 1e4;
  std::int64_t n = 1000000;
  std::vector<double> eta_grid;
  std::vector<Method> methods;
  ThetaPolicy theta_policy = ThetaPolicy::fixed_value;
  std::vector<double> theta_values{0.0};  // thresholds, or retention fractions
  double rho = 1.0;
  double rho_teacher = 1.0;
  std::vector<std::uint64_t> seeds;  // trial seeds; default 0..19
  MetricKind metric = MetricKind::ssd;
  CovMode cov_mode = CovMode::centered;
  std::uint64_t master_seed = 0;
  int threads = 0;
};

void apply_defaults(ExperimentConfig& config);
void validate(const ExperimentConfig& config);

struct SweepRecord {
  double eta = 0.0;
  Method method = Method::no_filter;
  std::string theta_desc;
  std::uint64_t seed = 0;
  double err = 0.0;
  std::int64_t n_sel = 0;
  double wall_ms = 0.0;
  bool valid = true;    // sample-size guard satisfied at this eta
  bool failed = false;  // e.g. filtering starvation
  std::string failure;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
  bool r2_defined = true;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<SweepRecord> records;
  // Keyed "<method>|<theta_desc>|<regime>" with regime in {all, large_eta, small_eta}.
  std::map<std::string, SlopeFit> slope_fits;
};

// Ordinary least squares of log10(err) on log10(eta); needs >= 3 positive points.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

struct RegimeSplit {
  std::vector<double> large;
  std::vector<double> small;
  std::vector<double> buffer;  // within a factor of 2 of the boundary 1/r^2
};

RegimeSplit split_regimes(const std::vector<double>& eta_grid, int r);

// Sample-size guard: n >= (10 / eta^2) * max(d, d~) * (1+1/gamma)(1+1/gamma~).
bool eta_point_valid(const ExperimentConfig& config, double eta);

// One dataset per (eta, seed), shared by every configured method; grid points
// run concurrently and all randomness derives from (master_seed, seed,
// eta index), so results are schedule-independent.
SweepResult run_eta_sweep(const ExperimentConfig& config);

struct ThresholdSweepRow {
  double fraction = 0.0;
  double mean_err = 0.0;
  double std_err = 0.0;  // 1-sigma spread over seeds
  int n_ok = 0;
  int n_failed = 0;
};

// Teacher pipeline at a fixed eta over a grid of retention fractions.
std::vector<ThresholdSweepRow> run_threshold_sweep(const ExperimentConfig& config);

// No-filter sweep on the rank-1, noiseless-second-modality instance family.
SweepResult run_lower_bound_probe(const ExperimentConfig& config);

// The same sweep evaluated under all four error metrics.
std::map<MetricKind, SweepResult> run_metric_comparison(const ExperimentConfig& config);

// Per-eta medians over seeds for one (method, theta_desc) series; failed
// records are skipped. Used for slope fits and plot data.
std::vector<std::pair<double, double>> median_series(const SweepResult& result,
                                                     Method method,
                                                     const std::string& theta_desc,
                                                     bool valid_only);

double median(std::vector<double> values);

}  // namespace filterlab
