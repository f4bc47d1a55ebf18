#include "filterlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "filterlab/parallel.hpp"

namespace filterlab {

namespace {

constexpr std::uint64_t kPurposeModel = 0x4D4F44ULL;    // per-trial instance
constexpr std::uint64_t kPurposeDataset = 0x444154ULL;  // per-(trial, eta) data

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::no_filter: return "no_filter";
    case Method::oracle_filter: return "oracle_filter";
    case Method::teacher_filter: return "teacher_filter";
  }
  return "?";
}

std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::ssd: return "ssd";
    case MetricKind::ccd: return "ccd";
    case MetricKind::def3: return "def3";
    case MetricKind::lpe: return "lpe";
  }
  return "?";
}

std::string to_string(ThetaPolicy p) {
  return p == ThetaPolicy::fixed_value ? "fixed_value" : "retention_fraction";
}

std::string to_string(CovMode m) {
  return m == CovMode::centered ? "centered" : "uncentered";
}

Method method_from_string(const std::string& s) {
  if (s == "no_filter") return Method::no_filter;
  if (s == "oracle_filter") return Method::oracle_filter;
  if (s == "teacher_filter") return Method::teacher_filter;
  throw std::invalid_argument("unknown method: " + s);
}

MetricKind metric_from_string(const std::string& s) {
  if (s == "ssd") return MetricKind::ssd;
  if (s == "ccd") return MetricKind::ccd;
  if (s == "def3") return MetricKind::def3;
  if (s == "lpe") return MetricKind::lpe;
  throw std::invalid_argument("unknown metric: " + s);
}

ThetaPolicy theta_policy_from_string(const std::string& s) {
  if (s == "fixed_value") return ThetaPolicy::fixed_value;
  if (s == "retention_fraction") return ThetaPolicy::retention_fraction;
  throw std::invalid_argument("unknown theta_policy: " + s);
}

CovMode cov_mode_from_string(const std::string& s) {
  if (s == "centered") return CovMode::centered;
  if (s == "uncentered") return CovMode::uncentered;
  throw std::invalid_argument("unknown cov_mode: " + s);
}

void apply_defaults(ExperimentConfig& config) {
  if (config.seeds.empty()) {
    for (std::uint64_t s = 0; s < 20; ++s) config.seeds.push_back(s);
  }
  if (config.methods.empty()) config.methods = {Method::no_filter};
  if (config.theta_values.empty()) config.theta_values = {0.0};
  std::sort(config.eta_grid.begin(), config.eta_grid.end(), std::greater<double>());
}

void validate(const ExperimentConfig& config) {
  if (config.d < 1 || config.d_tilde < 1)
    throw std::invalid_argument("config: d and d_tilde must be positive");
  if (config.r < 1 || config.r > std::min(config.d, config.d_tilde))
    throw std::invalid_argument("config: need 1 <= r <= min(d, d_tilde)");
  if (!(config.gamma > 0.0) || !(config.gamma_tilde > 0.0))
    throw std::invalid_argument("config: gamma and gamma_tilde must be positive");
  if (config.n < 1) throw std::invalid_argument("config: n must be >= 1");
  if (config.eta_grid.empty()) throw std::invalid_argument("config: eta_grid is empty");
  for (double eta : config.eta_grid) {
    if (!(eta > 0.0 && eta <= 1.0))
      throw std::invalid_argument("config: eta_grid values must lie in (0, 1]");
  }
  if (config.methods.empty()) throw std::invalid_argument("config: methods is empty");
  if (!(config.rho > 0.0) || !(config.rho_teacher > 0.0))
    throw std::invalid_argument("config: rho and rho_teacher must be > 0");
  if (config.seeds.empty()) throw std::invalid_argument("config: seeds is empty");
  std::set<std::uint64_t> uniq(config.seeds.begin(), config.seeds.end());
  if (uniq.size() != config.seeds.size())
    throw std::invalid_argument("config: seeds must be distinct");
  if (config.theta_policy == ThetaPolicy::retention_fraction) {
    for (double f : config.theta_values) {
      if (!(f > 0.0 && f <= 1.0))
        throw std::invalid_argument("config: retention fractions must lie in (0, 1]");
    }
  }
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_loglog_slope: need at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [eta, err] : points) {
    if (!(eta > 0.0) || !(err > 0.0))
      throw std::invalid_argument("fit_loglog_slope: values must be positive");
    const double x = std::log10(eta);
    const double y = std::log10(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double n = static_cast<double>(points.size());
  const double vxx = sxx - sx * sx / n;
  const double vxy = sxy - sx * sy / n;
  const double vyy = syy - sy * sy / n;
  if (vxx <= 0.0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissa");
  SlopeFit fit;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.n_points = static_cast<int>(points.size());
  if (vyy <= 0.0) {
    fit.r_squared = std::numeric_limits<double>::quiet_NaN();
    fit.r2_defined = false;
  } else {
    fit.r_squared = (vxy * vxy) / (vxx * vyy);
  }
  return fit;
}

RegimeSplit split_regimes(const std::vector<double>& eta_grid, int r) {
  if (eta_grid.empty()) throw std::invalid_argument("split_regimes: empty grid");
  const double boundary = 1.0 / (static_cast<double>(r) * r);
  RegimeSplit out;
  for (double eta : eta_grid) {
    if (eta > 2.0 * boundary)
      out.large.push_back(eta);
    else if (eta < 0.5 * boundary)
      out.small.push_back(eta);
    else
      out.buffer.push_back(eta);
  }
  return out;
}

bool eta_point_valid(const ExperimentConfig& config, double eta) {
  const double gi = inv_or_zero(config.gamma);
  const double gti = inv_or_zero(config.gamma_tilde);
  const double needed = 10.0 / (eta * eta) * std::max(config.d, config.d_tilde) *
                        (1.0 + gi) * (1.0 + gti);
  return static_cast<double>(config.n) >= needed;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::pair<double, double>> median_series(const SweepResult& result,
                                                     Method method,
                                                     const std::string& theta_desc,
                                                     bool valid_only) {
  std::vector<std::pair<double, double>> series;
  for (double eta : result.config.eta_grid) {
    std::vector<double> errs;
    bool valid = true;
    for (const auto& rec : result.records) {
      if (rec.method != method || rec.theta_desc != theta_desc || rec.eta != eta ||
          rec.failed)
        continue;
      errs.push_back(rec.err);
      valid = rec.valid;
    }
    if (errs.empty()) continue;
    if (valid_only && !valid) continue;
    series.emplace_back(eta, median(std::move(errs)));
  }
  return series;
}

namespace {

double metric_value(MetricKind kind, const MetricReport& report) {
  switch (kind) {
    case MetricKind::ssd: return report.err_ssd;
    case MetricKind::ccd: return report.err_ccd;
    case MetricKind::def3: return report.err_def3;
    case MetricKind::lpe: return report.err_lpe;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string theta_desc_for(const ExperimentConfig& config, Method method,
                           double value) {
  if (method == Method::no_filter) return "-";
  if (config.theta_policy == ThetaPolicy::retention_fraction)
    return "retention=" + format_value(value);
  return "theta=" + format_value(value);
}

struct TaskEntry {
  Method method;
  double theta_value;
  std::string theta_desc;
};

std::vector<TaskEntry> build_entries(const ExperimentConfig& config) {
  std::vector<TaskEntry> entries;
  for (Method m : config.methods) {
    if (m == Method::no_filter) {
      entries.push_back({m, 0.0, theta_desc_for(config, m, 0.0)});
      continue;
    }
    for (double value : config.theta_values)
      entries.push_back({m, value, theta_desc_for(config, m, value)});
  }
  return entries;
}

// One pipeline run on a prebuilt dataset. Returns the full metric report so a
// single sweep can serve every metric.
void run_entry(const ExperimentConfig& config, const ModelParams& model,
               const PairedData& data, const TaskEntry& entry, SweepRecord& rec,
               MetricReport* report_out) {
  const double t0 = now_ms();
  try {
    Encoders enc;
    std::int64_t n_sel = data.n();
    switch (entry.method) {
      case Method::no_filter:
        enc = run_no_filter(data, config.r, config.rho, config.cov_mode);
        break;
      case Method::oracle_filter: {
        const Eigen::MatrixXd a = model.u * model.u_tilde.transpose();
        std::vector<std::int64_t> keep;
        if (config.theta_policy == ThetaPolicy::retention_fraction) {
          keep = select_top_fraction(score_all(data, a), entry.theta_value);
        } else {
          keep = filter_dataset(data, a, entry.theta_value).selected_indices;
        }
        n_sel = static_cast<std::int64_t>(keep.size());
        if (n_sel < config.r + 1) throw FilteringStarvation(n_sel, config.r + 1);
        enc = solve_closed_form(subset(data, keep), config.r, config.rho,
                                config.cov_mode);
        break;
      }
      case Method::teacher_filter: {
        TeacherRun run =
            config.theta_policy == ThetaPolicy::retention_fraction
                ? run_teacher_filter_retention(data, entry.theta_value, config.r,
                                               config.rho_teacher, config.rho,
                                               config.cov_mode)
                : run_teacher_filter(data, entry.theta_value, config.r,
                                     config.rho_teacher, config.rho,
                                     config.cov_mode);
        enc = run.student;
        n_sel = run.filter.n_sel;
        break;
      }
    }
    const MetricReport report = all_metrics(enc, model);
    if (report_out) *report_out = report;
    rec.err = metric_value(config.metric, report);
    rec.n_sel = n_sel;
  } catch (const FilteringStarvation& ex) {
    rec.failed = true;
    rec.failure = ex.what();
    rec.err = std::numeric_limits<double>::quiet_NaN();
    rec.n_sel = ex.n_sel();
    if (report_out) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      *report_out = {nan, nan, nan, nan, false};
    }
  }
  rec.wall_ms = now_ms() - t0;
}

void fill_slope_fits(SweepResult& result) {
  const RegimeSplit regimes = split_regimes(result.config.eta_grid, result.config.r);
  const auto in = [](const std::vector<double>& set, double eta) {
    return std::find(set.begin(), set.end(), eta) != set.end();
  };
  for (const auto& entry : build_entries(result.config)) {
    const auto series = median_series(result, entry.method, entry.theta_desc, true);
    const auto fit_into = [&](const char* regime,
                              const std::vector<std::pair<double, double>>& pts) {
      if (pts.size() < 3) return;
      for (const auto& p : pts)
        if (!(p.second > 0.0)) return;
      result.slope_fits[to_string(entry.method) + "|" + entry.theta_desc + "|" +
                        regime] = fit_loglog_slope(pts);
    };
    fit_into("all", series);
    std::vector<std::pair<double, double>> large, small;
    for (const auto& p : series) {
      if (in(regimes.large, p.first)) large.push_back(p);
      if (in(regimes.small, p.first)) small.push_back(p);
    }
    fit_into("large_eta", large);
    fit_into("small_eta", small);
  }
}

// Shared sweep driver. When `per_metric` is non-null it receives one record
// table per metric, all evaluated on the same pipeline outputs.
SweepResult run_sweep_impl(const ExperimentConfig& config,
                           std::map<MetricKind, std::vector<SweepRecord>>* per_metric) {
  validate(config);
  const std::vector<TaskEntry> entries = build_entries(config);
  const std::int64_t n_eta = static_cast<std::int64_t>(config.eta_grid.size());
  const std::int64_t n_seeds = static_cast<std::int64_t>(config.seeds.size());
  const std::int64_t n_tasks = n_eta * n_seeds;
  const std::int64_t per_task = static_cast<std::int64_t>(entries.size());

  SweepResult result;
  result.config = config;
  result.records.assign(static_cast<std::size_t>(n_tasks * per_task), SweepRecord{});
  std::vector<MetricReport> reports;
  if (per_metric)
    reports.assign(static_cast<std::size_t>(n_tasks * per_task), MetricReport{});

#pragma omp parallel for schedule(dynamic) num_threads(effective_threads(config.threads))
  for (std::int64_t task = 0; task < n_tasks; ++task) {
    const std::int64_t eta_idx = task / n_seeds;
    const std::int64_t seed_idx = task % n_seeds;
    const double eta = config.eta_grid[static_cast<std::size_t>(eta_idx)];
    const std::uint64_t trial_seed = config.seeds[static_cast<std::size_t>(seed_idx)];
    const std::uint64_t trial_key = derive_key(config.master_seed, trial_seed);

    const ModelParams model =
        make_model(derive_key(trial_key, kPurposeModel), config.d, config.d_tilde,
                   config.r, config.gamma, config.gamma_tilde, eta);
    const std::uint64_t data_key = derive_key(
        derive_key(trial_key, kPurposeDataset), static_cast<std::uint64_t>(eta_idx));
    const Dataset dataset = sample_dataset(model, config.n, RngStream(data_key));

    for (std::int64_t e = 0; e < per_task; ++e) {
      const std::size_t slot = static_cast<std::size_t>(task * per_task + e);
      SweepRecord& rec = result.records[slot];
      rec.eta = eta;
      rec.method = entries[static_cast<std::size_t>(e)].method;
      rec.theta_desc = entries[static_cast<std::size_t>(e)].theta_desc;
      rec.seed = trial_seed;
      rec.valid = eta_point_valid(config, eta);
      run_entry(config, model, dataset.pairs, entries[static_cast<std::size_t>(e)],
                rec, per_metric ? &reports[slot] : nullptr);
    }
  }

  if (per_metric) {
    for (MetricKind kind :
         {MetricKind::ssd, MetricKind::ccd, MetricKind::def3, MetricKind::lpe}) {
      std::vector<SweepRecord> table = result.records;
      for (std::size_t i = 0; i < table.size(); ++i) {
        if (!table[i].failed) table[i].err = metric_value(kind, reports[i]);
      }
      (*per_metric)[kind] = std::move(table);
    }
  }
  fill_slope_fits(result);
  return result;
}

}  // namespace

SweepResult run_eta_sweep(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  apply_defaults(c);
  return run_sweep_impl(c, nullptr);
}

std::vector<ThresholdSweepRow> run_threshold_sweep(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  apply_defaults(c);
  if (c.eta_grid.size() != 1)
    throw std::invalid_argument("run_threshold_sweep: expects a single fixed eta");
  if (c.theta_policy != ThetaPolicy::retention_fraction)
    throw std::invalid_argument("run_threshold_sweep: expects retention fractions");
  c.methods = {Method::teacher_filter};
  const SweepResult sweep = run_sweep_impl(c, nullptr);

  std::vector<ThresholdSweepRow> rows;
  for (double f : c.theta_values) {
    const std::string desc = "retention=" + format_value(f);
    ThresholdSweepRow row;
    row.fraction = f;
    std::vector<double> errs;
    for (const auto& rec : sweep.records) {
      if (rec.theta_desc != desc) continue;
      if (rec.failed) {
        ++row.n_failed;
        continue;
      }
      errs.push_back(rec.err);
    }
    row.n_ok = static_cast<int>(errs.size());
    if (!errs.empty()) {
      double sum = 0.0;
      for (double e : errs) sum += e;
      row.mean_err = sum / errs.size();
      double ss = 0.0;
      for (double e : errs) ss += (e - row.mean_err) * (e - row.mean_err);
      row.std_err = errs.size() > 1 ? std::sqrt(ss / (errs.size() - 1)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

SweepResult run_lower_bound_probe(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  apply_defaults(c);
  if (c.r != 1) throw std::invalid_argument("run_lower_bound_probe: requires r = 1");
  if (!std::isinf(c.gamma_tilde))
    throw std::invalid_argument("run_lower_bound_probe: requires gamma_tilde = inf");
  if (std::isinf(c.gamma))
    throw std::invalid_argument("run_lower_bound_probe: requires finite gamma");
  c.methods = {Method::no_filter};
  return run_sweep_impl(c, nullptr);
}

std::map<MetricKind, SweepResult> run_metric_comparison(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  apply_defaults(c);
  std::map<MetricKind, std::vector<SweepRecord>> per_metric;
  run_sweep_impl(c, &per_metric);
  std::map<MetricKind, SweepResult> out;
  for (auto& [kind, records] : per_metric) {
    SweepResult r;
    r.config = c;
    r.config.metric = kind;
    r.records = std::move(records);
    fill_slope_fits(r);
    out.emplace(kind, std::move(r));
  }
  return out;
}

}  // namespace filterlab
