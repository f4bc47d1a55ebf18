#include "filterlab/cli_io.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "filterlab/score_stats.hpp"
#include "filterlab/verify.hpp"

namespace filterlab {

namespace {

using nlohmann::json;

double number_or_inf(const json& v, const std::string& key) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "+inf")
      return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("config: field '" + key + "' has unrecognized value '" +
                                s + "'");
  }
  return v.get<double>();
}

const std::vector<std::string> kKnownKeys = {
    "d",           "d_tilde",   "r",
    "gamma",       "gamma_tilde", "n",
    "eta_grid",    "methods",   "theta_policy",
    "theta_values", "retention_fractions", "rho",
    "rho_teacher", "seeds",     "metric",
    "cov_mode",    "master_seed", "threads",
    "hist_bins"};

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), it.key()) == kKnownKeys.end())
      unknown.push_back(it.key());
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw std::invalid_argument(msg);
  }

  ExperimentConfig c;
  if (j.contains("d")) c.d = j.at("d").get<int>();
  if (j.contains("d_tilde")) c.d_tilde = j.at("d_tilde").get<int>();
  if (j.contains("r")) c.r = j.at("r").get<int>();
  if (j.contains("gamma")) c.gamma = number_or_inf(j.at("gamma"), "gamma");
  if (j.contains("gamma_tilde"))
    c.gamma_tilde = number_or_inf(j.at("gamma_tilde"), "gamma_tilde");
  if (j.contains("n")) c.n = j.at("n").get<std::int64_t>();
  if (j.contains("eta_grid")) c.eta_grid = j.at("eta_grid").get<std::vector<double>>();
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods"))
      c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  if (j.contains("theta_policy"))
    c.theta_policy = theta_policy_from_string(j.at("theta_policy").get<std::string>());
  if (j.contains("theta_values") && j.contains("retention_fractions"))
    throw std::invalid_argument(
        "config: give either 'theta_values' or 'retention_fractions', not both");
  if (j.contains("theta_values"))
    c.theta_values = j.at("theta_values").get<std::vector<double>>();
  if (j.contains("retention_fractions")) {
    c.theta_values = j.at("retention_fractions").get<std::vector<double>>();
    c.theta_policy = ThetaPolicy::retention_fraction;
  }
  if (j.contains("rho")) c.rho = j.at("rho").get<double>();
  if (j.contains("rho_teacher")) c.rho_teacher = j.at("rho_teacher").get<double>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("metric")) c.metric = metric_from_string(j.at("metric").get<std::string>());
  if (j.contains("cov_mode"))
    c.cov_mode = cov_mode_from_string(j.at("cov_mode").get<std::string>());
  if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();

  apply_defaults(c);
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["d"] = c.d;
  j["d_tilde"] = c.d_tilde;
  j["r"] = c.r;
  if (std::isinf(c.gamma))
    j["gamma"] = "inf";
  else
    j["gamma"] = c.gamma;
  if (std::isinf(c.gamma_tilde))
    j["gamma_tilde"] = "inf";
  else
    j["gamma_tilde"] = c.gamma_tilde;
  j["n"] = c.n;
  j["eta_grid"] = c.eta_grid;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["theta_policy"] = to_string(c.theta_policy);
  if (c.theta_policy == ThetaPolicy::retention_fraction)
    j["retention_fractions"] = c.theta_values;
  else
    j["theta_values"] = c.theta_values;
  j["rho"] = c.rho;
  j["rho_teacher"] = c.rho_teacher;
  j["seeds"] = c.seeds;
  j["metric"] = to_string(c.metric);
  j["cov_mode"] = to_string(c.cov_mode);
  j["master_seed"] = c.master_seed;
  j["threads"] = c.threads;
  return j;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << content;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

std::string slugify(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      out += ch;
    else if (ch == '.')
      out += 'p';
    else if (!out.empty() && out.back() != '_')
      out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "series" : out;
}

json slope_fits_json(const SweepResult& result) {
  json fits = json::object();
  for (const auto& [key, fit] : result.slope_fits) {
    json f;
    f["slope"] = fit.slope;
    f["intercept"] = fit.intercept;
    if (fit.r2_defined)
      f["r_squared"] = fit.r_squared;
    else
      f["r_squared"] = nullptr;
    f["n_points"] = fit.n_points;
    fits[key] = f;
  }
  return fits;
}

struct CommandOutput {
  std::vector<std::string> files;
  std::vector<std::string> failures;  // per-point failure summaries
  bool checks_failed = false;
};

void dump_sweep(const SweepResult& result, const std::filesystem::path& dir,
                const std::string& stem, CommandOutput& out) {
  {
    std::ostringstream os;
    write_records_csv(result.records, os);
    write_file(dir / (stem + "_records.csv"), os.str());
    out.files.push_back(stem + "_records.csv");
  }
  {
    std::ostringstream os;
    write_slopes_json(result, os);
    write_file(dir / (stem + "_slopes.json"), os.str());
    out.files.push_back(stem + "_slopes.json");
  }
  for (const auto& rec : result.records) {
    if (rec.failed) {
      out.failures.push_back(to_string(rec.method) + " " + rec.theta_desc + " eta=" +
                             g17(rec.eta) + " seed=" + std::to_string(rec.seed) +
                             ": " + rec.failure);
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config file not found: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + ex.what());
  }
  return from_json(j);
}

std::string config_echo(const ExperimentConfig& config) {
  return to_json(config).dump(2) + "\n";
}

std::string config_digest(const ExperimentConfig& config) {
  const std::string canon = to_json(config).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_records_csv(const std::vector<SweepRecord>& records, std::ostream& os) {
  os << "eta,method,theta_desc,seed,err,n_sel,wall_ms,valid_flag\n";
  for (const auto& rec : records) {
    os << g17(rec.eta) << ',' << to_string(rec.method) << ',' << rec.theta_desc << ','
       << rec.seed << ',' << g17(rec.err) << ',' << rec.n_sel << ',' << g17(rec.wall_ms)
       << ',' << (rec.valid && !rec.failed ? 1 : 0) << '\n';
  }
}

void write_slopes_json(const SweepResult& result, std::ostream& os) {
  json j;
  j["config"] = json::parse(config_echo(result.config));
  j["slope_fits"] = slope_fits_json(result);
  os << j.dump(2) << '\n';
}

std::vector<std::string> emit_plot_data(const SweepResult& result,
                                        const std::string& out_dir) {
  if (result.records.empty()) throw std::invalid_argument("emit_plot_data: empty result");
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  struct Series {
    std::string name;
    std::vector<std::array<double, 4>> rows;  // 1/eta, median, q25, q75
  };
  std::vector<Series> series;
  // enumerate (method, theta_desc) pairs in record order
  std::vector<std::pair<Method, std::string>> keys;
  for (const auto& rec : result.records) {
    const auto key = std::make_pair(rec.method, rec.theta_desc);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  const auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
  };
  for (const auto& [method, desc] : keys) {
    Series s;
    s.name = slugify(to_string(method) + (desc == "-" ? "" : "_" + desc));
    for (double eta : result.config.eta_grid) {
      std::vector<double> errs;
      for (const auto& rec : result.records) {
        if (rec.method == method && rec.theta_desc == desc && rec.eta == eta &&
            !rec.failed)
          errs.push_back(rec.err);
      }
      if (errs.empty()) continue;
      s.rows.push_back({1.0 / eta, median(errs), quantile(errs, 0.25),
                        quantile(errs, 0.75)});
    }
    series.push_back(std::move(s));
  }

  std::vector<std::string> written;
  for (const auto& s : series) {
    std::ostringstream os;
    os << "inv_eta,median_err,q25,q75\n";
    for (const auto& row : s.rows)
      os << g17(row[0]) << ',' << g17(row[1]) << ',' << g17(row[2]) << ','
         << g17(row[3]) << '\n';
    const std::string name = "plot_" + s.name + ".csv";
    write_file(dir / name, os.str());
    written.push_back(name);
  }

  // Reference lines anchored at the largest-eta point of the first series.
  if (!series.empty() && !series.front().rows.empty()) {
    const auto& anchor = series.front().rows.front();
    std::ostringstream os;
    os << "inv_eta,slope_1,slope_0p5,slope_0\n";
    for (const auto& row : series.front().rows) {
      const double ratio = row[0] / anchor[0];
      os << g17(row[0]) << ',' << g17(anchor[1] * ratio) << ','
         << g17(anchor[1] * std::sqrt(ratio)) << ',' << g17(anchor[1]) << '\n';
    }
    write_file(dir / "plot_reference.csv", os.str());
    written.push_back("plot_reference.csv");
  }
  return written;
}

namespace {

CommandOutput cmd_eta_sweep(const ExperimentConfig& config,
                            const std::filesystem::path& dir) {
  CommandOutput out;
  const SweepResult result = run_eta_sweep(config);
  dump_sweep(result, dir, "eta_sweep", out);
  for (const auto& f : emit_plot_data(result, dir.string())) out.files.push_back(f);
  return out;
}

CommandOutput cmd_threshold_sweep(const ExperimentConfig& config,
                                  const std::filesystem::path& dir) {
  CommandOutput out;
  const auto rows = run_threshold_sweep(config);
  std::ostringstream os;
  os << "fraction,mean_err,std_err,n_ok,n_failed\n";
  for (const auto& row : rows) {
    os << g17(row.fraction) << ',' << g17(row.mean_err) << ',' << g17(row.std_err)
       << ',' << row.n_ok << ',' << row.n_failed << '\n';
    if (row.n_failed > 0)
      out.failures.push_back("retention=" + g17(row.fraction) + ": " +
                             std::to_string(row.n_failed) + " starved trials");
  }
  write_file(dir / "threshold_table.csv", os.str());
  out.files.push_back("threshold_table.csv");
  return out;
}

CommandOutput cmd_lower_bound(const ExperimentConfig& config,
                              const std::filesystem::path& dir) {
  CommandOutput out;
  const SweepResult result = run_lower_bound_probe(config);
  dump_sweep(result, dir, "lower_bound", out);
  return out;
}

CommandOutput cmd_score_hist(const ExperimentConfig& config,
                             const std::filesystem::path& dir, int bins) {
  CommandOutput out;
  const std::uint64_t trial_key = derive_key(config.master_seed, config.seeds.front());
  const ModelParams model =
      make_model(derive_key(trial_key, 0x4D4F44ULL), config.d, config.d_tilde, config.r,
                 config.gamma, config.gamma_tilde, config.eta_grid.front());
  const Dataset dataset =
      sample_dataset(model, config.n, RngStream(derive_key(trial_key, 0x444154ULL)),
                     config.threads);
  const Eigen::MatrixXd a = model.u * model.u_tilde.transpose();
  const ScoreHistogram hist = empirical_score_hist(dataset, a, bins);
  {
    std::ostringstream os;
    write_histogram_csv(hist, os);
    write_file(dir / "score_hist.csv", os.str());
    out.files.push_back("score_hist.csv");
  }
  {
    const ScoreMoments mom = theory_moments(model);
    json j;
    j["theory"] = {{"mu0", mom.mu0}, {"var0", mom.var0}, {"mu1", mom.mu1},
                   {"var1", mom.var1}};
    std::int64_t n_clean = 0;
    for (auto f : dataset.clean_flags) n_clean += f;
    j["counts"] = {{"n", dataset.n()}, {"clean", n_clean}};
    write_file(dir / "score_moments.json", j.dump(2) + "\n");
    out.files.push_back("score_moments.json");
  }
  return out;
}

CommandOutput cmd_metric_compare(const ExperimentConfig& config,
                                 const std::filesystem::path& dir) {
  CommandOutput out;
  const auto results = run_metric_comparison(config);
  json slopes;
  for (const auto& [kind, result] : results) {
    const std::string stem = "metric_" + to_string(kind);
    std::ostringstream os;
    write_records_csv(result.records, os);
    write_file(dir / (stem + "_records.csv"), os.str());
    out.files.push_back(stem + "_records.csv");
    slopes[to_string(kind)] = slope_fits_json(result);
    for (const auto& rec : result.records)
      if (rec.failed)
        out.failures.push_back(to_string(kind) + " " + to_string(rec.method) +
                               " eta=" + g17(rec.eta) + ": " + rec.failure);
  }
  json j;
  j["config"] = json::parse(config_echo(config));
  j["slope_fits_per_metric"] = slopes;
  write_file(dir / "metric_compare_slopes.json", j.dump(2) + "\n");
  out.files.push_back("metric_compare_slopes.json");
  return out;
}

CommandOutput cmd_verify(const ExperimentConfig& config,
                         const std::filesystem::path& dir) {
  CommandOutput out;
  const VerifyReport report = run_verification(config.master_seed, config.threads);
  json checks = json::array();
  for (const auto& c : report.checks) {
    std::printf("[%s] %s: %s\n",
                c.report_only ? "INFO" : (c.pass ? "PASS" : "FAIL"), c.name.c_str(),
                c.detail.c_str());
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"detail", c.detail},
                      {"report_only", c.report_only}});
    if (!c.pass && !c.report_only) out.failures.push_back(c.name + ": " + c.detail);
  }
  json j;
  j["all_pass"] = report.all_pass;
  j["wall_seconds"] = report.wall_seconds;
  j["checks"] = checks;
  write_file(dir / "verify_report.json", j.dump(2) + "\n");
  out.files.push_back("verify_report.json");
  out.checks_failed = !report.all_pass;
  return out;
}

}  // namespace

int dispatch(const std::string& command, const ExperimentConfig& config,
             const std::string& out_dir, const CliExtras& extras) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const std::string started = iso_now();

  CommandOutput out;
  int status = kExitOk;
  try {
    if (command == "eta-sweep")
      out = cmd_eta_sweep(config, dir);
    else if (command == "threshold-sweep")
      out = cmd_threshold_sweep(config, dir);
    else if (command == "lower-bound")
      out = cmd_lower_bound(config, dir);
    else if (command == "score-hist")
      out = cmd_score_hist(config, dir, extras.hist_bins);
    else if (command == "metric-compare")
      out = cmd_metric_compare(config, dir);
    else if (command == "verify")
      out = cmd_verify(config, dir);
    else
      throw std::invalid_argument("unknown command: " + command);
  } catch (const std::exception& ex) {
    json j;
    j["error"] = ex.what();
    write_file(dir / "failures.json", j.dump(2) + "\n");
    status = kExitAborted;
  }

  if (status == kExitOk && (!out.failures.empty() || out.checks_failed)) {
    json j;
    j["failures"] = out.failures;
    write_file(dir / "failures.json", j.dump(2) + "\n");
    out.files.push_back("failures.json");
    status = kExitCompletedWithFailures;
  }

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = command;
  manifest["config_digest"] = config_digest(config);
  manifest["config"] = json::parse(config_echo(config));
  manifest["master_seed"] = config.master_seed;
  manifest["started_at"] = started;
  manifest["finished_at"] = iso_now();
  manifest["outputs"] = out.files;
  manifest["exit_status"] = status;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return status;
}

}  // namespace filterlab
