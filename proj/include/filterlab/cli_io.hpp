#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "filterlab/experiments.hpp"

namespace filterlab {

inline constexpr const char* kToolVersion = "filterlab 0.1.0";

// Exit statuses used by dispatch(): 0 clean success, 4 completed with
// per-point failures or failed checks, 1 aborted.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAborted = 1;
inline constexpr int kExitCompletedWithFailures = 4;

// Reads and validates a JSON config file; defaults are applied
// (rho = rho_teacher = 1, metric = ssd, seeds = 0..19, cov_mode = centered).
// Unknown keys are an error that lists them.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Config echo in the same schema parse_config accepts (round-trips exactly).
std::string config_echo(const ExperimentConfig& config);

// FNV-1a digest of the canonical config echo.
std::string config_digest(const ExperimentConfig& config);

// Histogram bin count for the score-hist command (not part of the sweep
// config proper, so it travels separately).
struct CliExtras {
  int hist_bins = 60;
};

// Runs one command against a parsed config and writes CSV/JSON outputs plus
// a run manifest under out_dir. Commands: eta-sweep, threshold-sweep,
// lower-bound, score-hist, metric-compare, verify.
int dispatch(const std::string& command, const ExperimentConfig& config,
             const std::string& out_dir, const CliExtras& extras = {});

void write_records_csv(const std::vector<SweepRecord>& records, std::ostream& os);
void write_slopes_json(const SweepResult& result, std::ostream& os);

// Plot-ready series: per (method, theta_desc) a CSV of
// (1/eta, median_err, q25, q75), plus reference lines with slopes {1, 0.5, 0}
// anchored at the largest-eta median of the first series.
std::vector<std::string> emit_plot_data(const SweepResult& result,
                                        const std::string& out_dir);

}  // namespace filterlab
