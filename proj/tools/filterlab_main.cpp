#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "filterlab/cli_io.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  int hist_bins = 60;
};

int run_command(const std::string& command, const GlobalArgs& args) {
  filterlab::ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = filterlab::parse_config(args.config_path);
  } else if (command == "verify") {
    // verify runs on built-in instances; a config is optional
    config.eta_grid = {1.0};
    filterlab::apply_defaults(config);
  } else {
    std::fprintf(stderr, "error: --config is required for %s\n", command.c_str());
    return filterlab::kExitAborted;
  }
  if (args.seed) config.master_seed = *args.seed;
  if (args.threads > 0) config.threads = args.threads;
  filterlab::CliExtras extras;
  extras.hist_bins = args.hist_bins;
  return filterlab::dispatch(command, config, args.out_dir, extras);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filterlab: bimodal contrastive-learning filtering experiments"};
  app.require_subcommand(1);

  GlobalArgs args;
  const auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* copt = sub->add_option("--config", args.config_path, "JSON config file");
    if (config_required) copt->required();
    sub->add_option("--out", args.out_dir, "output directory")->required();
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--threads", args.threads, "worker threads (0 = all)")
        ->envname("FILTERLAB_THREADS");
  };

  auto* eta = app.add_subcommand("eta-sweep", "error vs clean-fraction sweep");
  add_common(eta, true);
  auto* thr = app.add_subcommand("threshold-sweep",
                                 "teacher filtering vs retention fraction");
  add_common(thr, true);
  auto* low = app.add_subcommand("lower-bound", "rank-1 hard-instance probe");
  add_common(low, true);
  auto* hist = app.add_subcommand("score-hist", "oracle score histogram");
  add_common(hist, true);
  hist->add_option("--bins", args.hist_bins, "histogram bin count");
  auto* cmp = app.add_subcommand("metric-compare",
                                 "sweep under all four error metrics");
  add_common(cmp, true);
  auto* ver = app.add_subcommand("verify", "run the property/invariant suite");
  add_common(ver, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    return run_command(command, args);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return filterlab::kExitAborted;
  }
}
