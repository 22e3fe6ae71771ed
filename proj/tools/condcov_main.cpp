#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "condcov/common.hpp"
#include "condcov/config.hpp"
#include "condcov/pipeline.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && item.front() == ' ') item.erase(0, 1);
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<double> split_numbers(const std::string& text) {
  std::vector<double> numbers;
  for (const std::string& item : split_list(text)) {
    if (item == "inf")
      numbers.push_back(std::numeric_limits<double>::infinity());
    else
      numbers.push_back(std::stod(item));
  }
  return numbers;
}

void print_issues(const std::vector<condcov::ConfigIssue>& issues,
                  const char* label, bool json_errors) {
  for (const auto& issue : issues) {
    if (json_errors)
      std::cerr << "{\"" << label << "\":{\"key\":\"" << issue.key
                << "\",\"message\":\"" << issue.message << "\"}}\n";
    else
      std::cerr << "condcov: " << label << " at '" << issue.key
                << "': " << issue.message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confounder-conditional covariance modeling, anomaly "
               "detection, and conditional PCA for multivariate monitoring "
               "data"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  bool lenient = false, quiet = false, verbose = false, json_errors = false;
  app.add_option("-c,--config", config_path, "TOML-style key = value config file");
  app.add_flag("--lenient", lenient, "Downgrade unknown config keys to warnings");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");
  app.add_flag("-v,--verbose", verbose, "Print written artifact paths");
  app.add_flag("--json-errors", json_errors, "Machine-readable errors on stderr");

  // data
  std::string input, timestamp_col, confounder_col, output_cols;
  double resample_period = 0, split_fraction = 0, breakpoint = 0;
  std::vector<int> folds_given;
  int strata = 0, score_bins = 0;
  std::int64_t block_len = 0;
  std::uint64_t seed = 0;
  app.add_option("--input", input, "Input CSV path");
  app.add_option("--timestamp-col", timestamp_col, "Timestamp column name");
  app.add_option("--confounder-col", confounder_col, "Confounder column name");
  app.add_option("--output-cols", output_cols, "Comma-separated output columns");
  app.add_option("--resample-period", resample_period, "Target period in seconds");
  app.add_option("--split-fraction", split_fraction, "Validation share");
  app.add_option("--folds", folds_given, "K-fold cross-validation (default K=5)")
      ->expected(0, 1);
  app.add_option("--strata", strata, "Number of confounder strata");
  app.add_option("--block-len", block_len, "Records per sampled block");
  app.add_option("--seed", seed, "Random seed");

  // mean + bandwidths
  std::string mean_kind, tune_what, grid, eval_grid, psd_policy;
  double mean_bandwidth = 0, cov_bandwidth = 0;
  bool global_h = false;
  app.add_option("--mean-kind", mean_kind, "kernel | bilinear | constant");
  app.add_option("--breakpoint", breakpoint, "Bilinear mean breakpoint");
  app.add_option("--mean-bandwidth", mean_bandwidth, "Kernel mean bandwidth");
  app.add_option("--tune", tune_what, "mean | cov | both | none");
  app.add_option("--grid", grid, "Comma-separated bandwidth candidates (inf ok)");
  app.add_flag("--global-h", global_h, "One covariance bandwidth for all entries");
  app.add_option("--eval-grid", eval_grid, "Covariance export grid zmin:zmax:step");
  app.add_option("--psd-policy", psd_policy, "clip-eigen | jitter");
  app.add_option("--cov-bandwidth", cov_bandwidth, "Covariance bandwidth fallback");

  // diagnostics
  std::string regime, phase2_input;
  double quantile = 0, z_split = 0, phase1_cutoff = 0;
  app.add_option("--regime", regime, "none | mean | full");
  app.add_option("--quantile", quantile, "Chi-square alarm quantile");
  app.add_option("--z-split", z_split, "Confounder split for the alarm report");
  app.add_option("--phase2-input", phase2_input, "Monitoring-phase CSV");
  app.add_option("--phase1-cutoff", phase1_cutoff,
                 "Timestamp separating phase I from phase II");

  // pca
  std::string pca_z, drop_components;
  app.add_option("--pca-z", pca_z, "Comma-separated z values for component export");
  app.add_option("--drop-components", drop_components,
                 "Comma-separated 1-based components to drop");
  app.add_option("--score-bins", score_bins, "Bins for score diagnostics");

  // simulate
  std::string scenario, h_grid;
  int sim_n = 0, sim_runs = 0;
  bool thin_rows = false;
  app.add_option("--scenario", scenario, "constant | linear | logistic | mixed");
  app.add_option("--n", sim_n, "Replicates per grid value");
  app.add_option("--runs", sim_runs, "Monte Carlo runs");
  app.add_option("--h-grid", h_grid, "Comma-separated curve bandwidths (inf ok)");
  app.add_flag("--thin-rows", thin_rows, "Thin individual rows, not grid values");

  std::string out_dir, stages;
  app.add_option("--out-dir", out_dir, "Artifact directory");
  app.add_option("--stages", stages, "Comma-separated stages for 'run'");

  for (const char* name : {"preprocess", "tune", "fit", "monitor", "pca",
                           "simulate", "report", "run"})
    app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  condcov::ConfigResult parsed;
  if (!config_path.empty())
    parsed = condcov::validate_config(config_path, lenient);
  condcov::RunConfig& cfg = parsed.config;

  // flags override config keys
  if (app.count("--input")) cfg.input = input;
  if (app.count("--timestamp-col")) cfg.timestamp_col = timestamp_col;
  if (app.count("--confounder-col")) cfg.confounder_col = confounder_col;
  if (app.count("--output-cols")) cfg.output_cols = split_list(output_cols);
  if (app.count("--resample-period")) cfg.resample_period = resample_period;
  if (app.count("--split-fraction")) cfg.split_fraction = split_fraction;
  if (app.count("--folds"))
    cfg.folds = folds_given.empty() ? 5 : folds_given.front();
  if (app.count("--strata")) cfg.strata = strata;
  if (app.count("--block-len")) cfg.block_len = block_len;
  if (app.count("--seed")) cfg.seed = seed;
  if (app.count("--mean-kind")) cfg.mean_kind = mean_kind;
  if (app.count("--breakpoint")) cfg.breakpoint = breakpoint;
  if (app.count("--mean-bandwidth")) cfg.mean_bandwidth = mean_bandwidth;
  if (app.count("--tune")) cfg.tune = tune_what;
  if (app.count("--grid")) cfg.grid = split_numbers(grid);
  if (app.count("--global-h")) cfg.global_h = global_h;
  if (app.count("--eval-grid")) cfg.eval_grid = eval_grid;
  if (app.count("--psd-policy")) cfg.psd_policy = psd_policy;
  if (app.count("--cov-bandwidth")) cfg.cov_bandwidth = cov_bandwidth;
  if (app.count("--regime")) cfg.regime = regime;
  if (app.count("--quantile")) cfg.quantile = quantile;
  if (app.count("--z-split")) cfg.z_split = z_split;
  if (app.count("--phase2-input")) cfg.phase2_input = phase2_input;
  if (app.count("--phase1-cutoff")) cfg.phase1_cutoff = phase1_cutoff;
  if (app.count("--pca-z")) cfg.pca_z = split_numbers(pca_z);
  if (app.count("--drop-components")) {
    cfg.drop_components.clear();
    for (double v : split_numbers(drop_components))
      cfg.drop_components.push_back(static_cast<std::int64_t>(v));
  }
  if (app.count("--score-bins")) cfg.score_bins = score_bins;
  if (app.count("--scenario")) cfg.scenario = scenario;
  if (app.count("--n")) cfg.sim_n = sim_n;
  if (app.count("--runs")) cfg.sim_runs = sim_runs;
  if (app.count("--h-grid")) cfg.h_grid = split_numbers(h_grid);
  if (app.count("--thin-rows")) cfg.thin_rows = thin_rows;
  if (app.count("--out-dir")) cfg.out_dir = out_dir;
  if (app.count("--stages")) cfg.stages = split_list(stages);
  if (const char* env = std::getenv("CONDCOV_OUT_DIR")) cfg.out_dir = env;

  // the chosen subcommand fixes the stage list ('run' keeps the config's)
  for (const CLI::App* sub : app.get_subcommands())
    if (sub->get_name() != "run") cfg.stages = {sub->get_name()};

  // re-validate the merged configuration
  parsed = condcov::validate_config_text(condcov::serialize_config(cfg), lenient);
  print_issues(parsed.warnings, "warning", json_errors);
  if (!parsed.ok()) {
    print_issues(parsed.errors, "error", json_errors);
    return 2;
  }

  if (quiet) condcov::set_warning_handler([](const std::string&) {});

  condcov::PipelineOptions options;
  options.quiet = quiet;
  options.verbose = verbose;
  const condcov::PipelineResult result =
      condcov::run_pipeline(parsed.config, options);
  if (!result.ok) {
    if (json_errors)
      std::cerr << "{\"error\":{\"stage\":\"" << result.failed_stage
                << "\",\"message\":\"" << result.error << "\"}}\n";
    else
      std::cerr << "condcov: error in " << result.error << "\n";
  }
  return result.exit_code();
}
