#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condcov/common.hpp"

namespace condcov {

/// One normalized run configuration. Every field has a usable default;
/// validate_config fills defaults and range-checks everything.
struct RunConfig {
  // data
  std::string input;
  std::string timestamp_col = "timestamp";
  std::string confounder_col = "z";
  std::vector<std::string> output_cols;
  double resample_period = 0.0;  // 0 = keep native sampling

  // splitting
  double split_fraction = 0.2;
  int folds = 0;  // 0 = holdout, >= 2 = K-fold
  int strata = 5;
  std::int64_t block_len = 0;  // 0 = one day of records
  std::uint64_t seed = 1;

  // conditional mean
  std::string mean_kind = "kernel";  // kernel | bilinear | constant
  double breakpoint = 2.0;
  double mean_bandwidth = 1.0;  // kernel mean fallback when not tuned

  // bandwidth tuning
  std::string tune = "both";  // mean | cov | both | none
  std::vector<double> grid = {0.25, 0.5, 0.75, 1.0, 1.5,
                              2.0,  2.5, 3.5,  5.0,
                              std::numeric_limits<double>::infinity()};
  bool global_h = false;  // one covariance bandwidth instead of per pair

  // conditional covariance
  std::string eval_grid;  // "zmin:zmax:step"; empty = no grid export
  std::string psd_policy = "clip-eigen";  // clip-eigen | jitter
  double cov_bandwidth = 1.0;  // fallback when not tuned

  // diagnostics
  std::string regime = "full";  // none | mean | full
  double quantile = 0.99;
  double z_split = 2.0;
  std::string phase2_input;
  double phase1_cutoff = std::numeric_limits<double>::quiet_NaN();

  // conditional PCA
  std::vector<double> pca_z;
  std::vector<std::int64_t> drop_components;  // 1-based
  int score_bins = 6;

  // simulation
  std::string scenario = "logistic";  // constant | linear | logistic | mixed
  int sim_n = 100;
  int sim_runs = 50;
  std::vector<double> h_grid = {0.5, 1.5, 2.5,
                                std::numeric_limits<double>::infinity()};
  bool thin_rows = false;

  // orchestration
  std::string out_dir = "out";
  std::vector<std::string> stages;  // empty = inferred from input/simulate
};

struct ConfigIssue {
  std::string key;
  std::string message;
};

struct ConfigResult {
  RunConfig config;
  std::vector<ConfigIssue> errors;
  std::vector<ConfigIssue> warnings;

  bool ok() const { return errors.empty(); }
};

/// Parses and validates a config document. Unknown keys are errors unless
/// `lenient`, which downgrades them to warnings.
ConfigResult validate_config_text(const std::string& text, bool lenient = false);
ConfigResult validate_config(const std::string& path, bool lenient = false);

/// Canonical text form of a normalized config; parsing it back yields an
/// identical normalized form.
std::string serialize_config(const RunConfig& config);

/// "zmin:zmax:step" -> ascending evaluation grid.
Vector parse_eval_grid(const std::string& text);

}  // namespace condcov
