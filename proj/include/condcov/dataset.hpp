#pragma once

#include <string>
#include <vector>

#include "condcov/common.hpp"
#include "condcov/errors.hpp"

namespace condcov {

/// One timestamped observation: confounder value plus a p-vector of system
/// outputs. NaN marks a missing value before preprocessing; preprocessing
/// guarantees none remain.
struct TimedRecord {
  double timestamp = 0.0;  // seconds since epoch
  double z = 0.0;
  Vector x;

  bool z_missing() const { return std::isnan(z); }
};

struct DatasetMeta {
  std::vector<std::string> channel_names;
  std::vector<std::string> channel_units;
  std::string confounder_name = "z";
  std::string confounder_unit;
  std::string timestamp_name = "timestamp";
  double sample_period = 0.0;  // seconds; 0 = unknown/irregular
};

/// Fully preprocessed data: no missing values, rows of X aligned with z and
/// timestamps.
struct AlignedDataset {
  Matrix X;           // n x p
  Vector z;           // n
  Vector timestamps;  // n
  DatasetMeta meta;

  Index rows() const { return X.rows(); }
  Index dims() const { return X.cols(); }
  Interval z_range() const;
  AlignedDataset select_rows(const std::vector<Index>& idx) const;

  /// Checks the invariants (alignment, finiteness, n >= 2, p >= 1).
  void validate() const;
};

/// Builds an AlignedDataset from preprocessed records; throws ChannelError
/// if any missing value remains.
AlignedDataset to_aligned(const std::vector<TimedRecord>& records,
                          DatasetMeta meta);

struct CsvSchema {
  std::string timestamp_col;
  std::string confounder_col;
  std::vector<std::string> output_cols;
};

/// Reads a header-first CSV. Non-numeric or empty cells in the confounder
/// and output columns become missing values; records come back sorted by
/// timestamp.
std::vector<TimedRecord> load_csv(const std::string& path,
                                  const CsvSchema& schema);

/// Puts records on a uniform grid with the given period: outputs are
/// decimated by the mean over each target bin (nearest-grid assignment with
/// half-period tolerance), the confounder is linearly interpolated to the
/// grid timestamps. Refuses to upsample outputs.
std::vector<TimedRecord> resample(const std::vector<TimedRecord>& records,
                                  double target_period);

/// Trims leading/trailing rows with missing values and fills interior gaps
/// by linear interpolation in time, per channel.
std::vector<TimedRecord> fill_missing(const std::vector<TimedRecord>& records);

enum class SplitMode { holdout, kfold };

/// Contiguous-block, confounder-stratified sampling plan.
struct SplitPlan {
  SplitMode mode = SplitMode::holdout;
  double fraction = 0.2;  // validation share (holdout)
  int folds = 5;          // kfold
  Index block_len = 1;    // consecutive records per sampled block
  std::vector<Interval> strata;  // empty: equal-width intervals over z-range
  int n_strata = 5;              // used when strata is empty

  /// Block length covering one day of records at the dataset's sample
  /// period (the default sampling unit for long-term monitoring data).
  static Index day_block(const AlignedDataset& data);
};

struct HoldoutSplit {
  AlignedDataset train;
  AlignedDataset validation;
};

HoldoutSplit split_holdout(const AlignedDataset& data, const SplitPlan& plan,
                           std::uint64_t seed);

/// K folds; fold k's validation rows appear in no other fold's validation.
std::vector<HoldoutSplit> split_kfold(const AlignedDataset& data,
                                      const SplitPlan& plan,
                                      std::uint64_t seed);

}  // namespace condcov
