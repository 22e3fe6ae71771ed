#pragma once

#include <string>
#include <vector>

#include "condcov/bandwidth.hpp"
#include "condcov/covariance.hpp"
#include "condcov/dataset.hpp"
#include "condcov/diagnostics.hpp"
#include "condcov/pca.hpp"

namespace condcov {

/// Shortest round-trip decimal form of a double ("inf" for the sentinel).
std::string format_double(double v);

/// Writes the dataset as CSV with its original column names.
void write_dataset_csv(const std::string& path, const AlignedDataset& data);

/// z, j, k, sigma_jk, rho_jk rows (1-based upper triangle) over a z grid.
void write_cov_grid_csv(const std::string& path, const CondCovModel& model,
                        const Vector& grid);

/// h, loss, target_id rows for one or more loss curves.
void write_loss_curves_csv(const std::string& path,
                           const std::vector<LossCurve>& curves);

/// timestamp, z, d2, alarm, phase rows.
void write_diagnostics_csv(const std::string& path,
                           const DiagnosticSeries& series);

/// timestamp, z, s1..sp rows.
void write_scores_csv(const std::string& path, const Vector& timestamps,
                      const Vector& z, const Matrix& scores);

/// z, component, eigenvalue, a1..ap rows for a set of decompositions.
void write_components_csv(const std::string& path,
                          const std::vector<CondEigenDecomp>& decomps);

/// {regime, threshold, dof, rate_overall, rate_below_split,
///  rate_above_split, n} report document.
void write_report_json(const std::string& path, Regime regime,
                       const DiagnosticSeries& series,
                       const AlarmReport& report);

void write_score_diagnostics_json(const std::string& path,
                                  const ScoreDiagnostics& diag);

// Model serialization. Kernel-kind models reference their training-data
// file; loading replays the fit from that file.
void write_mean_model_json(const std::string& path, const MeanModel& model,
                           const std::string& training_data,
                           const CsvSchema& schema);
MeanModel load_mean_model_json(const std::string& path);

void write_cov_model_json(const std::string& path, const CondCovModel& model,
                          const std::string& training_data,
                          const CsvSchema& schema);
CondCovModel load_cov_model_json(const std::string& path);

/// FNV-1a 64-bit content hash, hex-encoded.
std::string file_hash(const std::string& path);
std::string text_hash(const std::string& text);

bool files_identical(const std::string& a, const std::string& b);

}  // namespace condcov
