#include "condcov/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "condcov/io.hpp"
#include "json_util.hpp"
#include "condcov/pca.hpp"
#include "condcov/simulate.hpp"

namespace condcov {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Pipeline {
 public:
  Pipeline(const RunConfig& config, const PipelineOptions& options)
      : config_(config), options_(options), out_(config.out_dir) {}

  PipelineResult run() {
    PipelineResult result;
    fs::create_directories(out_);
    std::string current;
    try {
      for (const std::string& stage : config_.stages) {
        current = stage;
        log("stage " + stage);
        dispatch(stage);
      }
    } catch (const std::exception& e) {
      result.ok = false;
      result.failed_stage = current;
      result.error = current + ": " + e.what();
    }
    result.artifacts = artifacts_;
    write_manifest(result);
    return result;
  }

 private:
  void dispatch(const std::string& stage) {
    if (stage == "preprocess") run_preprocess();
    else if (stage == "tune") run_tune();
    else if (stage == "fit") run_fit();
    else if (stage == "monitor") run_monitor();
    else if (stage == "pca") run_pca();
    else if (stage == "simulate") run_simulate();
    else if (stage == "report") run_report();
    else throw ConfigError("unknown stage: " + stage);
  }

  void log(const std::string& msg) const {
    if (!options_.quiet) std::cout << "[condcov] " << msg << "\n";
  }

  std::string path(const std::string& name) const { return (out_ / name).string(); }

  void record(const std::string& stage, const std::string& name) {
    const std::string p = path(name);
    artifacts_.push_back({stage, name, p, file_hash(p)});
    if (options_.verbose) log("  wrote " + p);
  }

  CsvSchema schema() const {
    return {config_.timestamp_col, config_.confounder_col, config_.output_cols};
  }

  DatasetMeta meta_for_schema() const {
    DatasetMeta meta;
    meta.channel_names = config_.output_cols;
    meta.confounder_name = config_.confounder_col;
    meta.timestamp_name = config_.timestamp_col;
    meta.sample_period = config_.resample_period;
    return meta;
  }

  AlignedDataset preprocess_file(const std::string& input) const {
    std::vector<TimedRecord> records = load_csv(input, schema());
    if (config_.resample_period > 0.0)
      records = resample(records, config_.resample_period);
    records = fill_missing(records);
    AlignedDataset data = to_aligned(records, meta_for_schema());
    if (data.meta.sample_period <= 0.0 && data.rows() > 1) {
      // infer the sample period for day-sized split blocks
      std::vector<double> gaps;
      for (Index i = 1; i < data.rows(); ++i)
        gaps.push_back(data.timestamps[i] - data.timestamps[i - 1]);
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      data.meta.sample_period = gaps[gaps.size() / 2];
    }
    return data;
  }

  void run_preprocess() {
    dataset_ = preprocess_file(config_.input);
    write_dataset_csv(path("preprocessed.csv"), *dataset_);
    record("preprocess", "preprocessed.csv");
  }

  const AlignedDataset& dataset() {
    if (!dataset_) {
      if (fs::exists(path("preprocessed.csv"))) {
        AlignedDataset data = to_aligned(
            load_csv(path("preprocessed.csv"), schema()), meta_for_schema());
        if (data.meta.sample_period <= 0.0 && data.rows() > 1)
          data.meta.sample_period = data.timestamps[1] - data.timestamps[0];
        dataset_ = std::move(data);
      } else {
        run_preprocess();
      }
    }
    return *dataset_;
  }

  // Phase I rows (before the cutoff) when a cutoff is configured.
  AlignedDataset phase1_data() {
    const AlignedDataset& all = dataset();
    if (std::isnan(config_.phase1_cutoff)) return all;
    std::vector<Index> rows;
    for (Index i = 0; i < all.rows(); ++i)
      if (all.timestamps[i] < config_.phase1_cutoff) rows.push_back(i);
    return all.select_rows(rows);
  }

  std::optional<AlignedDataset> phase2_data() {
    if (!config_.phase2_input.empty())
      return preprocess_file(config_.phase2_input);
    if (!std::isnan(config_.phase1_cutoff)) {
      const AlignedDataset& all = dataset();
      std::vector<Index> rows;
      for (Index i = 0; i < all.rows(); ++i)
        if (all.timestamps[i] >= config_.phase1_cutoff) rows.push_back(i);
      if (!rows.empty()) return all.select_rows(rows);
    }
    return std::nullopt;
  }

  SplitPlan split_plan(const AlignedDataset& data) const {
    SplitPlan plan;
    plan.mode = config_.folds >= 2 ? SplitMode::kfold : SplitMode::holdout;
    plan.fraction = config_.split_fraction;
    plan.folds = config_.folds >= 2 ? config_.folds : 5;
    plan.block_len = config_.block_len > 0
                         ? static_cast<Index>(config_.block_len)
                         : SplitPlan::day_block(data);
    plan.n_strata = config_.strata;
    return plan;
  }

  Vector grid_vector() const {
    return Eigen::Map<const Vector>(config_.grid.data(),
                                    static_cast<Index>(config_.grid.size()));
  }

  MeanRecipe mean_recipe() const {
    MeanRecipe recipe;
    recipe.kind = mean_kind_from_string(config_.mean_kind);
    recipe.breakpoint = config_.breakpoint;
    recipe.kernel_bandwidth = config_.mean_bandwidth;
    if (mean_bandwidths_.size() > 0)
      recipe.kernel_bandwidths = mean_bandwidths_;
    return recipe;
  }

  BandwidthMatrix cov_bandwidths(Index p) const {
    if (cov_bandwidths_.dims() == p) return cov_bandwidths_;
    return BandwidthMatrix::global(p, config_.cov_bandwidth);
  }

  void load_bandwidths_artifact(Index p) {
    const std::string file = path("bandwidths.json");
    if (!fs::exists(file)) return;
    std::ifstream in(file);
    json doc = json::parse(in);
    if (doc.contains("mean"))
      mean_bandwidths_ = detail::vector_from_json(doc["mean"]);
    if (doc.contains("cov")) {
      const Matrix H = detail::matrix_from_json(doc["cov"]);
      if (H.rows() != p)
        throw ShapeError("bandwidths.json does not match the channel count");
      cov_bandwidths_ = BandwidthMatrix(H);
    }
  }

  void run_tune() {
    const AlignedDataset& data = dataset();
    const SplitPlan plan = split_plan(data);
    const Vector grid = grid_vector();
    std::vector<LossCurve> curves;

    const bool tune_mean_stage =
        (config_.tune == "mean" || config_.tune == "both") &&
        config_.mean_kind == "kernel";
    if ((config_.tune == "mean" || config_.tune == "both") &&
        config_.mean_kind != "kernel")
      warn("tune: mean kind '" + config_.mean_kind +
           "' has no bandwidth; skipping mean tuning");

    if (tune_mean_stage) {
      TuneResult mean_result = tune(data, plan, grid,
                                    TuneTarget::mean_per_channel,
                                    mean_recipe(), config_.seed);
      mean_bandwidths_ = mean_result.mean_bandwidths;
      for (LossCurve& c : mean_result.curves) curves.push_back(std::move(c));
    }
    if (config_.tune == "cov" || config_.tune == "both") {
      TuneResult cov_result =
          tune(data, plan, grid,
               config_.global_h ? TuneTarget::cov_global
                                : TuneTarget::cov_per_pair,
               mean_recipe(), config_.seed);
      cov_bandwidths_ = cov_result.cov_bandwidths;
      for (LossCurve& c : cov_result.curves) curves.push_back(std::move(c));
    }

    write_loss_curves_csv(path("loss_curves.csv"), curves);
    record("tune", "loss_curves.csv");

    json doc;
    if (mean_bandwidths_.size() > 0)
      doc["mean"] = detail::json_vector(mean_bandwidths_);
    if (cov_bandwidths_.dims() > 0)
      doc["cov"] = detail::json_matrix(cov_bandwidths_.matrix());
    std::ofstream out(path("bandwidths.json"), std::ios::binary);
    out << doc.dump(2) << '\n';
    out.close();
    record("tune", "bandwidths.json");
  }

  Detector fit_models(const AlignedDataset& data) {
    load_bandwidths_artifact(data.dims());
    DetectorOptions opt;
    opt.regime = regime_from_string(config_.regime);
    opt.mean = mean_recipe();
    opt.cov_bandwidths = cov_bandwidths(data.dims());
    opt.quantile = config_.quantile;
    Detector det = fit_detector(data, opt);
    if (config_.psd_policy == "jitter")
      det.cov.set_psd_policy(PsdPolicy::jitter);
    return det;
  }

  void run_fit() {
    const AlignedDataset data = phase1_data();
    Detector det = fit_models(data);

    // models must reference the rows they were fitted on
    std::string train_ref = "preprocessed.csv";
    if (!std::isnan(config_.phase1_cutoff)) {
      train_ref = "phase1.csv";
      write_dataset_csv(path(train_ref), data);
      record("fit", train_ref);
    }
    write_mean_model_json(path("mean_model.json"), det.mean, train_ref,
                          schema());
    record("fit", "mean_model.json");
    write_cov_model_json(path("cov_model.json"), det.cov, train_ref, schema());
    record("fit", "cov_model.json");
    if (!config_.eval_grid.empty()) {
      write_cov_grid_csv(path("cov_grid.csv"), det.cov,
                         parse_eval_grid(config_.eval_grid));
      record("fit", "cov_grid.csv");
    }
  }

  void run_monitor() {
    const AlignedDataset phase1 = phase1_data();
    load_bandwidths_artifact(phase1.dims());

    DetectorOptions opt;
    opt.regime = regime_from_string(config_.regime);
    opt.mean = mean_recipe();
    opt.cov_bandwidths = cov_bandwidths(phase1.dims());
    opt.quantile = config_.quantile;

    DiagnosticSeries series = phase1_loo(phase1, opt);
    const AlarmReport report1 = alarm_report(series, config_.z_split);
    write_report_json(path("report.json"), opt.regime, series, report1);
    record("monitor", "report.json");

    if (auto phase2 = phase2_data()) {
      const Detector frozen = fit_detector(phase1, opt);
      DiagnosticSeries series2 = monitor(*phase2, frozen);
      if (!series2.points.empty()) {
        const AlarmReport report2 = alarm_report(series2, config_.z_split);
        write_report_json(path("report_phase2.json"), opt.regime, series2,
                          report2);
        record("monitor", "report_phase2.json");
        for (const DiagnosticPoint& pt : series2.points)
          series.points.push_back(pt);
      }
    }
    write_diagnostics_csv(path("diagnostics.csv"), series);
    record("monitor", "diagnostics.csv");
  }

  void run_pca() {
    const AlignedDataset data = phase1_data();
    Detector det = fit_models(data);
    const Index p = data.dims();

    // Per-entry bandwidths plus PSD repair can clip trailing eigenvalues to
    // zero somewhere in the z range; keep only components that stay above
    // the eigenvalue floor at every observation.
    Index usable = p;
    {
      std::map<double, bool> seen;
      for (Index i = 0; i < data.rows() && usable > 0; ++i) {
        if (!seen.emplace(data.z[i], true).second) continue;
        const CondEigenDecomp dec = cond_eigen(det.cov, data.z[i]);
        const double floor = 1e-12 * dec.eigenvalues.sum();
        for (Index j = 0; j < usable; ++j)
          if (!(dec.eigenvalues[j] > floor)) usable = j;
      }
    }
    if (usable < 1)
      throw DegenerateComponentError(
          "pca: no component stays above the eigenvalue floor");
    std::vector<Index> selected;
    for (Index j = 0; j < usable; ++j) selected.push_back(j);
    if (usable < p)
      warn("pca: retaining the first " + std::to_string(usable) + " of " +
           std::to_string(p) + " components; the rest fall below the "
           "eigenvalue floor for some z");

    const Matrix scores =
        cond_scores(data.X, data.z, det.mean, det.cov, selected);
    write_scores_csv(path("scores.csv"), data.timestamps, data.z, scores);
    record("pca", "scores.csv");

    const ScoreDiagnostics diag =
        score_diagnostics(scores, data.z, config_.score_bins);
    write_score_diagnostics_json(path("score_diagnostics.json"), diag);
    record("pca", "score_diagnostics.json");

    if (!config_.pca_z.empty()) {
      std::vector<CondEigenDecomp> decomps;
      for (double z : config_.pca_z) decomps.push_back(cond_eigen(det.cov, z));
      write_components_csv(path("components.csv"), decomps);
      record("pca", "components.csv");
    }

    if (!config_.drop_components.empty()) {
      if (usable < p) {
        warn("pca: skipping reconstruction; it needs scores for all " +
             std::to_string(p) + " components");
        return;
      }
      std::vector<Index> removed;
      for (std::int64_t c : config_.drop_components)
        removed.push_back(static_cast<Index>(c - 1));
      const Matrix rebuilt =
          reconstruct(scores, data.z, det.mean, det.cov, removed);
      AlignedDataset recon = data;
      recon.X = rebuilt;
      write_dataset_csv(path("reconstructed.csv"), recon);
      record("pca", "reconstructed.csv");
    }
  }

  void run_simulate() {
    ScenarioSpec spec = scenario_preset(config_.scenario, config_.sim_n);
    spec.thin_rows = config_.thin_rows;

    MonteCarloConfig mc;
    mc.curve_bandwidths = Eigen::Map<const Vector>(
        config_.h_grid.data(), static_cast<Index>(config_.h_grid.size()));
    mc.tune_grid = config_.tune == "none" ? Vector() : grid_vector();
    mc.tune_target = config_.global_h ? TuneTarget::cov_global
                                      : TuneTarget::cov_per_pair;
    mc.plan.mode = config_.folds >= 2 ? SplitMode::kfold : SplitMode::holdout;
    mc.plan.fraction = config_.split_fraction;
    mc.plan.folds = config_.folds >= 2 ? config_.folds : 5;
    mc.plan.block_len = config_.block_len > 0
                            ? static_cast<Index>(config_.block_len)
                            : 1;
    mc.plan.n_strata = config_.strata;

    const MonteCarloResult result =
        monte_carlo(spec, config_.sim_runs, mc, config_.seed);

    const char* corr_ids[3] = {"rho_1_2", "rho_1_3", "rho_2_3"};
    for (Index hi = 0; hi < result.curve_bandwidths.size(); ++hi) {
      const std::string name =
          "ensemble_h" + format_double(result.curve_bandwidths[hi]) + ".csv";
      std::ofstream out(path(name), std::ios::binary);
      out << "run,z,target_id,estimate\n";
      for (size_t r = 0; r < result.runs.size(); ++r) {
        const MonteCarloRun& run = result.runs[r];
        for (Index g = 0; g < result.eval_z.size(); ++g) {
          for (Index j = 0; j < 3; ++j)
            out << r << ',' << format_double(result.eval_z[g]) << ",var_"
                << (j + 1) << ','
                << format_double(run.variances[static_cast<size_t>(hi)](j, g))
                << '\n';
          for (Index pair = 0; pair < 3; ++pair)
            out << r << ',' << format_double(result.eval_z[g]) << ','
                << corr_ids[pair] << ','
                << format_double(
                       run.correlations[static_cast<size_t>(hi)](pair, g))
                << '\n';
        }
      }
      out.close();
      record("simulate", name);
    }

    {
      std::ofstream out(path("sim_truth.csv"), std::ios::binary);
      out << "z,target_id,value\n";
      for (Index g = 0; g < result.eval_z.size(); ++g) {
        const double z = result.eval_z[g];
        const Matrix cov = truth_cov(spec, z);
        const Matrix corr = truth_corr(spec, z);
        for (Index j = 0; j < 3; ++j)
          out << format_double(z) << ",var_" << (j + 1) << ','
              << format_double(cov(j, j)) << '\n';
        out << format_double(z) << ',' << corr_ids[0] << ','
            << format_double(corr(0, 1)) << '\n';
        out << format_double(z) << ',' << corr_ids[1] << ','
            << format_double(corr(0, 2)) << '\n';
        out << format_double(z) << ',' << corr_ids[2] << ','
            << format_double(corr(1, 2)) << '\n';
      }
      out.close();
      record("simulate", "sim_truth.csv");
    }

    if (mc.tune_grid.size() > 0) {
      std::ofstream out(path("sim_loss_curves.csv"), std::ios::binary);
      out << "run,h,loss,target_id\n";
      for (size_t r = 0; r < result.runs.size(); ++r)
        for (const LossCurve& curve : result.runs[r].loss_curves)
          for (Index i = 0; i < curve.candidates.size(); ++i)
            out << r << ',' << format_double(curve.candidates[i]) << ','
                << format_double(curve.losses[i]) << ',' << curve.target
                << '\n';
      out.close();
      record("simulate", "sim_loss_curves.csv");

      std::ofstream sel(path("sim_selected.csv"), std::ios::binary);
      sel << "run,target_id,h\n";
      for (size_t r = 0; r < result.runs.size(); ++r)
        for (const LossCurve& curve : result.runs[r].loss_curves)
          sel << r << ',' << curve.target << ','
              << format_double(curve.selected()) << '\n';
      sel.close();
      record("simulate", "sim_selected.csv");
    }
  }

  void run_report() {
    const std::string file = path("diagnostics.csv");
    if (!fs::exists(file))
      throw ConfigError("report: " + file + " not found; run monitor first");

    CsvSchema diag_schema{"timestamp", "z", {"d2", "alarm"}};
    const std::vector<TimedRecord> rows = load_csv(file, diag_schema);
    const Index dof = static_cast<Index>(config_.output_cols.size());
    if (dof < 1)
      throw ConfigError("report: output_cols needed to size the threshold");

    DiagnosticSeries series;
    series.dof = dof;
    series.threshold = chi2_quantile(dof, config_.quantile);
    for (const TimedRecord& r : rows) {
      const double d2 = r.x[0];
      series.points.push_back({r.timestamp, r.z, d2, d2 > series.threshold,
                               Phase::I});
    }
    const AlarmReport report = alarm_report(series, config_.z_split);
    write_report_json(path("report.json"), regime_from_string(config_.regime),
                      series, report);
    record("report", "report.json");
  }

  void write_manifest(const PipelineResult& result) const {
    json doc;
    doc["status"] = result.ok ? "complete" : "incomplete";
    if (!result.ok) doc["error"] = result.error;
    doc["config_hash"] = text_hash(serialize_config(config_));
    doc["seed"] = config_.seed;
    doc["stages"] = config_.stages;
    doc["created_unix"] =
        static_cast<std::int64_t>(::time(nullptr));
    doc["artifacts"] = json::array();
    for (const StageArtifact& a : result.artifacts) {
      json entry;
      entry["stage"] = a.stage;
      entry["name"] = a.name;
      entry["path"] = a.path;
      entry["hash"] = a.hash;
      doc["artifacts"].push_back(entry);
    }
    std::ofstream out((out_ / "manifest.json").string(), std::ios::binary);
    out << doc.dump(2) << '\n';
  }

  RunConfig config_;
  PipelineOptions options_;
  fs::path out_;

  std::optional<AlignedDataset> dataset_;
  Vector mean_bandwidths_;
  BandwidthMatrix cov_bandwidths_;
  std::vector<StageArtifact> artifacts_;
};

}  // namespace

PipelineResult run_pipeline(const RunConfig& config,
                            const PipelineOptions& options) {
  Pipeline pipeline(config, options);
  return pipeline.run();
}

}  // namespace condcov
