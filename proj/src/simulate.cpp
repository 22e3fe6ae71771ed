#include "condcov/simulate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "condcov/rng.hpp"

namespace condcov {

CorrFunc CorrFunc::constant(double value) {
  CorrFunc f;
  f.kind = CorrKind::constant;
  f.c = value;
  return f;
}

CorrFunc CorrFunc::linear(double intercept, double slope) {
  CorrFunc f;
  f.kind = CorrKind::linear;
  f.c0 = intercept;
  f.slope = slope;
  return f;
}

CorrFunc CorrFunc::logistic(double low, double high, double center,
                            double steepness) {
  CorrFunc f;
  f.kind = CorrKind::logistic;
  f.curve = {low, high, center, steepness};
  return f;
}

double CorrFunc::operator()(double z) const {
  switch (kind) {
    case CorrKind::constant: return c;
    case CorrKind::linear: return c0 + slope * z;
    case CorrKind::logistic: return curve(z);
  }
  return c;
}

Index ScenarioSpec::grid_size() const {
  return static_cast<Index>(std::llround((z_max - z_min) / z_step)) + 1;
}

void ScenarioSpec::validate() const {
  if (!(z_step > 0.0) || z_max < z_min)
    throw ParameterError("scenario grid is empty or inverted");
  if (replicates < 1) throw ParameterError("scenario needs replicates >= 1");
  if (thinning) {
    if (!(thinning->pi_low > 0.0 && thinning->pi_low <= 1.0))
      throw ParameterError("thinning pi_low must lie in (0, 1]");
    if (!(thinning->z_high > thinning->z_low))
      throw ParameterError("thinning ramp needs z_low < z_high");
  }
  for (Index g = 0; g < grid_size(); ++g) {
    const double z = grid_z(g);
    if (!(variance(z) > 0.0))
      throw ParameterError("variance function must be positive at z = " +
                           std::to_string(z));
    const Matrix corr = truth_corr(*this, z);
    for (Index j = 0; j < 3; ++j)
      for (Index k = j + 1; k < 3; ++k)
        if (std::abs(corr(j, k)) > 1.0)
          throw ParameterError("correlation outside [-1, 1] at z = " +
                               std::to_string(z));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12)
      throw ParameterError("correlation matrix not PSD at z = " +
                           std::to_string(z));
  }
}

ScenarioSpec scenario_preset(const std::string& name, int replicates) {
  ScenarioSpec spec;
  spec.replicates = replicates;
  if (name == "constant") {
    // fully z-independent covariance
    spec.variance = {1.0, 1.0, 0.0, 1.0};
    spec.rho12 = spec.rho13 = spec.rho23 = CorrFunc::constant(0.5);
  } else if (name == "linear") {
    spec.variance = {0.5, 1.5, 0.0, 1.0};
    // 0.8 at -5 C falling to 0.3 at 20 C
    spec.rho12 = spec.rho13 = spec.rho23 = CorrFunc::linear(0.7, -0.02);
  } else if (name == "logistic") {
    spec.variance = {0.5, 1.5, 0.0, 1.0};
    spec.rho12 = spec.rho13 = spec.rho23 =
        CorrFunc::logistic(0.3, 0.8, 0.0, 0.8);
  } else if (name == "mixed") {
    spec.variance = {0.5, 1.5, 0.0, 1.0};
    spec.rho12 = CorrFunc::constant(0.5);
    spec.rho13 = CorrFunc::linear(0.7, -0.02);
    spec.rho23 = CorrFunc::logistic(0.3, 0.8, 0.0, 0.8);
  } else {
    throw ParameterError("unknown scenario: " + name);
  }
  spec.validate();
  return spec;
}

Matrix truth_corr(const ScenarioSpec& spec, double z) {
  Matrix corr = Matrix::Identity(3, 3);
  corr(0, 1) = corr(1, 0) = spec.rho12(z);
  corr(0, 2) = corr(2, 0) = spec.rho13(z);
  corr(1, 2) = corr(2, 1) = spec.rho23(z);
  return corr;
}

Matrix truth_cov(const ScenarioSpec& spec, double z) {
  return spec.variance(z) * truth_corr(spec, z);
}

namespace {

// Symmetric square root; robust to semidefinite truth matrices.
Matrix matrix_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  if (eig.info() != Eigen::Success)
    throw NumericError("matrix square root failed");
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

AlignedDataset sample(const ScenarioSpec& spec, std::uint64_t seed,
                      std::uint64_t run) {
  spec.validate();
  const Index G = spec.grid_size();
  const Index n = spec.replicates;

  std::vector<double> zs;
  std::vector<Vector> rows;
  zs.reserve(static_cast<size_t>(G * n));

  for (Index g = 0; g < G; ++g) {
    const double z = spec.grid_z(g);
    Rng rng(seed, run, static_cast<std::uint64_t>(g));

    bool keep_grid = true;
    if (spec.thinning && !spec.thin_rows && z < spec.thinning->z_high)
      keep_grid = rng.uniform01() < (*spec.thinning)(z);
    if (!keep_grid) continue;

    const Matrix root = matrix_sqrt(truth_cov(spec, z));
    for (Index r = 0; r < n; ++r) {
      if (spec.thinning && spec.thin_rows && z < spec.thinning->z_high) {
        if (!(rng.uniform01() < (*spec.thinning)(z))) {
          rng.normal();  // keep the draw stream aligned
          rng.normal();
          rng.normal();
          continue;
        }
      }
      Vector xi(3);
      xi << rng.normal(), rng.normal(), rng.normal();
      zs.push_back(z);
      rows.push_back(root * xi);
    }
  }

  AlignedDataset data;
  data.meta.channel_names = {"y1", "y2", "y3"};
  data.meta.confounder_name = "z";
  data.meta.sample_period = 1.0;
  const Index total = static_cast<Index>(zs.size());
  data.X.resize(total, 3);
  data.z.resize(total);
  data.timestamps.resize(total);
  for (Index i = 0; i < total; ++i) {
    data.X.row(i) = rows[static_cast<size_t>(i)].transpose();
    data.z[i] = zs[static_cast<size_t>(i)];
    data.timestamps[i] = static_cast<double>(i);
  }
  return data;
}

MonteCarloResult monte_carlo(const ScenarioSpec& spec, int runs,
                             const MonteCarloConfig& config,
                             std::uint64_t seed) {
  if (runs < 1) throw ParameterError("monte_carlo needs runs >= 1");
  spec.validate();

  MonteCarloResult result;
  result.curve_bandwidths = config.curve_bandwidths;
  const Index G =
      static_cast<Index>(std::llround((spec.z_max - spec.z_min) / config.eval_step)) + 1;
  result.eval_z.resize(G);
  for (Index g = 0; g < G; ++g)
    result.eval_z[g] = spec.z_min + static_cast<double>(g) * config.eval_step;

  const Vector zero = Vector::Zero(3);
  MeanRecipe zero_mean;
  zero_mean.kind = MeanKind::constant;
  zero_mean.fixed_values = zero;

  const Index n_h = config.curve_bandwidths.size();
  for (int r = 0; r < runs; ++r) {
    const AlignedDataset data =
        sample(spec, seed, static_cast<std::uint64_t>(r));
    MonteCarloRun run;

    const MeanModel mean =
        MeanModel::constant_values(zero, {spec.z_min, spec.z_max});
    for (Index hi = 0; hi < n_h; ++hi) {
      CondCovModel cov =
          CondCovModel::fit(data.X, data.z, mean,
                            BandwidthMatrix::global(3, config.curve_bandwidths[hi]));
      Matrix variances(3, G);
      Matrix correlations(3, G);
      for (Index g = 0; g < G; ++g) {
        const Matrix sigma = cov.eval_cov(result.eval_z[g]);
        const Matrix corr = cov.eval_corr(result.eval_z[g]);
        for (Index j = 0; j < 3; ++j) variances(j, g) = sigma(j, j);
        correlations(0, g) = corr(0, 1);
        correlations(1, g) = corr(0, 2);
        correlations(2, g) = corr(1, 2);
      }
      run.variances.push_back(std::move(variances));
      run.correlations.push_back(std::move(correlations));
    }

    if (config.tune_grid.size() > 0) {
      const std::uint64_t split_seed =
          Rng(seed, static_cast<std::uint64_t>(r), 0x517137).next_u64();
      TuneResult tuned = tune(data, config.plan, config.tune_grid,
                              config.tune_target, zero_mean, split_seed);
      run.loss_curves = std::move(tuned.curves);
      run.selected = tuned.cov_bandwidths;
    }
    result.runs.push_back(std::move(run));
  }

  // pointwise aggregates across runs
  for (Index hi = 0; hi < n_h; ++hi) {
    Matrix mean_var = Matrix::Zero(3, G), mean_corr = Matrix::Zero(3, G);
    for (const MonteCarloRun& run : result.runs) {
      mean_var += run.variances[static_cast<size_t>(hi)];
      mean_corr += run.correlations[static_cast<size_t>(hi)];
    }
    mean_var /= static_cast<double>(runs);
    mean_corr /= static_cast<double>(runs);

    Matrix sd_var = Matrix::Zero(3, G), sd_corr = Matrix::Zero(3, G);
    if (runs > 1) {
      for (const MonteCarloRun& run : result.runs) {
        sd_var += (run.variances[static_cast<size_t>(hi)] - mean_var).array().square().matrix();
        sd_corr += (run.correlations[static_cast<size_t>(hi)] - mean_corr).array().square().matrix();
      }
      sd_var = (sd_var / static_cast<double>(runs - 1)).cwiseSqrt();
      sd_corr = (sd_corr / static_cast<double>(runs - 1)).cwiseSqrt();
    }
    result.mean_variance.push_back(std::move(mean_var));
    result.sd_variance.push_back(std::move(sd_var));
    result.mean_correlation.push_back(std::move(mean_corr));
    result.sd_correlation.push_back(std::move(sd_corr));
  }
  return result;
}

}  // namespace condcov
