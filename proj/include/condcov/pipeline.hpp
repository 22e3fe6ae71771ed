#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condcov/config.hpp"
#include "condcov/dataset.hpp"
#include "condcov/diagnostics.hpp"

namespace condcov {

struct PipelineOptions {
  bool quiet = false;
  bool verbose = false;
};

struct StageArtifact {
  std::string stage;
  std::string name;
  std::string path;
  std::string hash;
};

struct PipelineResult {
  bool ok = true;
  std::string failed_stage;
  std::string error;
  std::vector<StageArtifact> artifacts;

  int exit_code() const { return ok ? 0 : 1; }
};

/// Runs the configured stages in order, writing every artifact plus a
/// manifest (config hash, seed, artifact content hashes) into out_dir.
/// A failing stage marks the manifest incomplete and stops the run.
PipelineResult run_pipeline(const RunConfig& config,
                            const PipelineOptions& options = {});

}  // namespace condcov
