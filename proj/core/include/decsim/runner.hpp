// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-level entry points shared by the CLI and the tests. Each returns a
// process exit code and writes human-readable diagnostics to `err`.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "decsim/config.hpp"
#include "decsim/engine.hpp"
#include "decsim/topology.hpp"

namespace decsim {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitDivergence = 3, kExitIo = 4 };

/// Runs one experiment and writes its artifacts under config.out.
RunSummary run_single(const ExperimentConfig& config);

struct SweepResult {
  int exit_code = kExitOk;
  nlohmann::json summary;
};

/// Runs every cell, writes per-cell artifacts under out/cells/<run_id>/ and
/// the combined metrics.csv, ranks.csv and summary.json under out/.
SweepResult run_sweep(const SweepConfig& sweep, std::ostream& err);

/// `decsim run`: single run or sweep depending on the document.
int run_command(const std::filesystem::path& config_path, const nlohmann::json& overrides, std::ostream& out,
                std::ostream& err);

/// `decsim schedule preview`: CSV table epoch,k,lr,degree,message_volume.
int schedule_preview_command(const std::filesystem::path& config_path, const nlohmann::json& overrides,
                             std::ostream& out, std::ostream& err);
std::string schedule_preview(const ExperimentConfig& config);

/// `decsim graph dump`: topology, mixing matrix and spectral report.
nlohmann::json graph_dump(TopologyKind kind, int n, std::optional<int> k, std::optional<TorusDims> dims);

}  // namespace decsim
