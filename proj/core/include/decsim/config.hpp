// SPDX-License-Identifier: Apache-2.0
#pragma once

// Declarative run descriptions. Configs are read from JSON or TOML, validated
// in full before any compute, and can be written back in resolved form.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "decsim/data.hpp"
#include "decsim/error.hpp"
#include "decsim/model.hpp"
#include "decsim/schedule.hpp"
#include "decsim/topology.hpp"

namespace decsim {

enum class StrategyKind {
  CentralizedComplete,
  DecentralizedComplete,
  DecentralizedRing,
  DecentralizedTorus,
  DecentralizedExponential,
  DecentralizedAdaptive,
};

/// "c_complete", "d_complete", "d_ring", "d_torus", "d_exponential", "d_adaptive".
std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view label);

enum class UpdateOrder { GradientThenAverage, AverageThenGradient };

std::string_view to_string(UpdateOrder order);
UpdateOrder parse_update_order(std::string_view name);

struct Strategy {
  StrategyKind kind = StrategyKind::DecentralizedRing;
  UpdateOrder update_order = UpdateOrder::GradientThenAverage;
  std::optional<AdaParams> ada;         // present iff kind == DecentralizedAdaptive
  std::optional<TorusDims> torus_dims;  // DecentralizedTorus only; default most-square

  bool centralized() const noexcept { return kind == StrategyKind::CentralizedComplete; }
};

void validate(const Strategy& s, int n_workers);

/// Config problem tied to a key, e.g. "/dataset/n_samples". The loader turns
/// the key into a line number of the source document.
class ConfigKeyError : public ConfigError {
 public:
  ConfigKeyError(std::string pointer, const std::string& message)
      : ConfigError(message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

struct DataConfig {
  DatasetSpec spec;                 // seed defaults to the run seed
  bool explicit_seed = false;
  double holdout_fraction = 0.2;
  std::optional<std::filesystem::path> csv;  // replaces the synthetic generator
  bool identical_shards = false;    // every worker trains on the same stream
};

enum class EmitFormat { Csv, Ndjson };

struct ExperimentConfig {
  std::string run_id;
  Strategy strategy;
  int n_workers = 8;
  ModelSpec model;                  // input/output dims come from the dataset
  DataConfig data;
  LRSchedule schedule;
  int epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  int threads = 1;
  bool capture_gradients = false;
  std::optional<double> target_accuracy;
  std::filesystem::path out;
  std::vector<EmitFormat> emit{EmitFormat::Csv};
};

struct SweepAxes {
  std::vector<std::string> strategies;  // strategy labels
  std::vector<int> n_workers;
  std::vector<std::uint64_t> seeds;
};

struct SweepConfig {
  ExperimentConfig base;
  nlohmann::json base_document;  // resolved base, reused to build each cell
  SweepAxes axes;
};

/// Parses a JSON document (already converted from TOML if needed). Unknown
/// keys are rejected. Throws ConfigKeyError.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);

/// Fully resolved config; experiment_from_json(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

/// Reads JSON or TOML (by extension) into a JSON document.
/// Throws IoError or ConfigError with a "file:line:" prefix on syntax errors.
nlohmann::json read_config_document(const std::filesystem::path& path);

/// Line of the key at a JSON pointer in the source file, if it can be found.
std::optional<int> locate_key_line(const std::filesystem::path& path, const std::string& pointer);

/// True when the document contains a "sweep" section.
bool is_sweep(const nlohmann::json& doc);

SweepConfig sweep_from_json(const nlohmann::json& doc);

/// Resolved config for one cell of a sweep.
ExperimentConfig sweep_cell(const SweepConfig& sweep, std::string_view strategy, int n_workers, std::uint64_t seed);

/// Loads `path`, applies `overrides` (merged over the document, flags win), and
/// parses. ConfigKeyErrors are rethrown as ConfigError with "file:line:".
nlohmann::json load_document(const std::filesystem::path& path, const nlohmann::json& overrides);
[[noreturn]] void rethrow_anchored(const std::filesystem::path& path, const ConfigKeyError& e);

/// Default output location: $DECSIM_OUTPUT_ROOT/<run_id>, else ./decsim-out/<run_id>.
std::filesystem::path default_output_dir(std::string_view run_id);

}  // namespace decsim
