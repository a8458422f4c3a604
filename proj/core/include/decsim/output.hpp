// SPDX-License-Identifier: Apache-2.0
#pragma once

// Artifact writers: metrics.csv, metrics.ndjson, ranks.csv, summary.json.
//
// metrics.csv has one row per iteration per tensor and this fixed header:
//
//   run_id,strategy,epoch,iteration,kind,tensor,mean_train_loss,
//   test_accuracy,train_accuracy,gini,index_of_dispersion,
//   coefficient_of_variation,quartile_coefficient,zero_mean,zero_quartile_sum
//
// kind is "param" or "grad". The accuracy columns are filled on the last
// iteration of each epoch and empty otherwise. Flags are 0/1. Reals are
// written in shortest round-trip form.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "decsim/config.hpp"
#include "decsim/engine.hpp"
#include "decsim/metrics.hpp"

namespace decsim {

inline constexpr std::string_view kMetricsCsvHeader =
    "run_id,strategy,epoch,iteration,kind,tensor,mean_train_loss,test_accuracy,train_accuracy,gini,"
    "index_of_dispersion,coefficient_of_variation,quartile_coefficient,zero_mean,zero_quartile_sum";

/// CSV rows (no header, each ending in '\n') for one record.
std::string metrics_csv_rows(const MetricsRecord& r);
nlohmann::json to_json(const MetricsRecord& r);

class MetricsWriter {
 public:
  /// Opens metrics.csv and/or metrics.ndjson under `dir`. Throws IoError.
  MetricsWriter(const std::filesystem::path& dir, const std::vector<EmitFormat>& formats);
  void write(const MetricsRecord& r);
  void close();

 private:
  std::ofstream csv_;
  std::ofstream ndjson_;
  std::filesystem::path dir_;
};

/// "iteration,<strategy>..." with one row of ranks per iteration.
std::string ranks_csv(const RankTable& table);

nlohmann::json to_json(const RunSummary& s);

void write_text(const std::filesystem::path& path, std::string_view text);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void ensure_directory(const std::filesystem::path& dir);

}  // namespace decsim
