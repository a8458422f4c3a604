// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic classification data, held-out splitting, and per-worker sharding.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "decsim/model.hpp"

namespace decsim {

struct DatasetSpec {
  std::size_t n_samples = 1000;
  int input_dim = 8;
  int n_classes = 4;
  double cluster_spread = 1.0;
  /// 0 = IID shards, 1 = label-sorted shards.
  double heterogeneity = 0.0;
  std::uint64_t seed = 0;
};

void validate(const DatasetSpec& spec);

/// Row-major features with integer labels in [0, n_classes).
struct Dataset {
  int input_dim = 0;
  int n_classes = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * static_cast<std::size_t>(input_dim),
                                                   static_cast<std::size_t>(input_dim));
  }
};

/// Gaussian clusters around the unit vectors e_0..e_{C-1} with standard
/// deviation cluster_spread. Sample i has label i mod C, so classes are
/// balanced to within one sample.
Dataset generate_dataset(const DatasetSpec& spec);

/// Reads a CSV with header f0,...,f{d-1},label. Throws IoError / ConfigError.
Dataset load_csv_dataset(const std::filesystem::path& path);

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Seeded random split; the last `fraction` of a shuffled order is held out.
DataSplit split_holdout(const Dataset& data, double fraction, std::uint64_t seed);

struct ShardPlan {
  int n_workers = 0;
  std::vector<std::vector<std::size_t>> assignments;

  std::size_t shard_size() const { return assignments.empty() ? 0 : assignments.front().size(); }
};

/// Equal-size shards over [0, n_samples). A seeded shuffle fixes the sample
/// order and the tail beyond n_workers * floor(n_samples / n_workers) is
/// dropped. Each shard then takes round(h * size) samples from a
/// label-sorted pool (contiguous per worker) and the rest from the shuffled
/// remainder. Throws ConfigError when n_workers > n_samples.
ShardPlan shard(std::size_t n_samples, int n_workers, double heterogeneity, std::span<const int> labels,
                std::uint64_t seed);

std::size_t steps_per_epoch(const ShardPlan& plan, std::size_t batch_size);

/// Sample ids of one batch: the worker's shard is reshuffled per (seed, worker,
/// epoch) and cut into consecutive batches.
std::vector<std::size_t> batch_indices(const ShardPlan& plan, int worker, std::size_t batch_size, int epoch,
                                       std::size_t step, std::uint64_t seed);

Batch next_batch(const Dataset& data, const ShardPlan& plan, int worker, std::size_t batch_size, int epoch,
                 std::size_t step, std::uint64_t seed);

/// Shannon entropy (nats) of the label histogram of one shard.
double label_entropy(std::span<const std::size_t> indices, std::span<const int> labels, int n_classes);

}  // namespace decsim
