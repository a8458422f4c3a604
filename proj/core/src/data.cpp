// SPDX-License-Identifier: Apache-2.0
#include "decsim/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "decsim/error.hpp"
#include "decsim/rng.hpp"

namespace decsim {
namespace {

constexpr std::uint64_t kShardStream = 0x5348415244ULL;
constexpr std::uint64_t kBatchStream = 0x4241544348ULL;
constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;
constexpr std::uint64_t kDataStream = 0x44415441ULL;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> ids) {
  Dataset out;
  out.input_dim = data.input_dim;
  out.n_classes = data.n_classes;
  out.inputs.reserve(ids.size() * static_cast<std::size_t>(data.input_dim));
  out.labels.reserve(ids.size());
  for (auto id : ids) {
    const auto r = data.row(id);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[id]);
  }
  return out;
}

}  // namespace

void validate(const DatasetSpec& spec) {
  if (spec.n_classes < 2) throw ConfigError(fmt::format("dataset n_classes must be >= 2 (got {})", spec.n_classes));
  if (spec.input_dim < spec.n_classes) {
    throw ConfigError(fmt::format("dataset input_dim ({}) must be >= n_classes ({}) for simplex class means",
                                  spec.input_dim, spec.n_classes));
  }
  if (spec.n_samples < static_cast<std::size_t>(spec.n_classes)) {
    throw ConfigError(fmt::format("dataset n_samples ({}) must be >= n_classes ({})", spec.n_samples, spec.n_classes));
  }
  if (!(spec.cluster_spread >= 0.0) || !std::isfinite(spec.cluster_spread)) {
    throw ConfigError("dataset cluster_spread must be a finite value >= 0");
  }
  if (!(spec.heterogeneity >= 0.0 && spec.heterogeneity <= 1.0)) {
    throw ConfigError(fmt::format("heterogeneity must lie in [0, 1] (got {})", spec.heterogeneity));
  }
}

Dataset generate_dataset(const DatasetSpec& spec) {
  validate(spec);
  Dataset d;
  d.input_dim = spec.input_dim;
  d.n_classes = spec.n_classes;
  const auto dim = static_cast<std::size_t>(spec.input_dim);
  d.inputs.resize(spec.n_samples * dim);
  d.labels.resize(spec.n_samples);
  Rng rng(derive_seed({spec.seed, kDataStream}));
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.n_classes));
    d.labels[i] = label;
    double* x = d.inputs.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = (static_cast<int>(j) == label ? 1.0 : 0.0) + spec.cluster_spread * rng.normal();
    }
  }
  return d;
}

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open dataset '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(fmt::format("{}:1: empty dataset file", path.string()));
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw ConfigError(fmt::format("{}:1: header must be f0,...,f{{d-1}},label", path.string()));
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != fmt::format("f{}", j)) {
      throw ConfigError(fmt::format("{}:1: expected column 'f{}' but found '{}'", path.string(), j, header[j]));
    }
  }

  Dataset d;
  d.input_dim = static_cast<int>(dim);
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != dim + 1) {
      throw ConfigError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no, dim + 1, cells.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[j], &used);
        if (used != cells[j].size() || !std::isfinite(v)) throw std::invalid_argument("bad");
        d.inputs.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}:{}: column f{} is not a finite number", path.string(), line_no, j));
      }
    }
    int label = -1;
    const auto& lc = cells.back();
    const auto [ptr, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
    if (ec != std::errc{} || ptr != lc.data() + lc.size() || label < 0) {
      throw ConfigError(fmt::format("{}:{}: label must be a non-negative integer", path.string(), line_no));
    }
    d.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (d.labels.empty()) throw ConfigError(fmt::format("{}: dataset has no rows", path.string()));
  d.n_classes = std::max(2, max_label + 1);
  return d;
}

DataSplit split_holdout(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError(fmt::format("holdout fraction must lie in [0, 1) (got {})", fraction));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({seed, kSplitStream}));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  const auto n_train = data.size() - n_test;
  std::vector<std::size_t> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_ids(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  return {subset(data, train_ids), subset(data, test_ids)};
}

ShardPlan shard(std::size_t n_samples, int n_workers, double heterogeneity, std::span<const int> labels,
                std::uint64_t seed) {
  if (n_workers < 1) throw ConfigError(fmt::format("n_workers must be >= 1 (got {})", n_workers));
  const auto workers = static_cast<std::size_t>(n_workers);
  if (workers > n_samples) {
    throw ConfigError(fmt::format("n_workers ({}) exceeds the number of samples ({})", n_workers, n_samples));
  }
  if (labels.size() < n_samples) throw ConfigError("label vector shorter than n_samples");
  if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) {
    throw ConfigError(fmt::format("heterogeneity must lie in [0, 1] (got {})", heterogeneity));
  }

  const std::size_t size = n_samples / workers;
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({seed, kShardStream}));
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(size * workers);

  const auto sorted_per_worker =
      std::min(size, static_cast<std::size_t>(std::llround(heterogeneity * static_cast<double>(size))));
  const std::size_t random_per_worker = size - sorted_per_worker;
  const auto split = order.begin() + static_cast<std::ptrdiff_t>(sorted_per_worker * workers);
  std::stable_sort(order.begin(), split, [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  ShardPlan plan;
  plan.n_workers = n_workers;
  plan.assignments.resize(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    auto& a = plan.assignments[w];
    a.reserve(size);
    const auto s0 = order.begin() + static_cast<std::ptrdiff_t>(w * sorted_per_worker);
    a.insert(a.end(), s0, s0 + static_cast<std::ptrdiff_t>(sorted_per_worker));
    const auto r0 = split + static_cast<std::ptrdiff_t>(w * random_per_worker);
    a.insert(a.end(), r0, r0 + static_cast<std::ptrdiff_t>(random_per_worker));
    std::sort(a.begin(), a.end());
  }
  return plan;
}

std::size_t steps_per_epoch(const ShardPlan& plan, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (batch_size > plan.shard_size()) {
    throw ConfigError(fmt::format("batch_size ({}) exceeds shard size ({})", batch_size, plan.shard_size()));
  }
  return plan.shard_size() / batch_size;
}

std::vector<std::size_t> batch_indices(const ShardPlan& plan, int worker, std::size_t batch_size, int epoch,
                                       std::size_t step, std::uint64_t seed) {
  const std::size_t steps = steps_per_epoch(plan, batch_size);
  if (worker < 0 || worker >= plan.n_workers) throw ConfigError(fmt::format("worker {} out of range", worker));
  if (step >= steps) throw ConfigError(fmt::format("step {} outside epoch of {} steps", step, steps));
  std::vector<std::size_t> perm = plan.assignments[static_cast<std::size_t>(worker)];
  Rng rng(derive_seed({seed, kBatchStream, static_cast<std::uint64_t>(worker), static_cast<std::uint64_t>(epoch)}));
  rng.shuffle(std::span<std::size_t>(perm));
  const auto first = perm.begin() + static_cast<std::ptrdiff_t>(step * batch_size);
  return {first, first + static_cast<std::ptrdiff_t>(batch_size)};
}

Batch next_batch(const Dataset& data, const ShardPlan& plan, int worker, std::size_t batch_size, int epoch,
                 std::size_t step, std::uint64_t seed) {
  const auto ids = batch_indices(plan, worker, batch_size, epoch, step, seed);
  Batch b;
  b.input_dim = static_cast<std::size_t>(data.input_dim);
  b.inputs.reserve(ids.size() * b.input_dim);
  b.labels.reserve(ids.size());
  for (auto id : ids) {
    const auto r = data.row(id);
    b.inputs.insert(b.inputs.end(), r.begin(), r.end());
    b.labels.push_back(data.labels[id]);
  }
  return b;
}

double label_entropy(std::span<const std::size_t> indices, std::span<const int> labels, int n_classes) {
  if (indices.empty()) return 0.0;
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
  for (auto i : indices) counts[static_cast<std::size_t>(labels[i])] += 1.0;
  double h = 0.0;
  const auto total = static_cast<double>(indices.size());
  for (double c : counts) {
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

}  // namespace decsim
