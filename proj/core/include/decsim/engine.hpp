// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lockstep simulation of n workers under one synchronization strategy.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decsim/config.hpp"
#include "decsim/metrics.hpp"
#include "decsim/model.hpp"
#include "decsim/topology.hpp"

namespace decsim {

struct WorkerState {
  ParamVector params;
  std::size_t cursor = 0;  // next step within the current epoch
};

struct RunState {
  std::vector<WorkerState> workers;
  int epoch = 0;
  std::int64_t iteration = 0;  // 1-based once the first step has run
  Topology topology_now;
  std::uint64_t rng_seed = 0;
  std::string strategy_label;  // carried into divergence errors
};

/// Graph used at `epoch`. Below three workers every strategy uses the fully
/// connected graph over the available workers.
Topology strategy_topology(const Strategy& s, int n_workers, int epoch);

/// Node degree used for learning-rate scaling and message accounting.
int strategy_degree(const Strategy& s, int n_workers, int epoch);

/// One synchronization round. `grads[i]` is worker i's gradient for this
/// iteration. Neighbor sums run in ascending j; the result does not depend on
/// `threads`. Throws DivergenceError when any parameter becomes non-finite.
RunState sync_step(RunState state, const Strategy& strategy, const MixingMatrix& mix,
                   std::span<const ParamVector> grads, double lr, int threads = 1);

/// Average of all replicas; exact when the replicas agree.
ParamVector consensus_mean(std::span<const ParamVector> replicas);
ParamVector consensus_mean(std::span<const WorkerState> workers);

/// Parameter elements sent by one worker in one iteration.
double message_volume_per_iteration(const Strategy& s, int n_workers, int degree, std::size_t param_count);

struct EpochPlan {
  int epoch = 0;
  int k = 0;  // lattice coordination number for Ada, node degree otherwise
  int degree = 0;
  double lr = 0.0;
  double message_volume = 0.0;  // per worker, this epoch
};

/// Per-epoch degree, learning rate and message volume that run_experiment uses.
std::vector<EpochPlan> plan_epochs(const ExperimentConfig& config);

/// Per-worker parameter elements sent over the whole run.
double total_message_volume(const ExperimentConfig& config);

std::size_t planned_steps_per_epoch(const ExperimentConfig& config);

struct EpochResult {
  int epoch = 0;
  double mean_train_loss = 0.0;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  int degree = 0;
  double lr = 0.0;
};

struct RunSummary {
  std::string run_id;
  std::string strategy;
  int n_workers = 0;
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  std::int64_t iterations = 0;
  std::vector<EpochResult> epochs;
  double final_test_accuracy = 0.0;
  double final_train_accuracy = 0.0;
  double final_loss = 0.0;
  std::optional<int> epochs_to_target;  // epochs completed when the target was first met
  double message_volume = 0.0;          // per worker
  ParamVector final_params;             // mean over workers
  bool diverged = false;
  std::string divergence_message;
  int divergence_epoch = 0;
  std::int64_t divergence_iteration = 0;
  double wall_seconds = 0.0;
};

using RecordSink = std::function<void(const MetricsRecord&)>;

/// Runs one experiment and streams one record per iteration to `sink`. A
/// diverged run stops early and is reported in the summary rather than thrown.
RunSummary run_experiment(const ExperimentConfig& config, const RecordSink& sink = {});

}  // namespace decsim
