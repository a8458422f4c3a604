// SPDX-License-Identifier: Apache-2.0
#include "decsim/engine.hpp"

#include <chrono>
#include <cmath>
#include <string_view>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "decsim/data.hpp"

namespace decsim {
namespace {

template <class Fn>
void for_each_worker(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  tbb::task_arena arena(threads);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(0, n), [&](const tbb::blocked_range<int>& r) {
      for (int i = r.begin(); i != r.end(); ++i) fn(i);
    });
  });
}

TopologyKind topology_kind_of(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::CentralizedComplete:
    case StrategyKind::DecentralizedComplete: return TopologyKind::Complete;
    case StrategyKind::DecentralizedRing: return TopologyKind::Ring;
    case StrategyKind::DecentralizedTorus: return TopologyKind::Torus;
    case StrategyKind::DecentralizedExponential: return TopologyKind::Exponential;
    case StrategyKind::DecentralizedAdaptive: return TopologyKind::RingLattice;
  }
  return TopologyKind::Complete;
}

[[noreturn]] void diverged(const RunState& s, std::size_t worker, std::string_view what) {
  throw DivergenceError(fmt::format("strategy {} diverged at epoch {}, iteration {}: worker {} has a non-finite {}",
                                    s.strategy_label, s.epoch, s.iteration, worker, what),
                        s.strategy_label, s.epoch, s.iteration);
}

bool all_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const RunState& s) {
  for (std::size_t w = 0; w < s.workers.size(); ++w) {
    if (!all_finite(s.workers[w].params.values)) diverged(s, w, "parameter");
  }
}

void check_finite(std::span<const ParamVector> tensors, const RunState& s, std::string_view what) {
  for (std::size_t w = 0; w < tensors.size(); ++w) {
    if (!all_finite(tensors[w].values)) diverged(s, w, what);
  }
}

struct LoadedData {
  Dataset train;
  Dataset test;
  ShardPlan plan;
};

LoadedData load_data(const ExperimentConfig& c) {
  Dataset full = c.data.csv ? load_csv_dataset(*c.data.csv) : generate_dataset(c.data.spec);
  auto split = split_holdout(full, c.data.holdout_fraction, c.data.spec.seed);
  ShardPlan plan = c.data.identical_shards
                       ? shard(split.train.size(), 1, 0.0, split.train.labels, c.data.spec.seed)
                       : shard(split.train.size(), c.n_workers, c.data.spec.heterogeneity, split.train.labels,
                               c.data.spec.seed);
  return {std::move(split.train), std::move(split.test), std::move(plan)};
}

std::vector<TensorDispersion> zero_dispersion(const TensorLayout& layout) {
  std::vector<TensorDispersion> out;
  for (const auto& s : layout.segments()) out.push_back({s.name, DispersionStats{}});
  return out;
}

}  // namespace

Topology strategy_topology(const Strategy& s, int n_workers, int epoch) {
  if (n_workers < 3) return fully_connected(n_workers);
  const auto kind = topology_kind_of(s.kind);
  if (kind == TopologyKind::RingLattice) return build_topology(kind, n_workers, ada_degree(*s.ada, epoch));
  if (kind == TopologyKind::Torus) return build_topology(kind, n_workers, std::nullopt, s.torus_dims);
  return build_topology(kind, n_workers);
}

int strategy_degree(const Strategy& s, int n_workers, int epoch) {
  return static_cast<int>(strategy_topology(s, n_workers, epoch).degree(0));
}

RunState sync_step(RunState state, const Strategy& strategy, const MixingMatrix& mix,
                   std::span<const ParamVector> grads, double lr, int threads) {
  const int n = static_cast<int>(state.workers.size());
  if (static_cast<int>(grads.size()) != n) {
    throw std::invalid_argument(fmt::format("sync_step: {} gradients for {} workers", grads.size(), n));
  }
  if (n == 0) return state;
  const std::size_t p = state.workers.front().params.size();

  if (strategy.centralized()) {
    // g_bar = g_0 + sum_j (g_j - g_0) / n, exact when all gradients agree
    std::vector<double> gbar(grads[0].values);
    const double inv = 1.0 / static_cast<double>(n);
    for (int j = 1; j < n; ++j) {
      for (std::size_t e = 0; e < p; ++e) gbar[e] += inv * (grads[j].values[e] - grads[0].values[e]);
    }
    for_each_worker(n, threads, [&](int i) {
      auto& theta = state.workers[static_cast<std::size_t>(i)].params.values;
      for (std::size_t e = 0; e < p; ++e) theta[e] -= lr * gbar[e];
    });
    check_finite(state);
    return state;
  }

  if (mix.n() != n) throw std::invalid_argument(fmt::format("sync_step: mixing matrix for {} workers, have {}", mix.n(), n));

  // y_j is what worker j sends: its locally stepped parameters, or the
  // parameters themselves when averaging comes first.
  const bool gradient_first = strategy.update_order == UpdateOrder::GradientThenAverage;
  std::vector<std::vector<double>> y(static_cast<std::size_t>(n));
  for_each_worker(n, threads, [&](int j) {
    const auto& theta = state.workers[static_cast<std::size_t>(j)].params.values;
    auto& out = y[static_cast<std::size_t>(j)];
    out = theta;
    if (gradient_first) {
      for (std::size_t e = 0; e < p; ++e) out[e] -= lr * grads[j].values[e];
    }
  });

  // sum_j E_ij y_j written as y_i + sum_{j != i} E_ij (y_j - y_i): equal for
  // row-stochastic E and exact when the replicas agree
  for_each_worker(n, threads, [&](int i) {
    const auto& yi = y[static_cast<std::size_t>(i)];
    auto& theta = state.workers[static_cast<std::size_t>(i)].params.values;
    theta = yi;
    const auto row = mix.row(i);
    for (int j = 0; j < n; ++j) {
      const double w = row[static_cast<std::size_t>(j)];
      if (j == i || w == 0.0) continue;
      const auto& yj = y[static_cast<std::size_t>(j)];
      for (std::size_t e = 0; e < p; ++e) theta[e] += w * (yj[e] - yi[e]);
    }
    if (!gradient_first) {
      for (std::size_t e = 0; e < p; ++e) theta[e] -= lr * grads[i].values[e];
    }
  });
  check_finite(state);
  return state;
}

ParamVector consensus_mean(std::span<const ParamVector> replicas) {
  if (replicas.empty()) throw std::invalid_argument("consensus_mean of no replicas");
  ParamVector mean = replicas.front();
  const double inv = 1.0 / static_cast<double>(replicas.size());
  for (std::size_t j = 1; j < replicas.size(); ++j) {
    for (std::size_t e = 0; e < mean.size(); ++e) {
      mean.values[e] += inv * (replicas[j].values[e] - replicas[0].values[e]);
    }
  }
  return mean;
}

ParamVector consensus_mean(std::span<const WorkerState> workers) {
  std::vector<ParamVector> params;
  params.reserve(workers.size());
  for (const auto& w : workers) params.push_back(w.params);
  return consensus_mean(params);
}

double message_volume_per_iteration(const Strategy& s, int n_workers, int degree, std::size_t param_count) {
  const auto size = static_cast<double>(param_count);
  if (s.centralized()) {
    return 2.0 * size * static_cast<double>(n_workers - 1) / static_cast<double>(n_workers);
  }
  return static_cast<double>(degree) * size;
}

std::size_t planned_steps_per_epoch(const ExperimentConfig& c) {
  if (c.data.csv) return steps_per_epoch(load_data(c).plan, c.batch_size);
  const auto n = c.data.spec.n_samples;
  const auto train = n - static_cast<std::size_t>(std::floor(c.data.holdout_fraction * static_cast<double>(n)));
  const auto shard_size = c.data.identical_shards ? train : train / static_cast<std::size_t>(c.n_workers);
  if (c.batch_size == 0 || c.batch_size > shard_size) {
    throw ConfigError(fmt::format("batch_size ({}) exceeds shard size ({})", c.batch_size, shard_size));
  }
  return shard_size / c.batch_size;
}

std::vector<EpochPlan> plan_epochs(const ExperimentConfig& c) {
  ModelSpec spec = c.model;
  if (c.data.csv) {
    const auto d = load_csv_dataset(*c.data.csv);
    spec.input_dim = d.input_dim;
    spec.output_dim = d.n_classes;
  }
  const auto param_count = make_layout(spec)->size();
  const auto steps = static_cast<double>(planned_steps_per_epoch(c));
  std::vector<EpochPlan> out;
  out.reserve(static_cast<std::size_t>(c.epochs));
  for (int e = 0; e < c.epochs; ++e) {
    EpochPlan p;
    p.epoch = e;
    p.degree = strategy_degree(c.strategy, c.n_workers, e);
    p.k = c.strategy.ada && c.n_workers >= 3 ? ada_degree(*c.strategy.ada, e) : p.degree;
    p.lr = effective_lr(c.schedule, e, c.batch_size, p.degree);
    p.message_volume = steps * message_volume_per_iteration(c.strategy, c.n_workers, p.degree, param_count);
    out.push_back(p);
  }
  return out;
}

double total_message_volume(const ExperimentConfig& config) {
  double total = 0.0;
  for (const auto& p : plan_epochs(config)) total += p.message_volume;
  return total;
}

RunSummary run_experiment(const ExperimentConfig& config, const RecordSink& sink) {
  const auto started = std::chrono::steady_clock::now();
  const auto data = load_data(config);
  ModelSpec spec = config.model;
  spec.input_dim = data.train.input_dim;
  spec.output_dim = data.train.n_classes;
  validate(spec);

  const int n = config.n_workers;
  const auto label = std::string(to_string(config.strategy.kind));
  const std::size_t steps = steps_per_epoch(data.plan, config.batch_size);
  const std::uint64_t batch_seed = config.seed;

  RunSummary summary;
  summary.run_id = config.run_id;
  summary.strategy = label;
  summary.n_workers = n;
  summary.seed = config.seed;

  RunState state;
  state.rng_seed = config.seed;
  state.strategy_label = label;
  const ParamVector init = init_params(spec);
  summary.param_count = init.size();
  state.workers.assign(static_cast<std::size_t>(n), WorkerState{init, 0});

  std::vector<ParamVector> grads(static_cast<std::size_t>(n));
  std::vector<double> losses(static_cast<std::size_t>(n));
  std::vector<ParamVector> sent(static_cast<std::size_t>(n));
  MixingMatrix mix;

  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      state.epoch = epoch;
      if (epoch == 0 || config.strategy.ada) {
        state.topology_now = strategy_topology(config.strategy, n, epoch);
        mix = mixing_matrix(state.topology_now);
      }
      const int degree = static_cast<int>(state.topology_now.degree(0));
      const double lr = effective_lr(config.schedule, epoch, config.batch_size, degree);
      double epoch_loss = 0.0;

      for (std::size_t step = 0; step < steps; ++step) {
        ++state.iteration;
        for_each_worker(n, config.threads, [&](int w) {
          const auto idx = static_cast<std::size_t>(w);
          const int shard_id = config.data.identical_shards ? 0 : w;
          const Batch batch = next_batch(data.train, data.plan, shard_id, config.batch_size, epoch, step, batch_seed);
          auto lg = loss_and_grad(state.workers[idx].params, spec, batch);
          losses[idx] = lg.loss;
          grads[idx] = std::move(lg.grad);
          state.workers[idx].cursor = step + 1;
        });
        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= static_cast<double>(n);
        epoch_loss += loss;

        MetricsRecord rec;
        rec.run_id = config.run_id;
        rec.strategy = label;
        rec.epoch = epoch;
        rec.iteration = state.iteration;
        rec.mean_train_loss = loss;
        if (n >= 2) {
          // norms of what is about to be averaged
          const bool stepped = !config.strategy.centralized() &&
                               config.strategy.update_order == UpdateOrder::GradientThenAverage;
          for (int w = 0; w < n; ++w) {
            const auto idx = static_cast<std::size_t>(w);
            sent[idx] = state.workers[idx].params;
            if (stepped) {
              for (std::size_t e = 0; e < sent[idx].size(); ++e) sent[idx].values[e] -= lr * grads[idx].values[e];
            }
          }
          check_finite(sent, state, "parameter");
          rec.params = capture_dispersion(sent);
          if (config.capture_gradients) {
            check_finite(grads, state, "gradient");
            rec.grads = capture_dispersion(grads);
          }
        } else {
          rec.params = zero_dispersion(*init.layout);
          if (config.capture_gradients) rec.grads = zero_dispersion(*init.layout);
        }

        state = sync_step(std::move(state), config.strategy, mix, grads, lr, config.threads);

        if (step + 1 == steps) {
          const ParamVector mean = consensus_mean(state.workers);
          EpochResult er;
          er.epoch = epoch;
          er.mean_train_loss = epoch_loss / static_cast<double>(steps);
          er.train_accuracy = accuracy(mean, spec, data.train.inputs, data.train.labels);
          // without a holdout the training set stands in for the test set
          er.test_accuracy = data.test.size() > 0 ? accuracy(mean, spec, data.test.inputs, data.test.labels)
                                                  : er.train_accuracy;
          er.degree = degree;
          er.lr = lr;
          rec.test_accuracy = er.test_accuracy;
          rec.train_accuracy = er.train_accuracy;
          summary.epochs.push_back(er);
          if (config.target_accuracy && !summary.epochs_to_target && er.test_accuracy >= *config.target_accuracy) {
            summary.epochs_to_target = epoch + 1;
          }
        }
        if (sink) sink(rec);
        summary.message_volume += message_volume_per_iteration(config.strategy, n, degree, init.size());
      }
      for (auto& w : state.workers) w.cursor = 0;
    }
  } catch (const DivergenceError& e) {
    summary.diverged = true;
    summary.divergence_message = e.what();
    summary.divergence_epoch = e.epoch();
    summary.divergence_iteration = e.iteration();
  } catch (const NumericalError& e) {
    summary.diverged = true;
    summary.divergence_message = fmt::format("strategy {} diverged at epoch {}, iteration {}: {}", label, state.epoch,
                                             state.iteration, e.what());
    summary.divergence_epoch = state.epoch;
    summary.divergence_iteration = state.iteration;
  }

  summary.iterations = state.iteration;
  summary.final_params = consensus_mean(state.workers);
  if (!summary.epochs.empty()) {
    summary.final_test_accuracy = summary.epochs.back().test_accuracy;
    summary.final_train_accuracy = summary.epochs.back().train_accuracy;
    summary.final_loss = summary.epochs.back().mean_train_loss;
  }
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return summary;
}

}  // namespace decsim
