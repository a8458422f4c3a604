#include <cmath>

#include <gtest/gtest.h>

#include "decsim/engine.hpp"
#include "decsim/error.hpp"

using namespace decsim;

namespace {

std::shared_ptr<const TensorLayout> flat(std::size_t size) {
  return std::make_shared<const TensorLayout>(std::vector<TensorSegment>{{"w", 0, size, {size}}});
}

RunState state_of(const std::vector<std::vector<double>>& values) {
  RunState s;
  const auto layout = flat(values.front().size());
  for (const auto& v : values) {
    WorkerState w{ParamVector(layout), 0};
    w.params.values = v;
    s.workers.push_back(std::move(w));
  }
  return s;
}

std::vector<ParamVector> zero_grads(const RunState& s) {
  return std::vector<ParamVector>(s.workers.size(), ParamVector(s.workers.front().params.layout));
}

Strategy strategy(StrategyKind kind, UpdateOrder order = UpdateOrder::GradientThenAverage) {
  Strategy s;
  s.kind = kind;
  s.update_order = order;
  return s;
}

ExperimentConfig small_config(StrategyKind kind) {
  ExperimentConfig c;
  c.strategy = strategy(kind);
  if (kind == StrategyKind::DecentralizedAdaptive) c.strategy.ada = AdaParams{3, 1.0, 2};
  c.n_workers = 8;
  c.model = {ModelKind::MLP, 4, 6, 3, 5};
  c.data.spec = {640, 4, 3, 0.5, 0.5, 5};
  c.schedule.base_lr = 0.1;
  c.epochs = 3;
  c.batch_size = 8;
  c.seed = 5;
  c.run_id = "engine-test";
  return c;
}

}  // namespace

TEST(SyncStep, TwoWorkerMidpoint) {
  const auto s = state_of({{0.0}, {2.0}});
  const auto mix = mixing_matrix(strategy_topology(strategy(StrategyKind::DecentralizedRing), 2, 0));
  const auto next = sync_step(s, strategy(StrategyKind::DecentralizedRing), mix, zero_grads(s), 0.1);
  EXPECT_DOUBLE_EQ(next.workers[0].params.values[0], 1.0);
  EXPECT_DOUBLE_EQ(next.workers[1].params.values[0], 1.0);
}

TEST(SyncStep, CompleteConsensusIsTheMean) {
  const auto s = state_of({{1.0, -2.0}, {4.0, 0.5}, {7.0, 3.0}, {0.0, 1.0}, {2.0, 2.0}});
  const auto st = strategy(StrategyKind::DecentralizedComplete, UpdateOrder::AverageThenGradient);
  const auto mix = mixing_matrix(strategy_topology(st, 5, 0));
  const auto next = sync_step(s, st, mix, zero_grads(s), 0.1);
  for (const auto& w : next.workers) {
    EXPECT_NEAR(w.params.values[0], 14.0 / 5.0, 1e-14);
    EXPECT_NEAR(w.params.values[1], 4.5 / 5.0, 1e-14);
  }
}

TEST(SyncStep, RingConservesTheMean) {
  const auto s = state_of({{1.0}, {5.0}, {-3.0}, {8.0}, {0.25}, {2.0}});
  const auto st = strategy(StrategyKind::DecentralizedRing);
  const auto mix = mixing_matrix(strategy_topology(st, 6, 0));
  auto next = s;
  for (int i = 0; i < 20; ++i) next = sync_step(next, st, mix, zero_grads(s), 0.1);
  double sum = 0.0;
  for (const auto& w : next.workers) sum += w.params.values[0];
  EXPECT_NEAR(sum, 13.25, 1e-12);
}

TEST(SyncStep, GradientOrderMatters) {
  const auto s = state_of({{0.0}, {0.0}, {0.0}});
  auto grads = zero_grads(s);
  grads[0].values[0] = 3.0;
  const auto gta = strategy(StrategyKind::DecentralizedRing);
  const auto atg = strategy(StrategyKind::DecentralizedRing, UpdateOrder::AverageThenGradient);
  const auto mix = mixing_matrix(fully_connected(3));
  const auto a = sync_step(s, gta, mix, grads, 1.0);
  const auto b = sync_step(s, atg, mix, grads, 1.0);
  EXPECT_NEAR(a.workers[1].params.values[0], -1.0, 1e-15);
  EXPECT_EQ(b.workers[1].params.values[0], 0.0);
  EXPECT_EQ(b.workers[0].params.values[0], -3.0);
}

TEST(SyncStep, CentralizedAveragesGradients) {
  const auto s = state_of({{1.0}, {1.0}, {1.0}, {1.0}});
  auto grads = zero_grads(s);
  for (int i = 0; i < 4; ++i) grads[static_cast<std::size_t>(i)].values[0] = i;
  const auto st = strategy(StrategyKind::CentralizedComplete);
  const auto next = sync_step(s, st, mixing_matrix(fully_connected(4)), grads, 0.5);
  for (const auto& w : next.workers) EXPECT_DOUBLE_EQ(w.params.values[0], 1.0 - 0.5 * 1.5);
}

TEST(SyncStep, NonFiniteUpdateDiverges) {
  const auto s = state_of({{0.0}, {0.0}, {0.0}});
  auto grads = zero_grads(s);
  grads[1].values[0] = std::numeric_limits<double>::infinity();
  const auto st = strategy(StrategyKind::DecentralizedRing);
  EXPECT_THROW(sync_step(s, st, mixing_matrix(fully_connected(3)), grads, 0.1), DivergenceError);
}

TEST(SyncStep, ThreadsDoNotChangeBits) {
  std::vector<std::vector<double>> v;
  for (int i = 0; i < 16; ++i) v.push_back({std::sin(i), std::cos(i * 0.7), 0.1 * i});
  const auto s = state_of(v);
  auto grads = zero_grads(s);
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i].values = {std::cos(i * 1.0), 0.5, -0.2 * i};
  const auto st = strategy(StrategyKind::DecentralizedExponential);
  const auto mix = mixing_matrix(strategy_topology(st, 16, 0));
  const auto a = sync_step(s, st, mix, grads, 0.3, 1);
  const auto b = sync_step(s, st, mix, grads, 0.3, 4);
  for (std::size_t i = 0; i < a.workers.size(); ++i) EXPECT_EQ(a.workers[i].params.values, b.workers[i].params.values);
}

TEST(Engine, StrategyDegrees) {
  EXPECT_EQ(strategy_degree(strategy(StrategyKind::DecentralizedRing), 16, 0), 2);
  EXPECT_EQ(strategy_degree(strategy(StrategyKind::DecentralizedTorus), 16, 0), 4);
  EXPECT_EQ(strategy_degree(strategy(StrategyKind::DecentralizedExponential), 16, 0), 4);
  EXPECT_EQ(strategy_degree(strategy(StrategyKind::DecentralizedComplete), 16, 0), 15);
  auto ada = strategy(StrategyKind::DecentralizedAdaptive);
  ada.ada = AdaParams{4, 1.0, 2};
  EXPECT_EQ(strategy_degree(ada, 16, 0), 8);
  EXPECT_EQ(strategy_degree(ada, 16, 1), 6);
  EXPECT_EQ(strategy_degree(ada, 16, 9), 4);
}

TEST(Engine, MessageVolumeExamples) {
  EXPECT_DOUBLE_EQ(10 * message_volume_per_iteration(strategy(StrategyKind::DecentralizedRing), 7, 2, 100), 2000.0);
  EXPECT_DOUBLE_EQ(message_volume_per_iteration(strategy(StrategyKind::DecentralizedComplete), 9, 8, 10), 80.0);
  double ada = 0.0;
  for (int k : {4, 3, 2}) ada += message_volume_per_iteration(strategy(StrategyKind::DecentralizedAdaptive), 9, 2 * k, 10);
  EXPECT_DOUBLE_EQ(ada, 180.0);
  EXPECT_DOUBLE_EQ(message_volume_per_iteration(strategy(StrategyKind::CentralizedComplete), 4, 3, 10), 15.0);
}

TEST(Engine, PlanMatchesDegreeSum) {
  auto c = small_config(StrategyKind::DecentralizedAdaptive);
  const auto plan = plan_epochs(c);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].k, 3);
  EXPECT_EQ(plan[1].k, 2);
  EXPECT_EQ(plan[2].k, 2);
  const double steps = static_cast<double>(planned_steps_per_epoch(c));
  const double size = 4 * 6 + 6 + 6 * 3 + 3;
  EXPECT_DOUBLE_EQ(total_message_volume(c), steps * size * (6 + 4 + 4));
}

TEST(Engine, ConsensusMean) {
  const auto s = state_of({{1.0, 2.0}, {3.0, 6.0}});
  EXPECT_EQ(consensus_mean(std::span<const WorkerState>(s.workers)).values, (std::vector<double>{2.0, 4.0}));
}

TEST(Engine, RunIsDeterministicAcrossThreads) {
  auto c = small_config(StrategyKind::DecentralizedTorus);
  c.n_workers = 9;
  c.data.spec.n_samples = 720;
  std::vector<double> a_loss, b_loss;
  const auto a = run_experiment(c, [&](const MetricsRecord& r) { a_loss.push_back(r.mean_train_loss); });
  c.threads = 3;
  const auto b = run_experiment(c, [&](const MetricsRecord& r) { b_loss.push_back(r.mean_train_loss); });
  EXPECT_EQ(a_loss, b_loss);
  EXPECT_EQ(a.final_params.values, b.final_params.values);
  EXPECT_FALSE(a.diverged);
}

TEST(Engine, RunEmitsOneRecordPerIteration) {
  const auto c = small_config(StrategyKind::DecentralizedRing);
  std::vector<MetricsRecord> records;
  const auto s = run_experiment(c, [&](const MetricsRecord& r) { records.push_back(r); });
  const auto steps = static_cast<std::int64_t>(planned_steps_per_epoch(c));
  ASSERT_EQ(static_cast<std::int64_t>(records.size()), 3 * steps);
  EXPECT_EQ(s.iterations, 3 * steps);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].iteration, static_cast<std::int64_t>(i) + 1);
    EXPECT_EQ(records[i].params.size(), 4u);
    EXPECT_EQ(records[i].test_accuracy.has_value(), (i + 1) % static_cast<std::size_t>(steps) == 0);
  }
  EXPECT_EQ(s.epochs.size(), 3u);
  EXPECT_DOUBLE_EQ(s.message_volume, total_message_volume(c));
}

TEST(Engine, CentralizedReplicasStayIdentical) {
  const auto c = small_config(StrategyKind::CentralizedComplete);
  run_experiment(c, [&](const MetricsRecord& r) {
    for (const auto& t : r.params) EXPECT_EQ(t.stats.gini, 0.0);
  });
}

TEST(Engine, AllStrategiesLearnSeparableData) {
  for (auto kind : {StrategyKind::CentralizedComplete, StrategyKind::DecentralizedComplete, StrategyKind::DecentralizedRing,
                    StrategyKind::DecentralizedExponential, StrategyKind::DecentralizedAdaptive}) {
    auto c = small_config(kind);
    c.model = {ModelKind::Linear, 4, std::nullopt, 3, 5};
    c.data.spec.cluster_spread = 0.05;
    c.epochs = 10;
    const auto s = run_experiment(c);
    EXPECT_DOUBLE_EQ(s.final_train_accuracy, 1.0) << to_string(kind);
  }
}

TEST(Engine, DivergenceIsReported) {
  auto c = small_config(StrategyKind::DecentralizedRing);
  c.schedule.base_lr = 1e300;
  const auto s = run_experiment(c);
  EXPECT_TRUE(s.diverged);
  EXPECT_FALSE(s.divergence_message.empty());
  EXPECT_GE(s.divergence_iteration, 1);
}

TEST(Engine, FullLatticeAdaMatchesCompleteInFirstEpoch) {
  auto ada = small_config(StrategyKind::DecentralizedAdaptive);
  ada.n_workers = 9;
  ada.data.spec.n_samples = 720;
  ada.strategy.ada = AdaParams{4, 1.0, 2};
  ada.epochs = 1;
  auto complete = ada;
  complete.strategy = strategy(StrategyKind::DecentralizedComplete);
  std::vector<double> a, b;
  const auto sa = run_experiment(ada, [&](const MetricsRecord& r) { a.push_back(r.mean_train_loss); });
  const auto sb = run_experiment(complete, [&](const MetricsRecord& r) { b.push_back(r.mean_train_loss); });
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa.final_params.values, sb.final_params.values);
}
