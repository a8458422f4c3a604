#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "decsim/error.hpp"
#include "decsim/metrics.hpp"
#include "decsim/rng.hpp"

using namespace decsim;

namespace {

double brute_gini(const std::vector<double>& x) {
  double num = 0.0, mean = 0.0;
  for (double a : x) {
    mean += a;
    for (double b : x) num += std::abs(a - b);
  }
  mean /= static_cast<double>(x.size());
  return num / (2.0 * static_cast<double>(x.size() * x.size()) * mean);
}

MetricsRecord record(std::int64_t iteration, double g) {
  MetricsRecord r;
  r.iteration = iteration;
  r.params.push_back({"w", DispersionStats{g, 0, 0, 0, false, false}});
  return r;
}

}  // namespace

TEST(Gini, ConstantIsZero) {
  EXPECT_EQ(gini(std::vector<double>(7, 2.5)), 0.0);
}

TEST(Gini, TwoPoints) {
  EXPECT_DOUBLE_EQ(gini(std::vector<double>{0.0, 1.0}), 0.5);
}

TEST(Gini, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(64);
    for (auto& v : x) v = rng.uniform(0.0, 10.0);
    EXPECT_NEAR(gini(x), brute_gini(x), 1e-12);
  }
}

TEST(Gini, ErrorsAndConventions) {
  EXPECT_THROW(gini(std::vector<double>{1.0, -1.0}), DomainError);
  EXPECT_EQ(gini(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_TRUE(dispersion(std::vector<double>{0.0, 0.0}).zero_mean);
  EXPECT_TRUE(dispersion(std::vector<double>{0.0, 0.0}).zero_quartile_sum);
}

TEST(Dispersion, ConstantIsZero) {
  const std::vector<double> c(5, 3.0);
  EXPECT_EQ(index_of_dispersion(c), 0.0);
  EXPECT_EQ(coefficient_of_variation(c), 0.0);
  EXPECT_EQ(quartile_coefficient(c), 0.0);
}

TEST(Dispersion, HandComputed) {
  const std::vector<double> x{1.0, 3.0};
  EXPECT_DOUBLE_EQ(index_of_dispersion(x), 0.5);
  EXPECT_DOUBLE_EQ(coefficient_of_variation(x), 0.5);
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  const auto [q1, q3] = quartiles(y);
  EXPECT_DOUBLE_EQ(q1, 1.75);
  EXPECT_DOUBLE_EQ(q3, 3.25);
  EXPECT_DOUBLE_EQ(quartile_coefficient(y), 0.3);
}

TEST(Dispersion, ScaleInvariance) {
  Rng rng(8);
  std::vector<double> x(33);
  for (auto& v : x) v = rng.uniform(0.1, 4.0);
  auto y = x;
  for (auto& v : y) v *= 7.0;
  EXPECT_NEAR(gini(x), gini(y), 1e-12);
  EXPECT_NEAR(coefficient_of_variation(x), coefficient_of_variation(y), 1e-12);
  EXPECT_NEAR(quartile_coefficient(x), quartile_coefficient(y), 1e-12);
  EXPECT_NEAR(7.0 * index_of_dispersion(x), index_of_dispersion(y), 1e-10);
}

TEST(Capture, IdenticalReplicasAreZero) {
  auto layout = std::make_shared<const TensorLayout>(
      std::vector<TensorSegment>{{"a", 0, 2, {2}}, {"b", 2, 1, {1}}});
  ParamVector p(layout);
  p.values = {1.0, 2.0, 3.0};
  const std::vector<ParamVector> replicas(4, p);
  for (const auto& t : capture_dispersion(replicas)) {
    EXPECT_EQ(t.stats.gini, 0.0);
    EXPECT_EQ(t.stats.index_of_dispersion, 0.0);
    EXPECT_EQ(t.stats.coefficient_of_variation, 0.0);
    EXPECT_EQ(t.stats.quartile_coefficient, 0.0);
  }
}

TEST(Capture, NormsFeedGini) {
  auto layout = std::make_shared<const TensorLayout>(std::vector<TensorSegment>{{"w", 0, 2, {2}}});
  ParamVector a(layout), b(layout);
  a.values = {3.0, 4.0};
  const auto d = capture_dispersion(std::vector<ParamVector>{a, b});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].tensor, "w");
  EXPECT_DOUBLE_EQ(d[0].stats.gini, 0.5);
}

TEST(Rank, TwoStrategies) {
  std::vector<MetricsRecord> low, high;
  for (int i = 1; i <= 5; ++i) {
    low.push_back(record(i, 0.1));
    high.push_back(record(i, 0.3));
  }
  const std::vector<StrategyStream> streams{{"b", high}, {"a", low}};
  const auto t = rank_strategies(streams);
  ASSERT_EQ(t.iterations.size(), 5u);
  for (const auto& row : t.ranks) EXPECT_EQ(row, (std::vector<int>{2, 1}));
}

TEST(Rank, RecoversGeneratingPermutation) {
  Rng rng(12);
  const int strategies = 4, iterations = 50;
  std::vector<std::vector<int>> truth(iterations);
  std::vector<std::vector<MetricsRecord>> data(strategies);
  for (int it = 0; it < iterations; ++it) {
    std::vector<int> perm(strategies);
    std::iota(perm.begin(), perm.end(), 1);
    rng.shuffle(std::span<int>(perm));
    truth[static_cast<std::size_t>(it)] = perm;
    for (int s = 0; s < strategies; ++s) data[static_cast<std::size_t>(s)].push_back(record(it + 1, 0.1 * perm[static_cast<std::size_t>(s)]));
  }
  std::vector<StrategyStream> streams;
  for (int s = 0; s < strategies; ++s) streams.push_back({"s" + std::to_string(s), data[static_cast<std::size_t>(s)]});
  const auto t = rank_strategies(streams);
  for (int it = 0; it < iterations; ++it) {
    const auto& row = t.ranks[static_cast<std::size_t>(it)];
    EXPECT_EQ(row, truth[static_cast<std::size_t>(it)]);
    EXPECT_EQ(std::accumulate(row.begin(), row.end(), 0), 10);
  }
}

TEST(Rank, MisalignedStreamsName) {
  std::vector<MetricsRecord> a{record(1, 0.1), record(2, 0.1), record(3, 0.1)};
  std::vector<MetricsRecord> b{record(1, 0.2), record(3, 0.2)};
  const std::vector<StrategyStream> streams{{"a", a}, {"b", b}};
  try {
    rank_strategies(streams);
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.missing_iteration(), 2);
  }
}
