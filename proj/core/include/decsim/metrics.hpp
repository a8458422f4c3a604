// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cross-replica dispersion statistics and the per-iteration strategy ranking.
//
// All four statistics take one scalar per replica (a tensor's L2 norm) and use
// population moments. When a denominator is zero the statistic is reported as
// 0 and the corresponding flag is raised instead of producing inf/NaN.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decsim/model.hpp"

namespace decsim {

/// Mean absolute pairwise difference over twice the mean:
/// sum_i sum_j |x_i - x_j| / (2 n^2 mu). No small-sample correction.
double gini(std::span<const double> values);
/// sigma^2 / mu
double index_of_dispersion(std::span<const double> values);
/// sigma / mu
double coefficient_of_variation(std::span<const double> values);
/// (Q3 - Q1) / (Q3 + Q1)
double quartile_coefficient(std::span<const double> values);

/// First and third quartiles, inclusive linear interpolation at p*(n-1).
std::pair<double, double> quartiles(std::span<const double> values);

struct DispersionStats {
  double gini = 0.0;
  double index_of_dispersion = 0.0;
  double coefficient_of_variation = 0.0;
  double quartile_coefficient = 0.0;
  bool zero_mean = false;
  bool zero_quartile_sum = false;
};

/// All four statistics at once. Throws DomainError for fewer than two values,
/// a negative value, or a non-finite value.
DispersionStats dispersion(std::span<const double> values);

struct TensorDispersion {
  std::string tensor;
  DispersionStats stats;
};

/// Per tensor: the L2 norm of that tensor on every replica, then its dispersion.
/// Requires >= 2 replicas sharing one layout.
std::vector<TensorDispersion> capture_dispersion(std::span<const ParamVector> replicas);

struct MetricsRecord {
  std::string run_id;
  std::string strategy;
  int epoch = 0;
  std::int64_t iteration = 0;
  double mean_train_loss = 0.0;
  std::optional<double> test_accuracy;   // last iteration of each epoch only
  std::optional<double> train_accuracy;  // idem
  std::vector<TensorDispersion> params;
  std::vector<TensorDispersion> grads;   // empty unless gradient capture is on
};

/// Mean of the per-tensor Gini coefficients of the parameter tensors.
double mean_param_gini(const MetricsRecord& r);

enum class RankReducer { MeanOverTensors };

struct StrategyStream {
  std::string strategy;
  std::span<const MetricsRecord> records;
};

struct RankTable {
  std::vector<std::string> strategies;
  std::vector<std::int64_t> iterations;
  std::vector<std::vector<int>> ranks;  // ranks[row][strategy], 1 = lowest dispersion
};

/// Ranks strategies per iteration by ascending reduced Gini; ties keep the
/// declaration order. Throws AlignmentError naming the first iteration that
/// is missing from some stream.
RankTable rank_strategies(std::span<const StrategyStream> streams, RankReducer reducer = RankReducer::MeanOverTensors);

}  // namespace decsim
