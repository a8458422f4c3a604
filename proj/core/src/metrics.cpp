// SPDX-License-Identifier: Apache-2.0
#include "decsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "decsim/error.hpp"

namespace decsim {
namespace {

void check_values(std::span<const double> values) {
  if (values.size() < 2) {
    throw DomainError(fmt::format("dispersion needs at least 2 values (got {})", values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("dispersion input contains a non-finite value");
    if (v < 0.0) throw DomainError(fmt::format("dispersion input must be non-negative (got {})", v));
  }
}

// Moments are taken about the first value so that identical inputs give an
// exact zero spread.
double mean_of(std::span<const double> values) {
  const double x0 = values.front();
  double s = 0.0;
  for (double v : values) s += v - x0;
  return x0 + s / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values, double mu) {
  const double x0 = values.front();
  const double shift = mu - x0;
  double ss = 0.0;
  for (double v : values) ss += ((v - x0) - shift) * ((v - x0) - shift);
  return ss / static_cast<double>(values.size());
}

double gini_unchecked(std::span<const double> values, double mu) {
  if (mu <= 0.0) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i) over the sorted sample;
  // the coefficients sum to zero, so shifting by the minimum changes nothing
  const auto n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    acc += (2.0 * static_cast<double>(i) - n + 1.0) * (sorted[i] - sorted.front());
  }
  return std::max(0.0, 2.0 * acc / (2.0 * n * n * mu));
}

double interpolate(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

double gini(std::span<const double> values) {
  check_values(values);
  return gini_unchecked(values, mean_of(values));
}

double index_of_dispersion(std::span<const double> values) {
  check_values(values);
  const double mu = mean_of(values);
  return mu > 0.0 ? population_variance(values, mu) / mu : 0.0;
}

double coefficient_of_variation(std::span<const double> values) {
  check_values(values);
  const double mu = mean_of(values);
  return mu > 0.0 ? std::sqrt(population_variance(values, mu)) / mu : 0.0;
}

std::pair<double, double> quartiles(std::span<const double> values) {
  if (values.empty()) throw DomainError("quartiles of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {interpolate(sorted, 0.25), interpolate(sorted, 0.75)};
}

double quartile_coefficient(std::span<const double> values) {
  check_values(values);
  const auto [q1, q3] = quartiles(values);
  return q1 + q3 > 0.0 ? (q3 - q1) / (q3 + q1) : 0.0;
}

DispersionStats dispersion(std::span<const double> values) {
  check_values(values);
  DispersionStats s;
  const double mu = mean_of(values);
  if (mu > 0.0) {
    const double var = population_variance(values, mu);
    s.gini = gini_unchecked(values, mu);
    s.index_of_dispersion = var / mu;
    s.coefficient_of_variation = std::sqrt(var) / mu;
  } else {
    s.zero_mean = true;
  }
  const auto [q1, q3] = quartiles(values);
  if (q1 + q3 > 0.0) {
    s.quartile_coefficient = (q3 - q1) / (q3 + q1);
  } else {
    s.zero_quartile_sum = true;
  }
  return s;
}

std::vector<TensorDispersion> capture_dispersion(std::span<const ParamVector> replicas) {
  if (replicas.size() < 2) {
    throw DomainError(fmt::format("capture_dispersion needs at least 2 replicas (got {})", replicas.size()));
  }
  const auto& layout = replicas.front().layout;
  for (const auto& r : replicas) {
    if (r.layout != layout && (r.layout == nullptr || r.layout->size() != layout->size() ||
                               r.layout->tensor_count() != layout->tensor_count())) {
      throw DomainError("replicas do not share one tensor layout");
    }
  }
  std::vector<TensorDispersion> out;
  out.reserve(layout->tensor_count());
  std::vector<double> norms(replicas.size());
  for (std::size_t t = 0; t < layout->tensor_count(); ++t) {
    for (std::size_t w = 0; w < replicas.size(); ++w) {
      double ss = 0.0;
      for (double v : replicas[w].tensor(t)) ss += v * v;
      norms[w] = std::sqrt(ss);
      if (!std::isfinite(norms[w])) {
        throw NumericalError(fmt::format("L2 norm of tensor '{}' on replica {} is not finite", layout->segments()[t].name, w));
      }
    }
    out.push_back({layout->segments()[t].name, dispersion(norms)});
  }
  return out;
}

double mean_param_gini(const MetricsRecord& r) {
  if (r.params.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : r.params) s += t.stats.gini;
  return s / static_cast<double>(r.params.size());
}

RankTable rank_strategies(std::span<const StrategyStream> streams, RankReducer reducer) {
  (void)reducer;  // MeanOverTensors is the only reducer
  RankTable table;
  if (streams.empty()) return table;

  // iteration -> reduced value, per stream
  std::vector<std::map<std::int64_t, double>> by_iter(streams.size());
  for (std::size_t s = 0; s < streams.size(); ++s) {
    table.strategies.push_back(streams[s].strategy);
    for (const auto& rec : streams[s].records) by_iter[s][rec.iteration] = mean_param_gini(rec);
  }

  std::map<std::int64_t, int> all;
  for (const auto& m : by_iter) {
    for (const auto& [it, v] : m) ++all[it];
  }
  for (const auto& [it, count] : all) {
    if (count != static_cast<int>(streams.size())) {
      for (std::size_t s = 0; s < streams.size(); ++s) {
        if (!by_iter[s].contains(it)) {
          throw AlignmentError(
              fmt::format("metric streams are not aligned: iteration {} missing from strategy '{}'", it, streams[s].strategy),
              it);
        }
      }
    }
  }

  std::vector<std::size_t> order(streams.size());
  for (const auto& [it, count] : all) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return by_iter[a].at(it) < by_iter[b].at(it); });
    std::vector<int> row(streams.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) row[order[pos]] = static_cast<int>(pos) + 1;
    table.iterations.push_back(it);
    table.ranks.push_back(std::move(row));
  }
  return table;
}

}  // namespace decsim
