// SPDX-License-Identifier: Apache-2.0
#pragma once

// Learning-rate schedules with batch/degree scaling, and the epoch-indexed
// coordination number of the adaptive ring lattice.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace decsim {

enum class ScheduleKind { WarmupMultiStep, OneCycle, Constant };
enum class LrScaling { None, Linear, Sqrt };

std::string_view to_string(ScheduleKind kind);
std::string_view to_string(LrScaling scaling);
ScheduleKind parse_schedule_kind(std::string_view name);
LrScaling parse_lr_scaling(std::string_view name);

/// base_lr * factor, times the scaling multiplier when `scaled` is set.
/// Written as "0.1" or "0.1s" in configs.
struct LrPoint {
  double factor = 1.0;
  bool scaled = false;
};

LrPoint parse_lr_point(std::string_view text);
std::string to_string(const LrPoint& p);

/// The learning rate moves linearly from `start` at begin_epoch to `end` at
/// end_epoch (exclusive); equal endpoints give a constant step.
struct LrPhase {
  int begin_epoch = 0;
  int end_epoch = 0;
  LrPoint start;
  LrPoint end;
};

struct LRSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double base_lr = 0.1;
  LrScaling scaling = LrScaling::None;
  std::vector<LrPhase> phases;  // ignored for Constant
  std::size_t reference_batch = 256;
};

/// Throws ConfigError unless phases are non-empty, ordered, contiguous and
/// every endpoint is positive.
void validate(const LRSchedule& s);

/// Phase table stretched over `epochs`: warmup then three decays by 10x for
/// WarmupMultiStep; a 20x up/down ramp followed by a 10x anneal for OneCycle.
std::vector<LrPhase> default_phases(ScheduleKind kind, int epochs);

/// s = batch_size * (degree + 1) / reference_batch, or sqrt(s), or 1.
double scaling_multiplier(const LRSchedule& s, std::size_t batch_size, int degree);

/// Learning rate at `epoch`. Throws ConfigError outside the phase table.
double effective_lr(const LRSchedule& s, int epoch, std::size_t batch_size, int degree);

struct AdaParams {
  int k0 = 1;
  double gamma_k = 0.0;
  int k_min = 2;
};

/// k0 >= k_min >= 1, gamma_k > 0, and 2*k0 <= n - 1 when n is given.
void validate(const AdaParams& p, int n_workers);

/// max(k0 - trunc(gamma_k * epoch), k_min).
int ada_degree(const AdaParams& p, int epoch);

}  // namespace decsim
