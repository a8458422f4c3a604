// SPDX-License-Identifier: Apache-2.0
#include "decsim/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "decsim/error.hpp"

namespace decsim {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::WarmupMultiStep: return "warmup_multistep";
    case ScheduleKind::OneCycle: return "one_cycle";
    case ScheduleKind::Constant: return "constant";
  }
  return "unknown";
}

std::string_view to_string(LrScaling scaling) {
  switch (scaling) {
    case LrScaling::None: return "none";
    case LrScaling::Linear: return "linear";
    case LrScaling::Sqrt: return "sqrt";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "warmup_multistep") return ScheduleKind::WarmupMultiStep;
  if (name == "one_cycle") return ScheduleKind::OneCycle;
  if (name == "constant") return ScheduleKind::Constant;
  throw ConfigError(fmt::format("unknown schedule kind '{}' (expected warmup_multistep, one_cycle or constant)", name));
}

LrScaling parse_lr_scaling(std::string_view name) {
  if (name == "none") return LrScaling::None;
  if (name == "linear") return LrScaling::Linear;
  if (name == "sqrt") return LrScaling::Sqrt;
  throw ConfigError(fmt::format("unknown lr scaling '{}' (expected none, linear or sqrt)", name));
}

LrPoint parse_lr_point(std::string_view text) {
  LrPoint p;
  std::string body(text);
  if (!body.empty() && body.back() == 's') {
    p.scaled = true;
    body.pop_back();
  }
  if (body.empty()) {
    p.factor = 1.0;
    return p;
  }
  try {
    std::size_t used = 0;
    p.factor = std::stod(body, &used);
    if (used != body.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("cannot parse learning-rate point '{}' (expected e.g. \"1\", \"0.1s\")", text));
  }
  return p;
}

std::string to_string(const LrPoint& p) { return fmt::format("{}{}", p.factor, p.scaled ? "s" : ""); }

void validate(const LRSchedule& s) {
  if (!(s.base_lr > 0.0) || !std::isfinite(s.base_lr)) {
    throw ConfigError(fmt::format("schedule base_lr must be > 0 (got {})", s.base_lr));
  }
  if (s.reference_batch == 0) throw ConfigError("schedule reference_batch must be >= 1");
  if (s.kind == ScheduleKind::Constant) return;
  if (s.phases.empty()) throw ConfigError(fmt::format("{} schedule needs at least one phase", to_string(s.kind)));
  for (std::size_t i = 0; i < s.phases.size(); ++i) {
    const auto& ph = s.phases[i];
    if (ph.end_epoch <= ph.begin_epoch) {
      throw ConfigError(fmt::format("schedule phase {} has empty epoch range [{}, {})", i, ph.begin_epoch, ph.end_epoch));
    }
    if (i > 0 && s.phases[i - 1].end_epoch != ph.begin_epoch) {
      throw ConfigError(fmt::format("schedule phase {} starts at epoch {} but phase {} ends at {}", i, ph.begin_epoch,
                                    i - 1, s.phases[i - 1].end_epoch));
    }
    if (!(ph.start.factor > 0.0) || !(ph.end.factor > 0.0)) {
      throw ConfigError(fmt::format("schedule phase {} has a non-positive learning rate", i));
    }
  }
}

std::vector<LrPhase> default_phases(ScheduleKind kind, int epochs) {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  // Boundaries are fractions of the run, clamped so every phase is non-empty
  // and dropped when the run is too short to hold them.
  auto cut = [&](std::vector<double> fractions) {
    std::vector<int> b{0};
    for (double f : fractions) {
      const int e = static_cast<int>(std::lround(f * epochs));
      if (e > b.back() && e < epochs) b.push_back(e);
    }
    b.push_back(epochs);
    return b;
  };
  std::vector<LrPhase> out;
  if (kind == ScheduleKind::WarmupMultiStep) {
    const auto b = cut({5.0 / 90.0, 30.0 / 90.0, 60.0 / 90.0});
    const LrPoint levels[] = {{1.0, true}, {0.1, true}, {0.01, true}};
    if (b.size() == 2) {
      out.push_back({0, epochs, levels[0], levels[0]});
    } else {
      out.push_back({b[0], b[1], {1.0, false}, {1.0, true}});
      for (std::size_t i = 1; i + 1 < b.size(); ++i) out.push_back({b[i], b[i + 1], levels[i - 1], levels[i - 1]});
    }
  } else if (kind == ScheduleKind::OneCycle) {
    const auto b = cut({23.0 / 300.0, 46.0 / 300.0});
    const LrPhase shape[] = {{0, 0, {1.0, false}, {20.0, true}},
                             {0, 0, {20.0, true}, {1.0, true}},
                             {0, 0, {1.0, true}, {0.1, true}}};
    const std::size_t skip = 3 - (b.size() - 1);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      auto ph = shape[i + skip];
      ph.begin_epoch = b[i];
      ph.end_epoch = b[i + 1];
      out.push_back(ph);
    }
  } else {
    out.push_back({0, epochs, {1.0, false}, {1.0, false}});
  }
  return out;
}

double scaling_multiplier(const LRSchedule& s, std::size_t batch_size, int degree) {
  const double ratio = static_cast<double>(batch_size) * static_cast<double>(degree + 1) /
                       static_cast<double>(s.reference_batch);
  switch (s.scaling) {
    case LrScaling::None: return 1.0;
    case LrScaling::Linear: return ratio;
    case LrScaling::Sqrt: return std::sqrt(ratio);
  }
  return 1.0;
}

double effective_lr(const LRSchedule& s, int epoch, std::size_t batch_size, int degree) {
  const double mult = scaling_multiplier(s, batch_size, degree);
  if (s.kind == ScheduleKind::Constant) return s.base_lr * mult;

  const auto it = std::find_if(s.phases.begin(), s.phases.end(),
                               [&](const LrPhase& p) { return epoch >= p.begin_epoch && epoch < p.end_epoch; });
  if (it == s.phases.end()) {
    throw ConfigError(fmt::format("epoch {} lies outside the schedule phase table [{}, {})", epoch,
                                  s.phases.empty() ? 0 : s.phases.front().begin_epoch,
                                  s.phases.empty() ? 0 : s.phases.back().end_epoch));
  }
  const auto value = [&](const LrPoint& p) { return s.base_lr * p.factor * (p.scaled ? mult : 1.0); };
  const double a = value(it->start);
  const double b = value(it->end);
  const double t = static_cast<double>(epoch - it->begin_epoch) / static_cast<double>(it->end_epoch - it->begin_epoch);
  return a + (b - a) * t;
}

void validate(const AdaParams& p, int n_workers) {
  if (p.k_min < 1) throw ConfigError(fmt::format("k_min must be >= 1 (got {})", p.k_min));
  if (p.k0 < p.k_min) throw ConfigError(fmt::format("k0 ({}) must be >= k_min ({})", p.k0, p.k_min));
  if (!(p.gamma_k > 0.0) || !std::isfinite(p.gamma_k)) {
    throw ConfigError(fmt::format("gamma_k must be > 0 (got {})", p.gamma_k));
  }
  if (n_workers > 0 && 2 * p.k0 > n_workers - 1) {
    throw ConfigError(fmt::format("k0 ({}) requires 2*k0 <= n_workers - 1 (n_workers = {})", p.k0, n_workers));
  }
}

int ada_degree(const AdaParams& p, int epoch) {
  const auto decay = static_cast<long long>(std::trunc(p.gamma_k * static_cast<double>(epoch)));
  return static_cast<int>(std::max<long long>(p.k0 - decay, p.k_min));
}

}  // namespace decsim
