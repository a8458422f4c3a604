// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace decsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (topology shape, schedule, config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed: non-finite loss, eigensolver did not converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of a statistic (negative value, too few samples).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Metric streams that are not aligned on iteration.
class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::int64_t missing_iteration)
      : Error(what), missing_iteration_(missing_iteration) {}
  std::int64_t missing_iteration() const noexcept { return missing_iteration_; }

 private:
  std::int64_t missing_iteration_;
};

/// A training run produced non-finite parameters.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string strategy, int epoch, std::int64_t iteration)
      : Error(what), strategy_(std::move(strategy)), epoch_(epoch), iteration_(iteration) {}

  const std::string& strategy() const noexcept { return strategy_; }
  int epoch() const noexcept { return epoch_; }
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::string strategy_;
  int epoch_;
  std::int64_t iteration_;
};

/// Filesystem failures while reading configs or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace decsim
