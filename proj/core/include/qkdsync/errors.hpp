#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qkdsync {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or invalid configuration (type invariants, schedule geometry).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Window width outside the 2..4 pulse-width band on a plan that enforces it.
class CriterionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Non-finite intermediate or a probability that left [0, 1].
class NumericRangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Series truncation ran out of terms before reaching the requested tail bound.
class PrecisionError : public std::runtime_error {
 public:
  PrecisionError(const std::string& what, double partial_sum, std::uint64_t terms,
                 double tail_bound)
      : std::runtime_error(what),
        partial_sum_(partial_sum),
        terms_(terms),
        tail_bound_(tail_bound) {}

  double partial_sum() const noexcept { return partial_sum_; }
  std::uint64_t terms() const noexcept { return terms_; }
  double tail_bound() const noexcept { return tail_bound_; }

 private:
  double partial_sum_;
  std::uint64_t terms_;
  double tail_bound_;
};

}  // namespace qkdsync
