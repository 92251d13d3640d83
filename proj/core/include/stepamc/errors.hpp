#pragma once

#include <stdexcept>
#include <string>

namespace stepamc {

// Violated precondition of an operation (non-scalar loss, mismatched lengths...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor shapes that do not compose.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Sequence longer than the model's positional table, or a state that cannot grow.
class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unusable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Class balance cannot be met. Carries the best ratio that was achievable.
class BalanceError : public DataError {
 public:
  BalanceError(const std::string& what, double achievable_positive_ratio)
      : DataError(what), achievable_ratio_(achievable_positive_ratio) {}

  double achievable_ratio() const noexcept { return achievable_ratio_; }

 private:
  double achievable_ratio_;
};

}  // namespace stepamc
