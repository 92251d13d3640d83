#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "stepamc/numerics/tape.hpp"

namespace stepamc::num {

struct GradCheckReport {
  double max_rel_err = 0.0;  // over coordinates whose absolute error exceeds abs_floor
  double max_abs_err = 0.0;
  std::size_t coordinates = 0;
  std::size_t failures = 0;
  std::string worst;  // "<param index>[<element>]" of the largest relative error
  bool pass = true;
};

// Builds a fresh tape, records the loss and returns it.
using LossFn = std::function<Var(Tape&)>;

// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h for
// every element of every tensor in params. A coordinate passes when its
// relative error is within tol or its absolute error is within abs_floor.
// Existing gradients on params are overwritten.
GradCheckReport finite_diff_check(const LossFn& loss, std::span<Tensor* const> params,
                                  double h = 1e-5, double tol = 1e-4,
                                  double abs_floor = 1e-8);

}  // namespace stepamc::num
