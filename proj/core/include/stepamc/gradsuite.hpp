#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stepamc/models.hpp"
#include "stepamc/numerics/gradcheck.hpp"

namespace stepamc::train {

struct GradSuiteEntry {
  std::string name;
  std::size_t parameters = 0;
  num::GradCheckReport report;
};

// Miniature networks (under 500 parameters each) used by the suite.
model::ModelConfig gradsuite_config();

// Finite-difference checks of every training loss on fixed inputs: sft, ppo
// policy (clip on and off), value, constraint (off the margin), both pairwise
// reward forms, the combined objective including alpha_raw, and an adapted policy.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, double tol = 1e-4,
                                               double abs_floor = 1e-8);

}  // namespace stepamc::train
