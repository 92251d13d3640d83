#include <string>
#include <vector>

#include "stepamc/data.hpp"
#include "stepamc/errors.hpp"
#include "stepamc/numerics/rng.hpp"

namespace stepamc::data {
namespace {

enum class Op { add, sub, mul };

struct OpInfo {
  const char* word;
  const char* symbol;
};

OpInfo info(Op op) {
  switch (op) {
    case Op::add: return {"add", "+"};
    case Op::sub: return {"sub", "-"};
    case Op::mul: return {"mul", "*"};
  }
  return {"?", "?"};
}

int apply(Op op, int a, int b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
  }
  return 0;
}

// An operation and operand keeping a in [0, range).
std::pair<Op, int> draw_operation(int a, int range, num::Rng& rng) {
  std::vector<Op> feasible;
  if (a <= range - 2) feasible.push_back(Op::add);
  if (a >= 1) feasible.push_back(Op::sub);
  if (a >= 1 && 2 * a <= range - 1) feasible.push_back(Op::mul);
  const Op op = feasible[rng.below(feasible.size())];
  switch (op) {
    case Op::add: return {op, rng.between(1, range - 1 - a)};
    case Op::sub: return {op, rng.between(1, a)};
    case Op::mul: return {op, rng.between(2, (range - 1) / a)};
  }
  return {op, 0};
}

// A wrong in-range result: off by 1..3, or the same operand under another operation.
int perturb(Op op, int a, int b, int truth, int range, num::Rng& rng) {
  std::vector<int> candidates;
  if (rng.bernoulli(0.5)) {
    for (Op other : {Op::add, Op::sub, Op::mul}) {
      if (other == op) continue;
      const int v = apply(other, a, b);
      if (v >= 0 && v < range && v != truth) candidates.push_back(v);
    }
  }
  if (candidates.empty()) {
    for (int d = -3; d <= 3; ++d) {
      const int v = truth + d;
      if (d != 0 && v >= 0 && v < range) candidates.push_back(v);
    }
  }
  return candidates[rng.below(candidates.size())];
}

}  // namespace

std::vector<StepSample> synth_generate(const SynthConfig& config, std::uint64_t seed) {
  if (config.n == 0) throw ContractError("synth_generate needs n >= 1");
  if (config.max_steps < 2) throw ContractError("synth_generate needs max_steps >= 2");
  if (config.value_range < 4) throw ContractError("synth_generate needs value_range >= 4");
  if (config.error_rate < 0.0 || config.error_rate > 1.0) {
    throw ContractError("synth_generate error_rate must lie in [0, 1]");
  }

  num::Rng rng(seed);
  const int range = config.value_range;
  std::vector<StepSample> out;
  out.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const auto length = static_cast<std::size_t>(rng.between(1, static_cast<int>(config.max_steps)));
    const auto judged = static_cast<std::size_t>(rng.between(1, static_cast<int>(length)));

    int stated = rng.between(0, range - 1);
    std::string question = "start " + std::to_string(stated);
    StepSample sample;
    for (std::size_t k = 1; k <= length; ++k) {
      const auto [op, operand] = draw_operation(stated, range, rng);
      question += std::string(" ") + info(op).word + " " + std::to_string(operand);
      if (k > judged) {
        stated = apply(op, stated, operand);
        continue;
      }
      const int truth = apply(op, stated, operand);
      int result = truth;
      const bool may_err = !config.separable || k == judged;
      if (may_err && rng.bernoulli(config.error_rate)) {
        result = config.separable ? truth + range : perturb(op, stated, operand, truth, range, rng);
      }
      sample.steps.push_back(std::to_string(stated) + " " + info(op).symbol + " " +
                             std::to_string(operand) + " = " + std::to_string(result));
      if (k == judged) sample.label = result == truth ? Label::correct : Label::incorrect;
      stated = result;
    }
    sample.question = std::move(question);
    sample.provenance = "synth:" + std::to_string(i);
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace stepamc::data
