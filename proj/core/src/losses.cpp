#include <algorithm>
#include <cmath>
#include <limits>

#include "stepamc/errors.hpp"
#include "stepamc/numerics/ops.hpp"
#include "stepamc/training.hpp"

namespace stepamc::train {

namespace ops = stepamc::num;

Var frn_pairwise_loss(Var r_plus, Var r_minus, bool bradley_terry) {
  if (bradley_terry) return -ops::log_sigmoid(r_plus - r_minus);
  return -(ops::log_sigmoid(r_plus) - ops::log_sigmoid(r_minus));
}

double frn_pairwise_loss(double r_plus, double r_minus, bool bradley_terry) {
  if (bradley_terry) return -ops::log_sigmoid(r_plus - r_minus);
  return -(ops::log_sigmoid(r_plus) - ops::log_sigmoid(r_minus));
}

Var sft_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const SftExample> batch) {
  if (batch.empty()) throw ContractError("sft_loss on an empty batch");
  std::vector<Var> rows;
  std::vector<int> gold;
  rows.reserve(batch.size());
  for (const auto& ex : batch) {
    if (ex.gold_token != text::kCorrect && ex.gold_token != text::kIncorrect) {
      throw ContractError("sft_loss: gold token must be <correct> or <incorrect>");
    }
    auto out = policy.forward(tape, ex.prompt, ex.prompt.size() - 1);
    rows.push_back(out.logits);
    gold.push_back(ex.gold_token);
  }
  Var logits = rows.size() == 1 ? rows[0] : ops::concat_rows(rows);
  return -ops::mean(ops::gather_rows(ops::log_softmax_rows(logits), gold));
}

PolicyPass run_policy(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch) {
  if (batch.empty()) throw ContractError("run_policy on an empty batch");
  std::vector<Var> logps, values, answers;
  for (const auto& traj : batch) {
    const std::size_t n = traj.length();
    if (n == 0) throw ContractError("trajectory without actions");
    std::vector<int> tokens = traj.prompt;
    tokens.insert(tokens.end(), traj.actions.begin(), traj.actions.end() - 1);
    auto out = policy.forward(tape, tokens, traj.prompt.size() - 1);
    Var logp = ops::log_softmax_rows(out.logits);
    logps.push_back(ops::gather_rows(logp, traj.actions));
    values.push_back(out.values);
    answers.push_back(n == 1 ? logp : ops::slice_rows(logp, 0, 1));
  }
  auto join = [](const std::vector<Var>& parts) {
    return parts.size() == 1 ? parts[0] : ops::concat_rows(parts);
  };
  return {join(logps), join(values), join(answers)};
}

Var ppo_policy_loss(Var new_logprobs, std::span<const double> old_logprobs,
                    std::span<const double> advantages, double epsilon, bool strict_paper_sign,
                    RatioStats* stats) {
  const std::size_t n = new_logprobs.size();
  if (advantages.size() != n) {
    throw ContractError("ppo_policy_loss: " + std::to_string(advantages.size()) +
                        " advantages for " + std::to_string(n) + " actions");
  }
  if (old_logprobs.size() != n) {
    throw ContractError("ppo_policy_loss: " + std::to_string(old_logprobs.size()) +
                        " old log-probabilities for " + std::to_string(n) + " actions");
  }
  Tape& tape = new_logprobs.tape();
  Var old = tape.constant(n, 1, {old_logprobs.begin(), old_logprobs.end()});
  Var adv = tape.constant(n, 1, {advantages.begin(), advantages.end()});
  Var ratio = ops::exp(new_logprobs - old);
  Var unclipped = ratio * adv;
  Var clipped = ops::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv;
  Var surrogate = ops::mean(ops::minimum(unclipped, clipped));
  if (stats) {
    std::size_t clipped_count = 0;
    stats->max_abs_deviation = 0.0;
    for (double d : ratio.values()) {
      stats->max_abs_deviation = std::max(stats->max_abs_deviation, std::abs(d - 1.0));
      if (std::abs(d - 1.0) > epsilon) ++clipped_count;
    }
    stats->clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(n);
  }
  return strict_paper_sign ? surrogate : -surrogate;
}

namespace {

template <class Get>
std::vector<double> flatten(std::span<const rl::Trajectory> batch, Get get) {
  std::vector<double> out;
  for (const auto& t : batch) {
    const auto& v = get(t);
    if (v.size() != t.length()) {
      throw ContractError("trajectory field has " + std::to_string(v.size()) + " entries for " +
                          std::to_string(t.length()) + " actions");
    }
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

Var ppo_policy_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch,
                    double epsilon, bool strict_paper_sign, RatioStats* stats) {
  for (const auto& t : batch) {
    if (t.advantages.empty()) throw ContractError("ppo_policy_loss: trajectory lacks advantages");
  }
  auto pass = run_policy(tape, policy, batch);
  return ppo_policy_loss(pass.new_logprobs,
                         flatten(batch, [](const rl::Trajectory& t) -> const auto& { return t.old_logprobs; }),
                         flatten(batch, [](const rl::Trajectory& t) -> const auto& { return t.advantages; }),
                         epsilon, strict_paper_sign, stats);
}

Var value_loss(Var values, std::span<const double> old_values, std::span<const double> returns,
               double epsilon) {
  const std::size_t n = values.size();
  if (old_values.size() != n || returns.size() != n) {
    throw ContractError("value_loss: expected " + std::to_string(n) + " old values and returns");
  }
  Tape& tape = values.tape();
  Var ret = tape.constant(n, 1, {returns.begin(), returns.end()});
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = old_values[i] - epsilon;
    hi[i] = old_values[i] + epsilon;
  }
  Var plain = ops::square(values - ret);
  Var clipped = ops::square(ops::clamp(values, lo, hi) - ret);
  return 0.5 * ops::mean(ops::maximum(plain, clipped));
}

Var value_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch,
               double epsilon) {
  auto pass = run_policy(tape, policy, batch);
  return value_loss(pass.values,
                    flatten(batch, [](const rl::Trajectory& t) -> const auto& { return t.values; }),
                    flatten(batch, [](const rl::Trajectory& t) -> const auto& { return t.returns; }),
                    epsilon);
}

ConstraintTerms constraint_loss(Var answer_logprobs, std::span<const int> plus_tokens,
                                std::span<const int> minus_tokens, double margin) {
  const std::size_t n = answer_logprobs.rows();
  if (plus_tokens.size() != n || minus_tokens.size() != n) {
    throw ContractError("constraint_loss: label tokens do not match " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (plus_tokens[i] == minus_tokens[i]) {
      throw ContractError("constraint_loss: y- must be the inverse of y+");
    }
  }
  Var chosen_each = -ops::gather_rows(answer_logprobs, plus_tokens);
  Var rejected_each = -ops::gather_rows(answer_logprobs, minus_tokens);
  Var capped = ops::clamp(rejected_each, -std::numeric_limits<double>::infinity(), margin);
  Var chosen = ops::mean(chosen_each);
  return {chosen, ops::mean(rejected_each), chosen - ops::mean(capped)};
}

ConstraintTerms constraint_loss(Tape& tape, model::PolicyNetwork& policy,
                                std::span<const ConstraintExample> batch, double margin) {
  if (batch.empty()) throw ContractError("constraint_loss on an empty batch");
  std::vector<Var> rows;
  std::vector<int> plus, minus;
  for (const auto& ex : batch) {
    auto out = policy.forward(tape, ex.prompt, ex.prompt.size() - 1);
    rows.push_back(ops::log_softmax_rows(out.logits));
    plus.push_back(ex.plus_token);
    minus.push_back(ex.minus_token);
  }
  Var logp = rows.size() == 1 ? rows[0] : ops::concat_rows(rows);
  return constraint_loss(logp, plus, minus, margin);
}

Var primary_loss(Var policy_loss, Var value_loss, double c_v) {
  return policy_loss + c_v * value_loss;
}

Var total_loss(Var primary, Var constraint, Var alpha_raw) {
  Var alpha = ops::sigmoid(alpha_raw);
  return ops::mul_scalar(primary, alpha) + ops::mul_scalar(constraint, 1.0 - alpha);
}

}  // namespace stepamc::train
