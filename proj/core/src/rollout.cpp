#include "stepamc/rollout.hpp"

#include <fstream>

#include <json.hpp>

#include "stepamc/errors.hpp"
#include "stepamc/eval.hpp"
#include "stepamc/numerics/ops.hpp"

namespace stepamc::rl {

std::string_view to_string(RewardMode mode) noexcept {
  switch (mode) {
    case RewardMode::dense: return "dense";
    case RewardMode::terminal: return "terminal";
    case RewardMode::binary: return "binary";
  }
  return "?";
}

std::optional<RewardMode> parse_reward_mode(std::string_view name) noexcept {
  if (name == "dense") return RewardMode::dense;
  if (name == "terminal") return RewardMode::terminal;
  if (name == "binary") return RewardMode::binary;
  return std::nullopt;
}

std::vector<int> initial_state(const data::StepSample& sample, const text::Vocabulary& vocab,
                               std::size_t budget) {
  text::StateText state{sample.question, sample.steps, std::nullopt, 1};
  while (true) {
    auto tokens = text::render_state0(state, vocab);
    if (tokens.size() <= budget) return tokens;
    if (state.steps.size() == 1) {
      throw LengthError("state of " + std::to_string(tokens.size()) +
                        " tokens with a single step exceeds budget " + std::to_string(budget));
    }
    state.steps.erase(state.steps.begin());
    ++state.first_step;
  }
}

std::vector<int> step(std::vector<int> state, int action, std::size_t max_len) {
  if (state.size() >= max_len) {
    throw LengthError("state already holds max_len=" + std::to_string(max_len) + " tokens");
  }
  state.push_back(action);
  return state;
}

Trajectory generate(const model::PolicyNetwork& policy, std::vector<int> prompt,
                    const GenerationConfig& config, num::Rng& rng) {
  if (config.max_actions == 0) throw ContractError("generation length must be at least 1");
  Trajectory traj;
  traj.prompt = prompt;
  std::vector<int> state = std::move(prompt);
  const std::size_t max_len = policy.config().max_len;
  for (std::size_t t = 0; t < config.max_actions; ++t) {
    num::Tape tape;
    auto out = policy.forward(tape, state, state.size() - 1);
    num::Var logp = num::log_softmax_rows(out.logits);
    const int action = model::sample_next(out.logits.values(), config.temperature, rng, config.greedy);
    traj.actions.push_back(action);
    traj.old_logprobs.push_back(logp.values()[static_cast<std::size_t>(action)]);
    traj.values.push_back(out.values.item());
    if (action == text::kEos) {
      traj.terminal = true;
      break;
    }
    if (t + 1 < config.max_actions) state = step(std::move(state), action, max_len);
  }
  return traj;
}

void assign_rewards(Trajectory& traj, const model::RewardNetwork* frn, RewardMode mode,
                    text::Label gold) {
  const std::size_t n = traj.length();
  if (n == 0) throw ContractError("assign_rewards on a trajectory without actions");
  traj.rewards.assign(n, 0.0);
  if (mode == RewardMode::binary) {
    const auto pred = eval::extract_prediction(traj.actions);
    const bool right = (pred == eval::Prediction::correct && gold == text::Label::correct) ||
                       (pred == eval::Prediction::incorrect && gold == text::Label::incorrect);
    traj.rewards.back() = right ? 1.0 : -1.0;
    return;
  }
  if (!frn) throw ContractError("reward mode " + std::string(to_string(mode)) + " needs a reward network");
  std::vector<int> query = traj.prompt;
  for (std::size_t t = 0; t < n; ++t) {
    query.push_back(traj.actions[t]);
    if (mode == RewardMode::dense || t + 1 == n) traj.rewards[t] = frn->reward(query);
  }
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double gamma, double lambda) {
  if (rewards.size() != values.size()) {
    throw ContractError("compute_gae: " + std::to_string(rewards.size()) + " rewards vs " +
                        std::to_string(values.size()) + " values");
  }
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : 0.0;
    const double delta = rewards[i] + gamma * next_value - values[i];
    next_adv = delta + gamma * lambda * next_adv;
    adv[i] = next_adv;
  }
  return adv;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> ret(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    ret[i] = acc;
  }
  return ret;
}

void fill_advantages(Trajectory& traj, double gamma, double lambda) {
  traj.advantages = compute_gae(traj.rewards, traj.values, gamma, lambda);
  traj.returns = compute_returns(traj.rewards, gamma);
}

std::string trajectory_json(const Trajectory& t) {
  nlohmann::json j;
  j["prompt"] = t.prompt;
  j["actions"] = t.actions;
  j["old_logprobs"] = t.old_logprobs;
  j["values"] = t.values;
  j["rewards"] = t.rewards;
  j["advantages"] = t.advantages;
  j["returns"] = t.returns;
  j["terminal"] = t.terminal;
  return j.dump();
}

void write_trajectories(const std::string& path, std::span<const Trajectory> trajs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& t : trajs) out << trajectory_json(t) << '\n';
}

}  // namespace stepamc::rl
