#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stepamc/data.hpp"
#include "stepamc/models.hpp"
#include "stepamc/numerics/rng.hpp"
#include "stepamc/textcodec.hpp"

namespace stepamc::rl {

// One episode of the token-level MDP. state_1 is the prompt; action a_t is
// drawn from pi(.|state_t) and state_{t+1} = state_t + [a_t]. All per-step
// vectors are indexed by t - 1 and share one length.
struct Trajectory {
  std::vector<int> prompt;
  std::vector<int> actions;
  std::vector<double> old_logprobs;  // log pi_old(a_t | state_t)
  std::vector<double> values;        // V_old(state_t)
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> returns;
  bool terminal = false;  // ended with <eos> rather than at the length cap

  std::size_t length() const noexcept { return actions.size(); }
};

enum class RewardMode { dense, terminal, binary };

std::string_view to_string(RewardMode mode) noexcept;
std::optional<RewardMode> parse_reward_mode(std::string_view name) noexcept;

// Renders (question, steps) without a label. When the result exceeds budget
// tokens the oldest steps are dropped (keeping their original numbering);
// throws LengthError if even the last step alone does not fit.
std::vector<int> initial_state(const data::StepSample& sample, const text::Vocabulary& vocab,
                               std::size_t budget);

// state + [action]; throws LengthError once the state has reached max_len.
std::vector<int> step(std::vector<int> state, int action, std::size_t max_len);

struct GenerationConfig {
  std::size_t max_actions = 4;  // L
  double temperature = 1.0;
  bool greedy = false;
};

// Samples until <eos> or max_actions actions, recording the generating
// policy's log-probabilities and values.
Trajectory generate(const model::PolicyNetwork& policy, std::vector<int> prompt,
                    const GenerationConfig& config, num::Rng& rng);

// dense: R(state_t) = FRN(prompt + a_1..a_t) for every t.
// terminal: only the last step carries FRN(prompt + all actions).
// binary: last step is +1 when the extracted prediction equals gold, else -1;
//         the reward network is not consulted and may be null.
void assign_rewards(Trajectory& traj, const model::RewardNetwork* frn, RewardMode mode,
                    text::Label gold);

// A_t = sum_k (gamma lambda)^k delta_{t+k}, delta_t = r_t + gamma V_{t+1} - V_t,
// with V after the last step taken as 0.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double gamma, double lambda);
// R_t = sum_{t' >= t} gamma^(t'-t) r_{t'}.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);

void fill_advantages(Trajectory& traj, double gamma, double lambda);

std::string trajectory_json(const Trajectory& traj);
void write_trajectories(const std::string& path, std::span<const Trajectory> trajs);

}  // namespace stepamc::rl
