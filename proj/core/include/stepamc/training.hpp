#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stepamc/data.hpp"
#include "stepamc/models.hpp"
#include "stepamc/numerics/tape.hpp"
#include "stepamc/rollout.hpp"
#include "stepamc/textcodec.hpp"

namespace stepamc::train {

using num::Tape;
using num::Tensor;
using num::Var;

struct Hyperparams {
  double gamma = 1.0;
  double lambda = 0.95;
  double epsilon = 0.2;
  double c_v = 0.1;
  double alpha_raw_init = 0.0;  // alpha = sigmoid(alpha_raw)
  double lr_sft = 1e-4;
  double lr_rl = 5e-6;
  double lr_frn = 1e-4;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;      // samples per collected rollout batch
  std::size_t minibatch_size = 0;  // trajectories per PPO update; 0 = whole batch
  std::size_t max_actions = 4;     // L
  std::size_t ppo_epochs_per_batch = 4;
  double temperature = 1.0;
  rl::RewardMode reward_mode = rl::RewardMode::dense;
  bool constraint_loss = true;  // false reproduces the "without SCPN" ablation
  double constraint_margin = 10.0;
  bool strict_paper_sign = false;
  bool bradley_terry = false;
  bool normalize_advantages = true;
  std::uint64_t seed = 0;

  // Lists every violated range; throws ConfigError.
  void validate() const;
};

// ------------------------------------------------------------- optimizer

// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction:
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2;  t <- t + 1
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Moments are sized on first use; a later size mismatch throws ContractError.
// Tensors without a gradient buffer are treated as having zero gradient.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void optimizer_step(std::span<Tensor* const> params, AdamState& state, double lr);

// ---------------------------------------------------------------- losses

// -[log sigmoid(r+) - log sigmoid(r-)]; with bradley_terry, -log sigmoid(r+ - r-).
Var frn_pairwise_loss(Var r_plus, Var r_minus, bool bradley_terry = false);
double frn_pairwise_loss(double r_plus, double r_minus, bool bradley_terry = false);

struct SftExample {
  std::vector<int> prompt;  // state_0
  int gold_token = text::kCorrect;
};

// Mean cross-entropy of the gold label token at the answer position.
Var sft_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const SftExample> batch);

// Forward pass of the current policy over a batch of trajectories. Rows of
// new_logprobs and values follow the trajectories' steps in order;
// answer_logprobs holds log pi(. | state_0) for each trajectory.
struct PolicyPass {
  Var new_logprobs;     // (sum of lengths) x 1
  Var values;           // (sum of lengths) x 1
  Var answer_logprobs;  // batch x vocab
};

PolicyPass run_policy(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch);

struct RatioStats {
  double max_abs_deviation = 0.0;  // max |d_t - 1|
  double clip_fraction = 0.0;
};

// d_t = exp(new - old); surrogate_t = min(d_t A_t, clamp(d_t, 1 - eps, 1 + eps) A_t).
// Returns -mean(surrogate), or +mean(surrogate) with strict_paper_sign.
Var ppo_policy_loss(Var new_logprobs, std::span<const double> old_logprobs,
                    std::span<const double> advantages, double epsilon,
                    bool strict_paper_sign = false, RatioStats* stats = nullptr);
// Whole-batch form; the trajectories' stored log-probabilities stand for theta_old.
Var ppo_policy_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch,
                    double epsilon, bool strict_paper_sign = false, RatioStats* stats = nullptr);

// 1/2 mean max((V - R)^2, (clamp(V, V_old - eps, V_old + eps) - R)^2).
Var value_loss(Var values, std::span<const double> old_values, std::span<const double> returns,
               double epsilon);
Var value_loss(Tape& tape, model::PolicyNetwork& policy, std::span<const rl::Trajectory> batch,
               double epsilon);

struct ConstraintTerms {
  Var chosen;      // mean -log pi(y+ | state_0)
  Var rejected;    // mean -log pi(y- | state_0)
  Var constraint;  // chosen - mean(min(-log pi(y-), margin))
};

ConstraintTerms constraint_loss(Var answer_logprobs, std::span<const int> plus_tokens,
                                std::span<const int> minus_tokens, double margin);

struct ConstraintExample {
  std::vector<int> prompt;
  int plus_token = text::kCorrect;
  int minus_token = text::kIncorrect;
};

ConstraintTerms constraint_loss(Tape& tape, model::PolicyNetwork& policy,
                                std::span<const ConstraintExample> batch, double margin);

Var primary_loss(Var policy_loss, Var value_loss, double c_v);
// sigmoid(alpha_raw) * primary + (1 - sigmoid(alpha_raw)) * constraint.
Var total_loss(Var primary, Var constraint, Var alpha_raw);

// ---------------------------------------------------------- preparation

struct FrnPair {
  std::vector<int> plus;   // state_0 + y+ token
  std::vector<int> minus;  // state_0 + y- token
};

struct RlSample {
  std::vector<int> prompt;
  text::Label gold = text::Label::correct;
};

// Prompts are budgeted so max_actions generated tokens still fit in max_len.
std::vector<SftExample> make_sft_examples(std::span<const data::StepSample> samples,
                                          const text::Vocabulary& vocab, std::size_t budget);
std::vector<FrnPair> make_frn_pairs(std::span<const data::LabelPair> pairs,
                                    const text::Vocabulary& vocab, std::size_t budget);
std::vector<RlSample> make_rl_samples(std::span<const data::StepSample> samples,
                                      const text::Vocabulary& vocab, std::size_t budget);
// Corpus lines for vocabulary construction: every rendered state plus the template tokens.
std::vector<std::string> vocabulary_corpus(std::span<const data::StepSample> samples);

// ---------------------------------------------------------------- loops

struct FrnOptions {
  std::size_t epochs = 3;
  std::size_t batch_size = 16;  // 0 = full batch
  double lr = 1e-4;
  bool bradley_terry = false;
  std::uint64_t seed = 0;
};

struct FrnEpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double ordering_accuracy = 0.0;  // fraction of pairs with r+ > r- after the epoch
};

double ordering_accuracy(const model::RewardNetwork& frn, std::span<const FrnPair> pairs);

std::vector<FrnEpochRecord> train_frn(model::RewardNetwork& frn, std::span<const FrnPair> pairs,
                                      const FrnOptions& options);

struct SftOptions {
  std::size_t epochs = 3;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct SftEpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

std::vector<SftEpochRecord> train_sft(model::PolicyNetwork& policy, std::span<const SftExample> examples,
                                      const SftOptions& options);

// One PPO optimizer step. Field names match the training log.
struct RlStepRecord {
  std::size_t step = 0;
  double l_policy = 0.0;
  double l_value = 0.0;
  double l_chosen = 0.0;
  double l_rejected = 0.0;
  double l_const = 0.0;
  double l_total = 0.0;
  double alpha = 0.0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  // Diagnostics, not part of the log line.
  double max_ratio_deviation = 0.0;
  bool first_after_snapshot = false;
  std::size_t frn_calls = 0;
};

std::string rl_record_json(const RlStepRecord& r);

struct RlResult {
  std::vector<RlStepRecord> history;
  double alpha_raw = 0.0;
  std::vector<rl::Trajectory> last_batch;
};

using RlStepCallback = std::function<void(const RlStepRecord&)>;

// Per collected batch: snapshot theta_old, sample trajectories, assign rewards,
// compute advantages and returns, then run ppo_epochs_per_batch passes over
// minibatches minimising L_total (or L_primary when the constraint term is off).
// frn may be null only in binary reward mode.
RlResult train_rl(model::PolicyNetwork& policy, const model::RewardNetwork* frn,
                  std::span<const RlSample> samples, const Hyperparams& hp,
                  const RlStepCallback& on_step = {});

}  // namespace stepamc::train
