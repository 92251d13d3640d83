#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "stepamc/errors.hpp"
#include "stepamc/numerics/ops.hpp"
#include "stepamc/numerics/rng.hpp"
#include "stepamc/training.hpp"

namespace stepamc::train {

namespace ops = stepamc::num;

void Hyperparams::validate() const {
  std::vector<std::string> bad;
  if (!(gamma > 0.0 && gamma <= 1.0)) bad.push_back("gamma must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) bad.push_back("lambda must lie in [0, 1]");
  if (!(epsilon > 0.0)) bad.push_back("epsilon must be positive");
  if (!(c_v >= 0.0)) bad.push_back("c_v must be non-negative");
  if (!std::isfinite(alpha_raw_init)) bad.push_back("alpha_raw_init must be finite");
  if (!(lr_sft >= 0.0)) bad.push_back("lr_sft must be non-negative");
  if (!(lr_rl >= 0.0)) bad.push_back("lr_rl must be non-negative");
  if (!(lr_frn >= 0.0)) bad.push_back("lr_frn must be non-negative");
  if (epochs == 0) bad.push_back("epochs must be at least 1");
  if (batch_size == 0) bad.push_back("batch_size must be at least 1");
  if (max_actions == 0) bad.push_back("max_actions must be at least 1");
  if (ppo_epochs_per_batch == 0) bad.push_back("ppo_epochs_per_batch must be at least 1");
  if (!(temperature > 0.0)) bad.push_back("temperature must be positive");
  if (!(constraint_margin > 0.0)) bad.push_back("constraint_margin must be positive");
  if (!bad.empty()) {
    std::string msg = "invalid hyperparameters:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

// ---------------------------------------------------------- preparation

std::vector<SftExample> make_sft_examples(std::span<const data::StepSample> samples,
                                          const text::Vocabulary& vocab, std::size_t budget) {
  std::vector<SftExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({rl::initial_state(s, vocab, budget), text::label_token(s.label)});
  return out;
}

std::vector<FrnPair> make_frn_pairs(std::span<const data::LabelPair> pairs, const text::Vocabulary& vocab,
                                    std::size_t budget) {
  std::vector<FrnPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto prompt = rl::initial_state(p.base, vocab, budget);
    FrnPair fp{prompt, prompt};
    fp.plus.push_back(text::label_token(p.y_plus));
    fp.minus.push_back(text::label_token(p.y_minus));
    out.push_back(std::move(fp));
  }
  return out;
}

std::vector<RlSample> make_rl_samples(std::span<const data::StepSample> samples,
                                      const text::Vocabulary& vocab, std::size_t budget) {
  std::vector<RlSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({rl::initial_state(s, vocab, budget), s.label});
  return out;
}

std::vector<std::string> vocabulary_corpus(std::span<const data::StepSample> samples) {
  std::vector<std::string> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) {
    lines.push_back(text::render_state_text({s.question, s.steps, std::nullopt, 1}));
  }
  return lines;
}

// ---------------------------------------------------------------- loops

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, num::Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) rng.shuffle(std::span<std::size_t>(order));
  return order;
}

Var frn_batch_loss(Tape& tape, model::RewardNetwork& frn, std::span<const FrnPair> pairs,
                   std::span<const std::size_t> idx, bool bradley_terry) {
  std::vector<Var> plus, minus;
  for (std::size_t i : idx) {
    plus.push_back(frn.forward(tape, pairs[i].plus));
    minus.push_back(frn.forward(tape, pairs[i].minus));
  }
  Var rp = plus.size() == 1 ? plus[0] : ops::concat_rows(plus);
  Var rm = minus.size() == 1 ? minus[0] : ops::concat_rows(minus);
  return ops::mean(frn_pairwise_loss(rp, rm, bradley_terry));
}

}  // namespace

double ordering_accuracy(const model::RewardNetwork& frn, std::span<const FrnPair> pairs) {
  if (pairs.empty()) throw ContractError("ordering_accuracy on an empty pair set");
  std::size_t ordered = 0;
  for (const auto& p : pairs) {
    if (frn.reward(p.plus) > frn.reward(p.minus)) ++ordered;
  }
  return static_cast<double>(ordered) / static_cast<double>(pairs.size());
}

std::vector<FrnEpochRecord> train_frn(model::RewardNetwork& frn, std::span<const FrnPair> pairs,
                                      const FrnOptions& options) {
  if (pairs.empty()) throw ContractError("train_frn needs at least one pair");
  num::Rng rng(options.seed);
  AdamState adam;
  auto params = frn.trainable();
  const bool full = options.batch_size == 0 || options.batch_size >= pairs.size();
  const std::size_t bs = full ? pairs.size() : options.batch_size;
  std::vector<FrnEpochRecord> history;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    auto order = epoch_order(pairs.size(), !full, rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      std::span<const std::size_t> idx(order.data() + begin, std::min(bs, order.size() - begin));
      frn.zero_grad();
      Tape tape;
      Var loss = frn_batch_loss(tape, frn, pairs, idx, options.bradley_terry);
      tape.backward(loss);
      optimizer_step(params, adam, options.lr);
      loss_sum += loss.item() * static_cast<double>(idx.size());
    }
    history.push_back({epoch, loss_sum / static_cast<double>(pairs.size()), ordering_accuracy(frn, pairs)});
  }
  return history;
}

std::vector<SftEpochRecord> train_sft(model::PolicyNetwork& policy, std::span<const SftExample> examples,
                                      const SftOptions& options) {
  if (examples.empty()) throw ContractError("train_sft needs at least one example");
  if (options.batch_size == 0) throw ContractError("train_sft batch_size must be at least 1");
  num::Rng rng(options.seed);
  AdamState adam;
  auto params = policy.trainable();
  std::vector<SftEpochRecord> history;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    auto order = epoch_order(examples.size(), true, rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t n = std::min(options.batch_size, order.size() - begin);
      std::vector<SftExample> batch;
      batch.reserve(n);
      for (std::size_t k = 0; k < n; ++k) batch.push_back(examples[order[begin + k]]);
      policy.zero_grad();
      Tape tape;
      Var loss = sft_loss(tape, policy, batch);
      tape.backward(loss);
      optimizer_step(params, adam, options.lr);
      loss_sum += loss.item() * static_cast<double>(n);
    }
    history.push_back({epoch, loss_sum / static_cast<double>(examples.size())});
  }
  return history;
}

std::string rl_record_json(const RlStepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["L_policy"] = r.l_policy;
  j["L_value"] = r.l_value;
  j["L_chosen"] = r.l_chosen;
  j["L_rejected"] = r.l_rejected;
  j["L_const"] = r.l_const;
  j["L_total"] = r.l_total;
  j["alpha"] = r.alpha;
  j["mean_reward"] = r.mean_reward;
  j["mean_abs_advantage"] = r.mean_abs_advantage;
  return j.dump();
}

namespace {

void normalize_advantages(std::vector<rl::Trajectory>& batch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : batch) {
    for (double a : t.advantages) sum += a;
    n += t.advantages.size();
  }
  if (n < 2) return;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& t : batch) {
    for (double a : t.advantages) var += (a - mean) * (a - mean);
  }
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (auto& t : batch) {
    for (double& a : t.advantages) a = (a - mean) / (sd + 1e-8);
  }
}

}  // namespace

RlResult train_rl(model::PolicyNetwork& policy, const model::RewardNetwork* frn,
                  std::span<const RlSample> samples, const Hyperparams& hp, const RlStepCallback& on_step) {
  hp.validate();
  if (samples.empty()) throw ContractError("train_rl needs at least one sample");
  if (!frn && hp.reward_mode != rl::RewardMode::binary) {
    throw ContractError("train_rl: reward mode " + std::string(rl::to_string(hp.reward_mode)) +
                        " needs a reward network");
  }
  if (frn && frn->config().max_len < policy.config().max_len) {
    throw ContractError("reward network max_len is shorter than the policy's");
  }

  num::Rng rng(hp.seed);
  AdamState adam;
  Tensor alpha_raw = Tensor::scalar(hp.alpha_raw_init, true);
  std::vector<Tensor*> params = policy.trainable();
  if (hp.constraint_loss) params.push_back(&alpha_raw);

  const rl::GenerationConfig gen{hp.max_actions, hp.temperature, false};
  RlResult result;
  std::size_t step_no = 0;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    auto order = epoch_order(samples.size(), true, rng);
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
      const std::size_t n = std::min(hp.batch_size, order.size() - begin);
      const std::size_t calls_before = frn ? frn->forward_calls() : 0;

      // theta_old: the trajectories carry the generating policy's log-probabilities and values.
      std::vector<rl::Trajectory> batch;
      std::vector<int> gold_plus, gold_minus;
      batch.reserve(n);
      double reward_sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const RlSample& s = samples[order[begin + k]];
        auto traj = rl::generate(std::as_const(policy), s.prompt, gen, rng);
        rl::assign_rewards(traj, frn, hp.reward_mode, s.gold);
        rl::fill_advantages(traj, hp.gamma, hp.lambda);
        for (double r : traj.rewards) reward_sum += r;
        gold_plus.push_back(text::label_token(s.gold));
        gold_minus.push_back(text::label_token(text::inverse(s.gold)));
        batch.push_back(std::move(traj));
      }
      const double mean_reward = reward_sum / static_cast<double>(n);
      double abs_adv = 0.0;
      std::size_t n_adv = 0;
      for (const auto& t : batch) {
        for (double a : t.advantages) abs_adv += std::abs(a);
        n_adv += t.advantages.size();
      }
      abs_adv /= static_cast<double>(n_adv);
      if (hp.normalize_advantages) normalize_advantages(batch);
      const std::size_t frn_calls = frn ? frn->forward_calls() - calls_before : 0;

      const std::size_t mb = hp.minibatch_size == 0 ? n : std::min(hp.minibatch_size, n);
      for (std::size_t pass = 0; pass < hp.ppo_epochs_per_batch; ++pass) {
        for (std::size_t mb_begin = 0; mb_begin < n; mb_begin += mb) {
          const std::size_t m = std::min(mb, n - mb_begin);
          std::span<const rl::Trajectory> part(batch.data() + mb_begin, m);
          std::vector<double> old_lp, adv, old_v, ret;
          for (const auto& t : part) {
            old_lp.insert(old_lp.end(), t.old_logprobs.begin(), t.old_logprobs.end());
            adv.insert(adv.end(), t.advantages.begin(), t.advantages.end());
            old_v.insert(old_v.end(), t.values.begin(), t.values.end());
            ret.insert(ret.end(), t.returns.begin(), t.returns.end());
          }

          policy.zero_grad();
          alpha_raw.zero_grad();
          Tape tape;
          auto out = run_policy(tape, policy, part);
          RatioStats stats;
          Var lp = ppo_policy_loss(out.new_logprobs, old_lp, adv, hp.epsilon, hp.strict_paper_sign, &stats);
          Var lv = value_loss(out.values, old_v, ret, hp.epsilon);
          Var primary = primary_loss(lp, lv, hp.c_v);

          RlStepRecord rec;
          rec.step = ++step_no;
          rec.l_policy = lp.item();
          rec.l_value = lv.item();
          rec.mean_reward = mean_reward;
          rec.mean_abs_advantage = abs_adv;
          rec.max_ratio_deviation = stats.max_abs_deviation;
          rec.first_after_snapshot = pass == 0 && mb_begin == 0;
          rec.frn_calls = rec.first_after_snapshot ? frn_calls : 0;

          Var total = primary;
          if (hp.constraint_loss) {
            auto terms = constraint_loss(out.answer_logprobs,
                                         std::span<const int>(gold_plus).subspan(mb_begin, m),
                                         std::span<const int>(gold_minus).subspan(mb_begin, m),
                                         hp.constraint_margin);
            total = total_loss(primary, terms.constraint, tape.param(alpha_raw));
            rec.l_chosen = terms.chosen.item();
            rec.l_rejected = terms.rejected.item();
            rec.l_const = terms.constraint.item();
            rec.alpha = ops::sigmoid(alpha_raw.item());
          } else {
            rec.alpha = 1.0;
          }
          rec.l_total = total.item();
          tape.backward(total);
          optimizer_step(params, adam, hp.lr_rl);

          result.history.push_back(rec);
          if (on_step) on_step(rec);
        }
      }
      result.last_batch = std::move(batch);
    }
  }
  result.alpha_raw = alpha_raw.item();
  return result;
}

}  // namespace stepamc::train
