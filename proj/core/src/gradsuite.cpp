#include "stepamc/gradsuite.hpp"

#include "stepamc/numerics/ops.hpp"
#include "stepamc/numerics/rng.hpp"
#include "stepamc/textcodec.hpp"
#include "stepamc/training.hpp"

namespace stepamc::train {

model::ModelConfig gradsuite_config() {
  model::ModelConfig c;
  c.vocab_size = 8;
  c.max_len = 8;
  c.d_model = 4;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 8;
  return c;
}

namespace {

using num::GradCheckReport;
using num::LossFn;

double spread(num::Rng& rng, double half_width) { return half_width * (2.0 * rng.uniform() - 1.0); }

struct Fixture {
  std::vector<SftExample> sft;
  std::vector<rl::Trajectory> trajs;
  std::vector<int> plus, minus;
  std::vector<FrnPair> pairs;
};

Fixture make_fixture(model::PolicyNetwork& policy, num::Rng& rng) {
  Fixture f;
  f.sft = {{{6, 7, 2, 6}, text::kCorrect}, {{7, 2, 7}, text::kIncorrect}};
  f.trajs.resize(2);
  f.trajs[0].prompt = {6, 7, 2, 6};
  f.trajs[0].actions = {text::kCorrect, 7, text::kEos};
  f.trajs[1].prompt = {7, 2, 7};
  f.trajs[1].actions = {text::kIncorrect, text::kEos};
  f.plus = {text::kCorrect, text::kIncorrect};
  f.minus = {text::kIncorrect, text::kCorrect};
  f.pairs = {{{6, 7, 2, text::kCorrect}, {6, 7, 2, text::kIncorrect}},
             {{7, 7, 2, 6, text::kIncorrect}, {7, 7, 2, 6, text::kCorrect}}};

  Tape tape;
  auto pass = run_policy(tape, policy, f.trajs);
  std::size_t row = 0;
  for (auto& t : f.trajs) {
    for (std::size_t k = 0; k < t.length(); ++k, ++row) {
      // Ratios mostly inside the clip band; the first token of each trajectory well outside it.
      const double offset = k == 0 ? 0.6 : spread(rng, 0.1);
      t.old_logprobs.push_back(pass.new_logprobs.values()[row] - offset);
      t.values.push_back(pass.values.values()[row] + spread(rng, 0.3));
      t.advantages.push_back(rng.normal());
      t.returns.push_back(rng.normal());
    }
  }
  return f;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, double tol, double abs_floor) {
  const auto cfg = gradsuite_config();
  model::PolicyNetwork policy(cfg, seed);
  model::RewardNetwork frn(cfg, seed + 1);
  num::Rng rng(seed + 2);
  Fixture f = make_fixture(policy, rng);
  Tensor alpha_raw = Tensor::scalar(0.3, true);
  const double eps = 0.2;
  const double h = 1e-5;

  std::vector<GradSuiteEntry> out;
  auto check = [&](std::string name, const LossFn& fn, std::vector<Tensor*> params) {
    std::size_t n = 0;
    for (auto* p : params) n += p->size();
    out.push_back({std::move(name), n, num::finite_diff_check(fn, params, h, tol, abs_floor)});
  };

  auto policy_params = policy.trainable();
  check("sft_loss", [&](Tape& t) { return sft_loss(t, policy, f.sft); }, policy_params);
  check("ppo_policy_loss",
        [&](Tape& t) { return ppo_policy_loss(t, policy, f.trajs, eps); }, policy_params);
  check("value_loss", [&](Tape& t) { return value_loss(t, policy, f.trajs, eps); }, policy_params);
  check("constraint_loss",
        [&](Tape& t) {
          auto pass = run_policy(t, policy, f.trajs);
          return constraint_loss(pass.answer_logprobs, f.plus, f.minus, 10.0).constraint;
        },
        policy_params);

  auto frn_loss = [&](bool bt) {
    return [&, bt](Tape& t) {
      std::vector<Var> rp, rm;
      for (const auto& p : f.pairs) {
        rp.push_back(frn.forward(t, p.plus));
        rm.push_back(frn.forward(t, p.minus));
      }
      return num::mean(frn_pairwise_loss(num::concat_rows(rp), num::concat_rows(rm), bt));
    };
  };
  check("frn_pairwise_loss", frn_loss(false), frn.trainable());
  check("frn_pairwise_loss_bradley_terry", frn_loss(true), frn.trainable());

  auto total_params = policy_params;
  total_params.push_back(&alpha_raw);
  check("total_loss",
        [&](Tape& t) {
          auto pass = run_policy(t, policy, f.trajs);
          std::vector<double> old_lp, adv, old_v, ret;
          for (const auto& tr : f.trajs) {
            old_lp.insert(old_lp.end(), tr.old_logprobs.begin(), tr.old_logprobs.end());
            adv.insert(adv.end(), tr.advantages.begin(), tr.advantages.end());
            old_v.insert(old_v.end(), tr.values.begin(), tr.values.end());
            ret.insert(ret.end(), tr.returns.begin(), tr.returns.end());
          }
          Var lp = ppo_policy_loss(pass.new_logprobs, old_lp, adv, eps);
          Var lv = value_loss(pass.values, old_v, ret, eps);
          auto c = constraint_loss(pass.answer_logprobs, f.plus, f.minus, 10.0);
          return total_loss(primary_loss(lp, lv, 0.1), c.constraint, t.param(alpha_raw));
        },
        total_params);

  model::PolicyNetwork adapted(cfg, seed + 3);
  adapted.attach_lora("all", 2, 0.5, seed + 4);
  // Move B off zero so both adapter factors carry gradient.
  for (auto& nt : adapted.parameters()) {
    if (nt.name.ends_with(".lora_b")) {
      for (double& v : nt.tensor->values()) v = spread(rng, 0.1);
    }
  }
  check("sft_loss_lora", [&](Tape& t) { return sft_loss(t, adapted, f.sft); }, adapted.trainable());
  return out;
}

}  // namespace stepamc::train
