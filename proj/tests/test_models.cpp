#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "stepamc/checkpoint.hpp"
#include "stepamc/errors.hpp"
#include "stepamc/models.hpp"
#include "stepamc/numerics/gradcheck.hpp"
#include "stepamc/numerics/ops.hpp"
#include "test_support.hpp"

using namespace stepamc;
using namespace stepamc::model;
using testsupport::tiny_config;

namespace {

std::size_t count_params(std::vector<NamedTensor> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

std::vector<double> logits_of(const PolicyNetwork& p, const std::vector<int>& tokens) {
  Tape t;
  auto out = p.forward(t, tokens);
  return {out.logits.values().begin(), out.logits.values().end()};
}

}  // namespace

TEST_CASE("parameter counts follow the closed form") {
  ModelConfig desk;
  desk.vocab_size = 64;
  PolicyNetwork p(desk, 1);
  RewardNetwork r(desk, 2);
  CHECK(count_params(p.parameters()) == policy_parameter_count(desk));
  CHECK(count_params(r.parameters()) == reward_parameter_count(desk));
  CHECK(policy_parameter_count(desk) <= 150000);
  auto tiny = tiny_config();
  CHECK(count_params(PolicyNetwork(tiny, 1).parameters()) == policy_parameter_count(tiny));
}

TEST_CASE("forward shapes and length limits") {
  auto cfg = tiny_config();
  PolicyNetwork p(cfg, 3);
  Tape t;
  auto out = p.forward(t, std::vector<int>{6, 7, 2, 6, 7});
  CHECK(out.logits.rows() == 5);
  CHECK(out.logits.cols() == cfg.vocab_size);
  CHECK(out.values.rows() == 5);
  CHECK(out.values.cols() == 1);
  auto tail = p.forward(t, std::vector<int>{6, 7, 2, 6, 7}, 3);
  CHECK(tail.logits.rows() == 2);
  CHECK_THROWS_AS(p.forward(t, std::vector<int>(cfg.max_len + 1, 6)), LengthError);
  CHECK_THROWS_AS(p.forward(t, std::vector<int>{}), ContractError);
}

TEST_CASE("causality: earlier logits ignore later tokens") {
  PolicyNetwork p(tiny_config(), 4);
  std::vector<int> a{6, 7, 2, 6, 7, 3}, b = a;
  b[4] = 1;
  b[5] = 0;
  auto la = logits_of(p, a), lb = logits_of(p, b);
  const std::size_t v = tiny_config().vocab_size;
  for (std::size_t i = 0; i < 4 * v; ++i) CHECK(la[i] == lb[i]);
  bool changed = false;
  for (std::size_t i = 4 * v; i < la.size(); ++i) changed = changed || la[i] != lb[i];
  CHECK(changed);
}

TEST_CASE("replayed forward is bit-identical") {
  ModelConfig cfg;
  cfg.vocab_size = 20;
  PolicyNetwork a(cfg, 9), b(cfg, 9);
  std::vector<int> toks{6, 7, 8, 2, 9, 10};
  CHECK(logits_of(a, toks) == logits_of(b, toks));
  RewardNetwork r1(cfg, 9), r2(cfg, 9);
  CHECK(r1.reward(toks) == r2.reward(toks));
}

TEST_CASE("zero heads give uniform policy rows and zero reward") {
  auto cfg = tiny_config();
  PolicyNetwork p(cfg, 5);
  for (double& w : p.lm_head().weight().values()) w = 0.0;
  for (double& w : p.lm_head().bias().values()) w = 0.0;
  Tape t;
  auto out = p.forward(t, std::vector<int>{6, 7});
  auto probs = num::softmax_rows(out.logits);
  for (double x : probs.values()) CHECK(x == doctest::Approx(1.0 / cfg.vocab_size));

  RewardNetwork r(cfg, 6);
  for (double& w : r.score_head().weight().values()) w = 0.0;
  for (double& w : r.score_head().bias().values()) w = 0.0;
  CHECK(r.reward(std::vector<int>{6, 7, 3}) == 0.0);
  CHECK(r.reward(std::vector<int>{7, 4}) == 0.0);
}

TEST_CASE("reward network reads the last position and counts calls") {
  RewardNetwork r(tiny_config(), 7);
  const auto before = r.forward_calls();
  const double plus = r.reward(std::vector<int>{6, 7, 2, 3});
  const double minus = r.reward(std::vector<int>{6, 7, 2, 4});
  CHECK(plus != minus);
  CHECK(r.forward_calls() == before + 2);
}

TEST_CASE("value and lm heads pass finite-difference checks") {
  PolicyNetwork p(tiny_config(), 8);
  auto params = p.trainable();
  CHECK(count_params(p.parameters()) <= 500);
  const std::vector<int> toks{6, 7, 2, 6};
  auto report = num::finite_diff_check(
      [&](Tape& t) {
        auto out = p.forward(t, toks);
        return num::sum(num::square(out.values)) + num::mean(num::log_softmax_rows(out.logits));
      },
      params);
  CHECK(report.pass);
}

TEST_CASE("adapter is a no-op at attachment and adds r*(in+out) parameters") {
  auto cfg = tiny_config();
  PolicyNetwork p(cfg, 10);
  const std::vector<int> toks{6, 7, 2, 6};
  const auto before = logits_of(p, toks);
  const auto trainable_before = p.trainable_count();
  p.attach_lora("attn.qkv,ffn.up", 2, 0.5, 11);
  CHECK(logits_of(p, toks) == before);
  const std::size_t d = cfg.d_model;
  const std::size_t added = 2 * (d + 3 * d) + 2 * (d + cfg.d_ff);
  const std::size_t frozen = (d * 3 * d + 3 * d) + (d * cfg.d_ff + cfg.d_ff);
  CHECK(p.trainable_count() == trainable_before + added - frozen);
  CHECK_THROWS_AS(p.attach_lora("nothing.matches", 2, 1.0, 1), ConfigError);
}

TEST_CASE("only adapter factors train when adapters are attached") {
  PolicyNetwork p(tiny_config(), 12);
  p.attach_lora("all", 2, 1.0, 13);
  std::map<std::string, std::vector<double>> frozen;
  for (auto& nt : p.parameters()) {
    if (!nt.tensor->requires_grad()) frozen[nt.name] = {nt.tensor->values().begin(), nt.tensor->values().end()};
  }
  CHECK(frozen.count("blocks.0.attn.qkv.weight") == 1);
  CHECK(frozen.count("blocks.0.attn.qkv.bias") == 1);
  p.zero_grad();
  Tape t;
  auto out = p.forward(t, std::vector<int>{6, 7, 2});
  t.backward(num::sum(out.logits));
  for (Tensor* w : p.trainable()) {
    auto v = w->values();
    auto g = w->grad();
    for (std::size_t i = 0; i < v.size() && !g.empty(); ++i) v[i] -= 0.1 * g[i];
  }
  for (auto& nt : p.parameters()) {
    if (frozen.count(nt.name)) {
      CHECK(std::vector<double>(nt.tensor->values().begin(), nt.tensor->values().end()) == frozen[nt.name]);
      CHECK_FALSE(nt.tensor->has_grad());
    }
  }
}

TEST_CASE("sample_next") {
  num::Rng rng(14);
  std::vector<double> dominant{0.0, 60.0, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_next(dominant, 1.0, rng) == 1);
  std::vector<double> uniform(4, 0.0);
  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_next(uniform, 1.0, rng))];
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.25) <= 0.03);
  std::vector<double> tie{1.0, 3.0, 3.0};
  CHECK(sample_next(tie, 1.0, rng, true) == 1);
}

TEST_CASE("checkpoints round-trip exactly and check the vocabulary") {
  auto cfg = tiny_config();
  PolicyNetwork p(cfg, 15);
  p.attach_lora("attn.proj", 2, 0.25, 16);
  for (auto& nt : p.parameters()) {
    if (nt.name.ends_with(".lora_b")) nt.tensor->values()[0] = 0.123456789012345;
  }
  const auto path = (std::filesystem::temp_directory_path() / "stepamc_policy.ckpt").string();
  auto ck = snapshot(p, "sft", "abc");
  ck.scalars["alpha_raw"] = -0.3;
  write_checkpoint(path, ck);
  auto back = read_checkpoint(path);
  CHECK(back.scalars.at("alpha_raw") == -0.3);
  auto q = restore_policy(back, "abc");
  const std::vector<int> toks{6, 7, 2, 6};
  CHECK(logits_of(q, toks) == logits_of(p, toks));
  CHECK(q.lora_specs() == p.lora_specs());
  CHECK_THROWS_AS(restore_policy(back, "other"), DataError);
  CHECK_THROWS_AS(restore_reward(back, "abc"), DataError);

  RewardNetwork r(cfg, 17);
  write_checkpoint(path, snapshot(r, "frn", "abc"));
  auto r2 = restore_reward(read_checkpoint(path), "abc");
  CHECK(r2.reward(toks) == r.reward(toks));
  std::filesystem::remove(path);
}
