#include <benchmark/benchmark.h>

#include <vector>

#include "stepamc/numerics/ops.hpp"
#include "stepamc/numerics/rng.hpp"
#include "stepamc/rollout.hpp"
#include "stepamc/training.hpp"

using namespace stepamc;

namespace {

model::ModelConfig bench_config() {
  model::ModelConfig c;
  c.vocab_size = 64;
  return c;
}

std::vector<double> normals(std::size_t n, num::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::Rng rng(1);
  auto a = normals(n * n, rng), b = normals(n * n, rng);
  for (auto _ : state) {
    num::Tape t;
    benchmark::DoNotOptimize(num::matmul(t.constant(n, n, a), t.constant(n, n, b)).values()[0]);
  }
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_PolicyForward(benchmark::State& state) {
  model::PolicyNetwork policy(bench_config(), 1);
  std::vector<int> tokens(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = 6 + static_cast<int>(i % 50);
  for (auto _ : state) {
    num::Tape t;
    auto out = policy.forward(t, tokens);
    benchmark::DoNotOptimize(out.values.values()[0]);
  }
}
BENCHMARK(BM_PolicyForward)->Arg(16)->Arg(48);

void BM_Gae(benchmark::State& state) {
  num::Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  auto r = normals(n, rng), v = normals(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rl::compute_gae(r, v, 1.0, 0.95));
}
BENCHMARK(BM_Gae)->Arg(4)->Arg(32)->Arg(1024);

void BM_PpoStep(benchmark::State& state) {
  model::PolicyNetwork policy(bench_config(), 3);
  num::Rng rng(3);
  std::vector<rl::Trajectory> batch;
  for (int i = 0; i < 8; ++i) {
    std::vector<int> prompt(40);
    for (std::size_t k = 0; k < prompt.size(); ++k) prompt[k] = 6 + static_cast<int>(rng.below(58));
    auto traj = rl::generate(policy, prompt, {4, 1.0, false}, rng);
    traj.rewards.assign(traj.length(), 0.0);
    traj.rewards.back() = 1.0;
    rl::fill_advantages(traj, 1.0, 0.95);
    batch.push_back(std::move(traj));
  }
  auto params = policy.trainable();
  train::AdamState adam;
  for (auto _ : state) {
    for (auto* p : params) p->zero_grad();
    num::Tape t;
    auto loss = train::primary_loss(train::ppo_policy_loss(t, policy, batch, 0.2),
                                    train::value_loss(t, policy, batch, 0.2), 0.1);
    t.backward(loss);
    train::optimizer_step(params, adam, 0.0);
  }
}
BENCHMARK(BM_PpoStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
