// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// when any fails. argv[1] is a scratch directory for artifacts.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stepamc/checkpoint.hpp"
#include "stepamc/data.hpp"
#include "stepamc/eval.hpp"
#include "stepamc/gradsuite.hpp"
#include "stepamc/hashing.hpp"
#include "stepamc/numerics/ops.hpp"
#include "stepamc/rollout.hpp"
#include "stepamc/training.hpp"

using namespace stepamc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path g_work;

model::ModelConfig desk_config(std::size_t vocab) {
  model::ModelConfig c;
  c.vocab_size = vocab;
  c.max_len = 48;
  c.d_model = 64;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 256;
  return c;
}

model::ModelConfig small_config(std::size_t vocab) {
  model::ModelConfig c;
  c.vocab_size = vocab;
  c.max_len = 40;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  return c;
}

constexpr std::size_t kMaxActions = 4;

// ------------------------------------------------------------------ 1

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto entries = train::run_gradient_suite(1);
  const double secs = seconds_since(t0);
  std::set<std::string> names;
  double worst = 0.0;
  for (const auto& e : entries) {
    names.insert(e.name);
    worst = std::max(worst, e.report.max_rel_err);
    o.require(e.report.pass, e.name + " worst " + e.report.worst);
    o.require(e.parameters <= 500, e.name + " uses " + std::to_string(e.parameters) + " parameters");
  }
  for (const char* n : {"sft_loss", "ppo_policy_loss", "value_loss", "constraint_loss", "frn_pairwise_loss",
                        "total_loss"}) {
    o.require(names.count(n) == 1, std::string("suite covers ") + n);
  }
  o.require(secs < 120.0, "runtime under 2 minutes");
  o.note(std::to_string(entries.size()) + " losses, max rel err " + fmt("%.2e", worst) + ", " +
         fmt("%.2f", secs) + " s");
  return o;
}

// ------------------------------------------------------------------ 2

Outcome recursion_oracles() {
  Outcome o;
  num::Rng rng(2);
  double worst_gae = 0, worst_ret = 0, worst_l1 = 0, worst_l0 = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(32);
    std::vector<double> r(n), v(n);
    for (auto& x : r) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double gamma = rng.uniform(), lambda = rng.uniform();
    auto a = rl::compute_gae(r, v, gamma, lambda);
    auto ref = oracle::gae(r, v, gamma, lambda);
    auto ret = rl::compute_returns(r, gamma);
    auto ret_ref = oracle::returns(r, gamma);
    auto a1 = rl::compute_gae(r, v, gamma, 1.0);
    auto a0 = rl::compute_gae(r, v, gamma, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      worst_gae = std::max(worst_gae, std::abs(a[t] - ref[t]));
      worst_ret = std::max(worst_ret, std::abs(ret[t] - ret_ref[t]));
      worst_l1 = std::max(worst_l1, std::abs(a1[t] - (ret[t] - v[t])));
      const double delta = r[t] + gamma * (t + 1 < n ? v[t + 1] : 0.0) - v[t];
      worst_l0 = std::max(worst_l0, std::abs(a0[t] - delta));
    }
  }
  o.require(worst_gae <= 1e-12, "GAE vs double sum");
  o.require(worst_ret <= 1e-12, "returns vs suffix sum");
  o.require(worst_l1 <= 1e-10, "lambda = 1 identity");
  o.require(worst_l0 <= 1e-10, "lambda = 0 identity");
  o.note("max err gae " + fmt("%.1e", worst_gae) + ", returns " + fmt("%.1e", worst_ret) + ", lambda=1 " +
         fmt("%.1e", worst_l1) + ", lambda=0 " + fmt("%.1e", worst_l0));
  return o;
}

// ------------------------------------------------------------------ 3

Outcome ppo_semantics() {
  Outcome o;
  // Ratios at theta = theta_old on sampled trajectories.
  model::ModelConfig cfg = small_config(10);
  model::PolicyNetwork policy(cfg, 3);
  num::Rng rng(3);
  std::vector<rl::Trajectory> batch;
  for (int i = 0; i < 6; ++i) {
    auto traj = rl::generate(policy, {6, 7, 8, 2}, {kMaxActions, 1.0, false}, rng);
    traj.rewards.assign(traj.length(), 0.0);
    traj.rewards.back() = rng.normal();
    rl::fill_advantages(traj, 1.0, 0.95);
    batch.push_back(std::move(traj));
  }
  train::RatioStats stats;
  {
    num::Tape t;
    train::ppo_policy_loss(t, policy, batch, 0.2, false, &stats);
  }
  o.require(stats.max_abs_deviation <= 1e-12, "unit ratios at theta_old");

  // Gradient against the analytic vanilla policy gradient on a 2-token toy.
  num::Tensor logits({1, 2}, {0.3, -0.4}, true);
  const std::vector<int> actions{0, 1};
  const std::vector<double> adv{1.5, -0.7};
  auto logp = [&](num::Tape& t) {
    std::array<num::Var, 2> rows{t.param(logits), t.param(logits)};
    return num::gather_rows(num::log_softmax_rows(num::concat_rows(rows)), actions);
  };
  std::vector<double> old;
  {
    num::Tape t;
    auto v = logp(t).values();
    old.assign(v.begin(), v.end());
  }
  {
    num::Tape t;
    t.backward(train::ppo_policy_loss(logp(t), old, adv, 0.2));
  }
  const double p0 = 1.0 / (1.0 + std::exp(-0.7)), p1 = 1.0 - p0;
  const std::array<double, 2> analytic{-(1.5 * (1 - p0) + 0.7 * p0) / 2, -(-1.5 * p1 - 0.7 * (1 - p1)) / 2};
  const double grad_err =
      std::max(std::abs(logits.grad()[0] - analytic[0]), std::abs(logits.grad()[1] - analytic[1]));
  o.require(grad_err <= 1e-8, "policy gradient vs analytic");

  // Clip bounds at d = 1 +- 2 eps.
  const double eps = 0.2;
  double clip_err = 0.0;
  for (double d : {1 + 2 * eps, 1 - 2 * eps}) {
    for (double a : {1.0, -1.0}) {
      num::Tape t;
      const double got = train::ppo_policy_loss(t.constant(1, 1, {std::log(d)}), std::vector<double>{0.0},
                                                std::vector<double>{a}, eps)
                             .item();
      const double clipped = std::clamp(d, 1 - eps, 1 + eps);
      clip_err = std::max(clip_err, std::abs(got + std::min(d * a, clipped * a)));
    }
  }
  o.require(clip_err <= 1e-12, "clip bounds");
  o.note("max |d-1| " + fmt("%.1e", stats.max_abs_deviation) + ", grad err " + fmt("%.1e", grad_err) +
         ", clip err " + fmt("%.1e", clip_err));
  return o;
}

// ------------------------------------------------------------------ 4

Outcome frn_learnability() {
  Outcome o;
  const auto t0 = Clock::now();
  // Balanced separable labels: half of the pairs rank <correct> first.
  auto samples = data::synth_generate({2000, 4, 0.5, 16, true}, 4);
  auto vocab = text::Vocabulary::build(train::vocabulary_corpus(samples), 64);
  auto cfg = desk_config(vocab.size());
  auto pairs = train::make_frn_pairs(data::make_label_pairs(samples), vocab, cfg.max_len - kMaxActions);
  auto run = [&](bool bradley_terry, std::string& trace) {
    model::RewardNetwork frn(cfg, 4);
    std::size_t reached = 0;
    for (const auto& h : train::train_frn(frn, pairs, {5, 16, 1e-4, bradley_terry, 4})) {
      if (!reached && h.ordering_accuracy >= 0.95) reached = h.epoch;
      trace += (trace.empty() ? "" : " ") + fmt("%.3f", h.ordering_accuracy);
    }
    return reached;
  };
  std::string trace, bt_trace;
  const std::size_t reached = run(false, trace);
  const double secs = seconds_since(t0);
  o.require(pairs.size() == 2000, "2000 pairs");
  o.require(reached != 0, "ordering accuracy >= 0.95 within 5 epochs");
  o.require(secs < 300.0, "runtime under 5 minutes");
  o.note("per-epoch accuracy [" + trace + "], " + fmt("%.0f", secs) + " s");
  // Reported only: the shift-invariant form on the same pairs.
  run(true, bt_trace);
  o.note("bradley-terry form [" + bt_trace + "]");
  return o;
}

// ------------------------------------------------------------------ 5

Outcome desk_pipeline() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::uint64_t seed = 5;
  auto samples = data::synth_generate({6250, 4, 0.5, 16, true}, seed);
  auto split = data::split_dataset(samples, seed);
  auto vocab = text::Vocabulary::build(train::vocabulary_corpus(split.train), 64);
  auto cfg = desk_config(vocab.size());
  const std::size_t budget = cfg.max_len - kMaxActions;
  o.require(vocab.size() <= 64, "vocabulary within 64");
  o.require(model::policy_parameter_count(cfg) <= 150000, "policy within 150k parameters");
  o.require(split.train.size() == 5000, "5000 training samples");

  model::PolicyNetwork policy(cfg, seed);
  train::train_sft(policy, train::make_sft_examples(split.train, vocab, budget), {3, 16, 1e-4, seed});
  const double sft_acc = eval::evaluate(policy, split.test, vocab, kMaxActions).report.acc;
  o.require(sft_acc >= 0.90, "SFT accuracy >= 90%");

  model::RewardNetwork frn(cfg, seed + 1);
  train::train_frn(frn, train::make_frn_pairs(data::make_label_pairs(split.train), vocab, budget),
                   {3, 16, 1e-4, false, seed});

  train::Hyperparams hp;
  hp.epochs = 1;
  hp.lr_rl = 1e-4;
  hp.max_actions = kMaxActions;
  hp.seed = seed;
  std::vector<double> rewards;
  train::train_rl(policy, &frn, train::make_rl_samples(split.train, vocab, budget), hp,
                  [&](const train::RlStepRecord& r) { rewards.push_back(r.mean_reward); });
  const double rl_acc = eval::evaluate(policy, split.test, vocab, kMaxActions).report.acc;
  o.require(rl_acc >= sft_acc - 0.02, "RL accuracy within 2 points of SFT");

  // Smoothed reward: means over five consecutive blocks of optimizer steps.
  const std::size_t blocks = 5, width = rewards.size() / blocks;
  std::vector<double> smooth;
  for (std::size_t b = 0; b < blocks && width > 0; ++b) {
    smooth.push_back(std::accumulate(rewards.begin() + b * width, rewards.begin() + (b + 1) * width, 0.0) / width);
  }
  bool nondecreasing = smooth.size() == blocks;
  for (std::size_t i = 1; i < smooth.size(); ++i) nondecreasing = nondecreasing && smooth[i] >= smooth[i - 1];
  o.require(nondecreasing, "smoothed mean reward non-decreasing");

  const double secs = seconds_since(t0);
  o.require(secs < 1800.0, "runtime under 30 minutes");
  std::string trace;
  for (double s : smooth) trace += (trace.empty() ? "" : " ") + fmt("%.2f", s);
  o.note("params " + std::to_string(model::policy_parameter_count(cfg)) + ", SFT acc " +
         fmt("%.2f%%", 100 * sft_acc) + ", RL acc " + fmt("%.2f%%", 100 * rl_acc) + ", reward blocks [" + trace +
         "], " + fmt("%.0f", secs) + " s");
  return o;
}

// ------------------------------------------------------------------ 6

struct TinySetup {
  text::Vocabulary vocab;
  std::vector<train::RlSample> samples;
  model::ModelConfig cfg;
};

TinySetup tiny_setup(std::uint64_t seed) {
  auto samples = data::synth_generate({24, 3, 0.5, 8, true}, seed);
  auto vocab = text::Vocabulary::build(train::vocabulary_corpus(samples), 64);
  auto cfg = small_config(vocab.size());
  auto rl_samples = train::make_rl_samples(samples, vocab, cfg.max_len - kMaxActions);
  return {std::move(vocab), std::move(rl_samples), cfg};
}

Outcome ablations() {
  Outcome o;
  const std::uint64_t seed = 6;
  auto setup = tiny_setup(seed);
  struct Run {
    std::vector<std::string> log;
    std::vector<train::RlStepRecord> records;
    train::RlResult result;
    std::size_t frn_calls = 0;
  };
  auto run = [&](bool no_scpn, bool no_frn) {
    train::Hyperparams hp;
    hp.epochs = 2;
    hp.lr_rl = 1e-3;
    hp.max_actions = kMaxActions;
    hp.seed = seed;
    if (no_scpn) hp.constraint_loss = false;
    if (no_frn) hp.reward_mode = rl::RewardMode::binary;
    model::PolicyNetwork policy(setup.cfg, seed);
    model::RewardNetwork frn(setup.cfg, seed + 1);
    Run r;
    r.result = train::train_rl(policy, &frn, setup.samples, hp, [&](const train::RlStepRecord& rec) {
      r.log.push_back(train::rl_record_json(rec));
      r.records.push_back(rec);
    });
    r.frn_calls = frn.forward_calls();
    return r;
  };
  const Run full = run(false, false), no_scpn = run(true, false), no_frn = run(false, true);

  o.require(std::all_of(no_scpn.records.begin(), no_scpn.records.end(),
                        [](const auto& r) { return r.l_const == 0.0; }),
            "--no-scpn logs L_const == 0");
  o.require(no_frn.frn_calls == 0, "--no-frn never queries the reward network");
  bool binary_only = !no_frn.result.last_batch.empty();
  for (const auto& t : no_frn.result.last_batch) {
    for (std::size_t k = 0; k + 1 < t.rewards.size(); ++k) binary_only = binary_only && t.rewards[k] == 0.0;
    binary_only = binary_only && std::abs(t.rewards.back()) == 1.0;
  }
  o.require(binary_only, "--no-frn rewards are terminal +-1");
  o.require(full.frn_calls > 0, "full run queries the reward network");
  o.require(full.log != no_scpn.log && full.log != no_frn.log && no_scpn.log != no_frn.log,
            "three distinct traces");
  o.note(std::to_string(full.log.size()) + " steps per run, reward-network calls " +
         std::to_string(full.frn_calls) + "/" + std::to_string(no_scpn.frn_calls) + "/" +
         std::to_string(no_frn.frn_calls));
  return o;
}

// ------------------------------------------------------------------ 7

Outcome metrics() {
  Outcome o;
  using eval::Prediction;
  num::Rng rng(7);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(100);
    std::vector<Prediction> pred;
    std::vector<text::Label> gold;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(rng.bernoulli(0.5) ? text::Label::correct : text::Label::incorrect);
      const double u = rng.uniform();
      pred.push_back(u < 0.45 ? Prediction::correct : u < 0.9 ? Prediction::incorrect : Prediction::invalid);
    }
    const auto r = eval::compute_metrics(pred, gold);
    const auto t = oracle::tally(pred, gold);
    const auto m = oracle::metrics(t);
    const bool same = r.counts.tp == t.tp && r.counts.tn == t.tn && r.counts.fp + r.counts.invalid_neg == t.fp &&
                      r.counts.fn + r.counts.invalid_pos == t.fn && r.counts.invalid() == t.invalid &&
                      r.f1 == m.f1 && r.acc == m.acc && r.acc_pos == m.acc_pos && r.acc_neg == m.acc_neg;
    if (!same) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " random cases differ from the tally");

  std::vector<Prediction> pred;
  std::vector<text::Label> gold;
  auto add = [&](int n, Prediction p, text::Label g) {
    for (int i = 0; i < n; ++i) {
      pred.push_back(p);
      gold.push_back(g);
    }
  };
  add(3, Prediction::correct, text::Label::correct);
  add(1, Prediction::correct, text::Label::incorrect);
  add(4, Prediction::incorrect, text::Label::incorrect);
  add(2, Prediction::incorrect, text::Label::correct);
  const auto r = eval::compute_metrics(pred, gold);
  const auto pct = [](double x) { return std::round(x * 10000.0) / 100.0; };
  o.require(pct(r.f1) == 66.67 && pct(r.acc) == 70.0 && pct(r.acc_pos) == 60.0 && pct(r.acc_neg) == 80.0,
            "worked example");
  o.note("1000 random cases exact; worked example F1 " + fmt("%.2f", 100 * r.f1) + " Acc " +
         fmt("%.2f", 100 * r.acc) + " Acc_pos " + fmt("%.2f", 100 * r.acc_pos) + " Acc_neg " +
         fmt("%.2f", 100 * r.acc_neg));
  return o;
}

// ------------------------------------------------------------------ 8

// Runs every stage on a small corpus and returns the content hash of each artifact.
std::vector<std::pair<std::string, std::string>> run_stages(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  auto samples = data::synth_generate({200, 3, 0.4, 8, false}, seed);
  data::write_samples((dir / "all.jsonl").string(), samples);
  auto split = data::split_dataset(samples, seed);
  data::write_split((dir / "split").string(), split);
  auto vocab = text::Vocabulary::build(train::vocabulary_corpus(split.train), 64);
  vocab.save((dir / "vocab.txt").string());
  auto cfg = small_config(vocab.size());
  const std::size_t budget = cfg.max_len - kMaxActions;

  model::RewardNetwork frn(cfg, seed + 1);
  train::train_frn(frn, train::make_frn_pairs(data::make_label_pairs(split.train), vocab, budget),
                   {1, 16, 1e-3, false, seed});
  model::write_checkpoint((dir / "frn.ckpt").string(), model::snapshot(frn, "frn", vocab.hash()));

  model::PolicyNetwork policy(cfg, seed);
  train::train_sft(policy, train::make_sft_examples(split.train, vocab, budget), {1, 16, 1e-3, seed});
  model::write_checkpoint((dir / "sft.ckpt").string(), model::snapshot(policy, "sft", vocab.hash()));

  train::Hyperparams hp;
  hp.epochs = 1;
  hp.lr_rl = 1e-3;
  hp.max_actions = kMaxActions;
  hp.seed = seed;
  {
    std::ofstream log(dir / "rl.log", std::ios::binary);
    auto rl_samples = train::make_rl_samples(split.train, vocab, budget);
    train::train_rl(policy, &frn, std::span(rl_samples).first(48), hp,
                    [&](const train::RlStepRecord& r) { log << train::rl_record_json(r) << '\n'; });
  }
  model::write_checkpoint((dir / "rl.ckpt").string(), model::snapshot(policy, "rl", vocab.hash()));
  {
    std::ofstream report(dir / "report.json", std::ios::binary);
    report << eval::report_json(eval::evaluate(policy, split.test, vocab, kMaxActions).report);
  }

  std::vector<std::pair<std::string, std::string>> hashes;
  for (const char* name : {"all.jsonl", "split/train.jsonl", "split/val.jsonl", "split/test.jsonl",
                           "split/manifest.json", "vocab.txt", "frn.ckpt", "sft.ckpt", "rl.log", "rl.ckpt",
                           "report.json"}) {
    hashes.emplace_back(name, hash_file((dir / name).string()));
  }
  return hashes;
}

Outcome data_contracts() {
  Outcome o;
  num::Rng rng(8);

  bool split_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(500);
    auto samples = data::synth_generate({n, 3, 0.3, 16, false}, 100 + trial);
    auto s = data::split_dataset(samples, trial);
    const double nn = static_cast<double>(n);
    split_ok = split_ok && std::abs(double(s.train.size()) - 0.8 * nn) <= 1.0 &&
               std::abs(double(s.val.size()) - 0.1 * nn) <= 1.0 && std::abs(double(s.test.size()) - 0.1 * nn) <= 1.0 &&
               s.train.size() + s.val.size() + s.test.size() == n;
  }
  o.require(split_ok, "8:1:1 within one sample");

  std::vector<data::RawPrmRecord> records;
  std::set<std::string> flagged;
  for (int i = 0; i < 400; ++i) {
    data::RawPrmRecord r;
    r.problem = "problem " + std::to_string(i);
    if (i % 7 == 0) r.flags.push_back(i % 2 ? "bad_problem" : "give_up");
    if (!r.flags.empty()) flagged.insert(r.problem);
    const int solutions = rng.between(1, 3);
    for (int s = 0; s < solutions; ++s) {
      data::RawPrmSolution sol;
      const int len = rng.between(1, 6);
      for (int k = 0; k < len; ++k) {
        const double u = rng.uniform();
        sol.steps.push_back({"step " + std::to_string(k),
                             u < 0.55 ? data::Rating::positive
                             : u < 0.7 ? data::Rating::neutral
                                       : data::Rating::negative});
      }
      r.solutions.push_back(std::move(sol));
    }
    records.push_back(std::move(r));
  }
  auto prm = data::convert_prm(records, 0, data::kDefaultBalanceTolerance, 8);
  const bool no_flagged =
      std::none_of(prm.begin(), prm.end(), [&](const auto& s) { return flagged.count(s.question) != 0; });
  o.require(no_flagged, "flagged problems excluded");
  const double prm_pos = data::positive_fraction(prm);
  o.require(std::abs(prm_pos - 0.5) <= data::kDefaultBalanceTolerance, "PRM balance within 0.1");

  std::vector<data::PreferenceRecord> prefs;
  for (int i = 0; i < 101; ++i) prefs.push_back({"p" + std::to_string(i), {"a"}, "good", "bad"});
  auto pref = data::convert_preferences(prefs);
  o.require(pref.size() == 202 && data::positive_fraction(pref) == 0.5, "preference 1:1");

  const auto a = run_stages(g_work / "repro_a", 8);
  const auto b = run_stages(g_work / "repro_b", 8);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second != b[i].second) {
      ++differing;
      o.require(false, a[i].first + " hash differs");
    }
  }
  o.note("PRM positive fraction " + fmt("%.3f", prm_pos) + " over " + std::to_string(prm.size()) + " samples, " +
         std::to_string(a.size() - differing) + "/" + std::to_string(a.size()) + " artifact hashes identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stepamc_acceptance";
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient suite", gradient_suite},
      {"2 recursion oracles", recursion_oracles},
      {"3 ppo semantics", ppo_semantics},
      {"4 reward network learnability", frn_learnability},
      {"5 desk pipeline", desk_pipeline},
      {"6 ablation plumbing", ablations},
      {"7 metrics exactness", metrics},
      {"8 data contracts", data_contracts},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
