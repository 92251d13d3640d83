#include <exception>
#include <functional>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "stepamc/errors.hpp"

using namespace stepamc;
using cli::Overrides;

namespace {

// Deferred copies from CLI11-bound scratch values into optionals, applied only
// for options that were actually given.
class OptionalBinder {
 public:
  template <class T>
  void bind(CLI::App* app, const std::string& flag, std::optional<T>& target, const std::string& help) {
    auto scratch = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *scratch, help);
    apply_.push_back([opt, scratch, &target] {
      if (opt->count() > 0) target = *scratch;
    });
    keep_.push_back(scratch);
  }
  void apply() const {
    for (const auto& f : apply_) f();
  }

 private:
  std::vector<std::function<void()>> apply_;
  std::vector<std::shared_ptr<void>> keep_;
};

void add_common(CLI::App* cmd, Overrides& o, OptionalBinder& b) {
  b.bind(cmd, "--config", o.config_path, "JSON run configuration");
  b.bind(cmd, "--seed", o.seed, "Random seed");
  b.bind(cmd, "--vocab", o.vocab, "Vocabulary file");
  b.bind(cmd, "--train", o.train_data, "Training samples (JSONL)");
  b.bind(cmd, "--val", o.val_data, "Validation samples (JSONL)");
  b.bind(cmd, "--test", o.test_data, "Test samples (JSONL)");
  b.bind(cmd, "--log", o.log, "Append-only JSONL training log");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-level correctness judging: data preparation, reward and policy training, evaluation"};
  app.require_subcommand(1);

  Overrides o;
  OptionalBinder binder;

  data::SynthConfig synth;
  std::uint64_t seed = 0;
  std::string input, out;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate synthetic chain-arithmetic step samples");
  synth_cmd->add_option("--n", synth.n, "Number of samples");
  synth_cmd->add_option("--max-steps", synth.max_steps, "Longest solution");
  synth_cmd->add_option("--error-rate", synth.error_rate, "Per-step perturbation probability");
  synth_cmd->add_option("--value-range", synth.value_range, "Running values stay below this");
  synth_cmd->add_flag("--separable", synth.separable, "Only the judged step may be wrong, with an out-of-range result");
  synth_cmd->add_option("--seed", seed, "Random seed");
  synth_cmd->add_option("--out", out, "Output JSONL")->required();

  std::string format;
  std::size_t target = 0;
  double tolerance = data::kDefaultBalanceTolerance;
  auto* prep_cmd = app.add_subcommand("prepare-data", "Convert raw records into step samples");
  prep_cmd->add_option("format", format, "prm or preference")->required()->check(CLI::IsMember({"prm", "preference"}));
  prep_cmd->add_option("--input", input, "Raw JSONL records")->required();
  prep_cmd->add_option("--out", out, "Output JSONL")->required();
  prep_cmd->add_option("--target-size", target, "Samples to keep (prm; 0 = as many as balance allows)");
  prep_cmd->add_option("--balance-tol", tolerance, "Allowed deviation of the positive fraction from 0.5");
  prep_cmd->add_option("--seed", seed, "Random seed");

  auto* split_cmd = app.add_subcommand("split", "Seeded 8:1:1 train/val/test split with manifest");
  split_cmd->add_option("--input", input, "Samples JSONL")->required();
  split_cmd->add_option("--out-dir", out, "Directory for train/val/test.jsonl and manifest.json")->required();
  split_cmd->add_option("--seed", seed, "Random seed");

  auto* pairs_cmd = app.add_subcommand("label-pairs", "Write (y+, y-) label pairs for a sample file");
  pairs_cmd->add_option("--input", input, "Samples JSONL")->required();
  pairs_cmd->add_option("--out", out, "Output JSONL")->required();

  std::size_t vocab_size = 64;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the word vocabulary from samples");
  vocab_cmd->add_option("--input", input, "Samples JSONL")->required();
  vocab_cmd->add_option("--out", out, "Vocabulary file")->required();
  vocab_cmd->add_option("--max-size", vocab_size, "Largest vocabulary, reserved tokens included");

  auto* frn_cmd = app.add_subcommand("train-frn", "Train the reward network on inverted-label pairs");
  add_common(frn_cmd, o, binder);
  binder.bind(frn_cmd, "--out", o.frn_checkpoint, "Reward checkpoint to write");
  frn_cmd->add_flag("--bradley-terry", o.bradley_terry, "Use -log sigmoid(r+ - r-)");

  auto* sft_cmd = app.add_subcommand("sft", "Supervised warm-up of the policy");
  add_common(sft_cmd, o, binder);
  binder.bind(sft_cmd, "--out", o.sft_checkpoint, "Policy checkpoint to write");

  auto* rl_cmd = app.add_subcommand("train-rl", "PPO with the constraint loss, starting from the warm-up policy");
  add_common(rl_cmd, o, binder);
  binder.bind(rl_cmd, "--sft", o.sft_checkpoint, "Warm-up policy checkpoint");
  binder.bind(rl_cmd, "--frn", o.frn_checkpoint, "Reward checkpoint");
  binder.bind(rl_cmd, "--out", o.policy_checkpoint, "Policy checkpoint to write");
  binder.bind(rl_cmd, "--reward-mode", o.reward_mode, "dense, terminal or binary");
  rl_cmd->add_flag("--no-scpn", o.no_scpn, "Drop the constraint loss");
  rl_cmd->add_flag("--no-frn", o.no_frn, "Binary +1/-1 terminal reward instead of the reward network");
  rl_cmd->add_flag("--strict-paper-sign", o.strict_paper_sign, "Minimise the clipped surrogate without negation");

  std::string split = "test", dump;
  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy evaluation with F1, Acc, Acc_pos, Acc_neg");
  add_common(eval_cmd, o, binder);
  binder.bind(eval_cmd, "--checkpoint", o.policy_checkpoint, "Policy checkpoint");
  binder.bind(eval_cmd, "--report", o.report, "Metrics JSON to write");
  eval_cmd->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--dump", dump, "Per-sample results JSONL");
  eval_cmd->add_flag("--macro", o.macro_f1, "Macro F1 instead of positive-class F1");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every training loss");
  grad_cmd->add_option("--seed", seed, "Random seed");

  auto* config_cmd = app.add_subcommand("config", "Configuration utilities");
  auto* dump_cmd = config_cmd->add_subcommand("dump", "Print the resolved configuration");
  config_cmd->require_subcommand(1);
  add_common(dump_cmd, o, binder);
  dump_cmd->add_option("--out", out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kConfigError;
  }
  binder.apply();

  try {
    if (*synth_cmd) return cli::cmd_synth_data(synth, seed, out);
    if (*prep_cmd) {
      return format == "prm" ? cli::cmd_prepare_prm(input, out, target, tolerance, seed)
                             : cli::cmd_prepare_preference(input, out);
    }
    if (*split_cmd) return cli::cmd_split(input, out, seed);
    if (*pairs_cmd) return cli::cmd_label_pairs(input, out);
    if (*vocab_cmd) return cli::cmd_build_vocab(input, out, vocab_size);
    if (*grad_cmd) return cli::cmd_gradcheck(seed);
    const auto config = cli::resolve_config(o);
    if (*frn_cmd) return cli::cmd_train_frn(config);
    if (*sft_cmd) return cli::cmd_sft(config);
    if (*rl_cmd) return cli::cmd_train_rl(config);
    if (*eval_cmd) return cli::cmd_evaluate(config, split, dump);
    if (*dump_cmd) return cli::cmd_config_dump(config, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::kDataError;
  } catch (const LengthError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kFailure;
  }
  return cli::kFailure;
}
