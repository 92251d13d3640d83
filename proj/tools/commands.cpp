#include "commands.hpp"

#include <fstream>
#include <iostream>

#include "stepamc/checkpoint.hpp"
#include "stepamc/errors.hpp"
#include "stepamc/eval.hpp"
#include "stepamc/gradsuite.hpp"
#include "stepamc/hashing.hpp"
#include "stepamc/textcodec.hpp"
#include "stepamc/training.hpp"

namespace stepamc::cli {

namespace {

std::uint64_t frn_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

void require(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required setting ") + key);
}

text::Vocabulary load_vocab(const cfg::RunConfig& c) {
  require(c.paths.vocab, "vocab");
  return text::Vocabulary::load(c.paths.vocab);
}

model::ModelConfig model_config(const cfg::RunConfig& c, const text::Vocabulary& vocab) {
  auto m = c.model;
  m.vocab_size = vocab.size();
  m.validate();
  return m;
}

std::size_t prompt_budget(const cfg::RunConfig& c) { return c.model.max_len - c.hp.max_actions; }

std::vector<data::StepSample> load_split(const std::string& path, const char* key) {
  require(path, key);
  auto samples = data::read_samples(path);
  if (samples.empty()) throw DataError(path + " holds no samples");
  return samples;
}

std::ofstream open_log(const std::string& path) {
  std::ofstream out;
  if (path.empty()) return out;
  out.open(path, std::ios::app);
  if (!out) throw DataError("cannot open log " + path);
  return out;
}

}  // namespace

cfg::RunConfig resolve_config(const Overrides& o) {
  cfg::RunConfig c = o.config_path ? cfg::load_config(*o.config_path) : cfg::RunConfig{};
  if (o.seed) c.hp.seed = *o.seed;
  if (o.train_data) c.paths.train_data = *o.train_data;
  if (o.val_data) c.paths.val_data = *o.val_data;
  if (o.test_data) c.paths.test_data = *o.test_data;
  if (o.vocab) c.paths.vocab = *o.vocab;
  if (o.frn_checkpoint) c.paths.frn_checkpoint = *o.frn_checkpoint;
  if (o.sft_checkpoint) c.paths.sft_checkpoint = *o.sft_checkpoint;
  if (o.policy_checkpoint) c.paths.policy_checkpoint = *o.policy_checkpoint;
  if (o.log) c.paths.log = *o.log;
  if (o.report) c.paths.report = *o.report;
  if (o.reward_mode) {
    auto m = rl::parse_reward_mode(*o.reward_mode);
    if (!m) throw ConfigError("reward_mode: unknown mode " + *o.reward_mode);
    c.hp.reward_mode = *m;
  }
  if (o.no_scpn) c.no_scpn = true;
  if (o.no_frn) c.no_frn = true;
  if (o.strict_paper_sign) c.hp.strict_paper_sign = true;
  if (o.bradley_terry) c.hp.bradley_terry = true;
  if (o.macro_f1) c.macro_f1 = true;
  c.validate();
  return c;
}

int cmd_synth_data(const data::SynthConfig& config, std::uint64_t seed, const std::string& out) {
  auto samples = data::synth_generate(config, seed);
  data::write_samples(out, samples);
  std::cout << "wrote " << samples.size() << " samples (positive fraction "
            << data::positive_fraction(samples) << ") to " << out << "\n";
  return kOk;
}

int cmd_prepare_prm(const std::string& input, const std::string& out, std::size_t target,
                    double tolerance, std::uint64_t seed) {
  auto records = data::read_prm_records(input);
  auto samples = data::convert_prm(records, target, tolerance, seed);
  data::write_samples(out, samples);
  std::cout << "converted " << records.size() << " records into " << samples.size()
            << " samples (positive fraction " << data::positive_fraction(samples) << ")\n";
  return kOk;
}

int cmd_prepare_preference(const std::string& input, const std::string& out) {
  auto records = data::read_preference_records(input);
  auto samples = data::convert_preferences(records);
  data::write_samples(out, samples);
  std::cout << "converted " << records.size() << " records into " << samples.size() << " samples\n";
  return kOk;
}

int cmd_split(const std::string& input, const std::string& out_dir, std::uint64_t seed) {
  auto samples = data::read_samples(input);
  auto split = data::split_dataset(samples, seed);
  data::write_split(out_dir, split);
  std::cout << "train " << split.train.size() << ", val " << split.val.size() << ", test "
            << split.test.size() << "\n";
  return kOk;
}

int cmd_label_pairs(const std::string& input, const std::string& out) {
  auto samples = data::read_samples(input);
  auto pairs = data::make_label_pairs(samples);
  data::write_label_pairs(out, pairs);
  std::cout << "wrote " << pairs.size() << " label pairs\n";
  return kOk;
}

int cmd_build_vocab(const std::string& input, const std::string& out, std::size_t max_size) {
  auto samples = data::read_samples(input);
  auto vocab = text::Vocabulary::build(train::vocabulary_corpus(samples), max_size);
  vocab.save(out);
  std::cout << "vocabulary of " << vocab.size() << " tokens, hash " << vocab.hash() << "\n";
  return kOk;
}

int cmd_train_frn(const cfg::RunConfig& c) {
  require(c.paths.frn_checkpoint, "frn_checkpoint");
  auto vocab = load_vocab(c);
  auto samples = load_split(c.paths.train_data, "train_data");
  auto pairs = train::make_frn_pairs(data::make_label_pairs(samples), vocab, prompt_budget(c));

  model::RewardNetwork frn(model_config(c, vocab), frn_seed(c.hp.seed));
  if (!c.lora_targets.empty()) frn.attach_lora(c.lora_targets, c.lora_rank, c.lora_scale, frn_seed(c.hp.seed) + 1);
  train::FrnOptions opt{c.frn_epochs, c.frn_batch_size, c.hp.lr_frn, c.hp.bradley_terry, c.hp.seed};
  auto history = train::train_frn(frn, pairs, opt);

  auto log = open_log(c.paths.log);
  for (const auto& h : history) {
    std::cout << "epoch " << h.epoch << " loss " << h.mean_loss << " ordering_accuracy "
              << h.ordering_accuracy << "\n";
    if (log) {
      log << R"({"stage":"frn","epoch":)" << h.epoch << R"(,"loss":)" << h.mean_loss
          << R"(,"ordering_accuracy":)" << h.ordering_accuracy << "}\n";
    }
  }
  model::write_checkpoint(c.paths.frn_checkpoint, model::snapshot(frn, "frn", vocab.hash()));
  return kOk;
}

int cmd_sft(const cfg::RunConfig& c) {
  require(c.paths.sft_checkpoint, "sft_checkpoint");
  auto vocab = load_vocab(c);
  auto samples = load_split(c.paths.train_data, "train_data");
  auto examples = train::make_sft_examples(samples, vocab, prompt_budget(c));

  model::PolicyNetwork policy(model_config(c, vocab), c.hp.seed);
  if (!c.lora_targets.empty()) policy.attach_lora(c.lora_targets, c.lora_rank, c.lora_scale, c.hp.seed + 1);
  train::SftOptions opt{c.sft_epochs, c.sft_batch_size, c.hp.lr_sft, c.hp.seed};
  auto history = train::train_sft(policy, examples, opt);

  auto log = open_log(c.paths.log);
  for (const auto& h : history) {
    std::cout << "epoch " << h.epoch << " loss " << h.mean_loss << "\n";
    if (log) log << R"({"stage":"sft","epoch":)" << h.epoch << R"(,"loss":)" << h.mean_loss << "}\n";
  }
  model::write_checkpoint(c.paths.sft_checkpoint, model::snapshot(policy, "sft", vocab.hash()));
  return kOk;
}

int cmd_train_rl(const cfg::RunConfig& c) {
  require(c.paths.sft_checkpoint, "sft_checkpoint");
  require(c.paths.policy_checkpoint, "policy_checkpoint");
  const auto hp = c.effective_hyperparams();
  auto vocab = load_vocab(c);
  auto samples = load_split(c.paths.train_data, "train_data");
  auto rl_samples = train::make_rl_samples(samples, vocab, prompt_budget(c));

  auto policy = model::restore_policy(model::read_checkpoint(c.paths.sft_checkpoint), vocab.hash());
  if (policy.config().max_len < hp.max_actions + 2) throw ConfigError("checkpoint max_len too short");
  std::optional<model::RewardNetwork> frn;
  if (hp.reward_mode != rl::RewardMode::binary) {
    require(c.paths.frn_checkpoint, "frn_checkpoint");
    frn = model::restore_reward(model::read_checkpoint(c.paths.frn_checkpoint), vocab.hash());
  }

  auto log = open_log(c.paths.log);
  auto result = train::train_rl(policy, frn ? &*frn : nullptr, rl_samples, hp,
                                [&](const train::RlStepRecord& r) {
                                  if (log) log << train::rl_record_json(r) << "\n";
                                });
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    std::cout << "steps " << result.history.size() << " final L_total " << last.l_total << " alpha "
              << last.alpha << " mean_reward " << last.mean_reward << "\n";
  }
  if (frn) std::cout << "reward network forward passes " << frn->forward_calls() << "\n";
  auto ckpt = model::snapshot(policy, "rl", vocab.hash());
  ckpt.scalars["alpha_raw"] = result.alpha_raw;
  model::write_checkpoint(c.paths.policy_checkpoint, ckpt);
  return kOk;
}

int cmd_evaluate(const cfg::RunConfig& c, const std::string& split, const std::string& dump) {
  auto vocab = load_vocab(c);
  std::string data_path = split == "val" ? c.paths.val_data : split == "train" ? c.paths.train_data : c.paths.test_data;
  auto samples = load_split(data_path, "evaluation data");
  std::string ckpt_path = c.paths.policy_checkpoint.empty() ? c.paths.sft_checkpoint : c.paths.policy_checkpoint;
  require(ckpt_path, "policy_checkpoint");
  auto policy = model::restore_policy(model::read_checkpoint(ckpt_path), vocab.hash());
  auto result = eval::evaluate(policy, samples, vocab, c.hp.max_actions, c.macro_f1);

  std::cout << eval::format_table(result.report, "model");
  if (!c.paths.report.empty()) {
    std::ofstream out(c.paths.report);
    if (!out) throw DataError("cannot write report " + c.paths.report);
    out << eval::report_json(result.report) << "\n";
  }
  if (!dump.empty()) {
    std::ofstream out(dump);
    if (!out) throw DataError("cannot write " + dump);
    for (const auto& s : result.samples) out << eval::sample_result_json(s, vocab) << "\n";
  }
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& e : train::run_gradient_suite(seed)) {
    std::cout << (e.report.pass ? "ok   " : "FAIL ") << e.name << " params=" << e.parameters
              << " max_rel=" << e.report.max_rel_err << " max_abs=" << e.report.max_abs_err;
    if (!e.report.pass) std::cout << " failures=" << e.report.failures << " worst=" << e.report.worst;
    std::cout << "\n";
    ok = ok && e.report.pass;
  }
  return ok ? kOk : kNumericFailure;
}

int cmd_config_dump(const cfg::RunConfig& c, const std::string& out) {
  if (out.empty()) {
    std::cout << cfg::config_to_json(c);
  } else {
    cfg::save_config(out, c);
  }
  return kOk;
}

}  // namespace stepamc::cli
