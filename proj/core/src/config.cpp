#include "stepamc/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "stepamc/errors.hpp"

namespace stepamc::cfg {

using nlohmann::ordered_json;

namespace {

// One entry per key: how to write it and how to read it back.
struct Field {
  std::string key;
  std::function<ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, const ordered_json&)> set;
};

template <class T>
Field field(std::string key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return ordered_json(c.*member); },
          [member](RunConfig& c, const ordered_json& j) { c.*member = j.get<T>(); }};
}

template <class T>
Field hp_field(std::string key, T train::Hyperparams::*member) {
  return {key, [member](const RunConfig& c) { return ordered_json(c.hp.*member); },
          [member](RunConfig& c, const ordered_json& j) { c.hp.*member = j.get<T>(); }};
}

template <class T>
Field model_field(std::string key, T model::ModelConfig::*member) {
  return {key, [member](const RunConfig& c) { return ordered_json(c.model.*member); },
          [member](RunConfig& c, const ordered_json& j) { c.model.*member = j.get<T>(); }};
}

Field path_field(std::string key, std::string Paths::*member) {
  return {key, [member](const RunConfig& c) { return ordered_json(c.paths.*member); },
          [member](RunConfig& c, const ordered_json& j) { c.paths.*member = j.get<std::string>(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(hp_field("gamma", &train::Hyperparams::gamma));
    f.push_back(hp_field("lambda", &train::Hyperparams::lambda));
    f.push_back(hp_field("epsilon", &train::Hyperparams::epsilon));
    f.push_back(hp_field("c_v", &train::Hyperparams::c_v));
    f.push_back(hp_field("alpha_raw_init", &train::Hyperparams::alpha_raw_init));
    f.push_back(hp_field("lr_sft", &train::Hyperparams::lr_sft));
    f.push_back(hp_field("lr_rl", &train::Hyperparams::lr_rl));
    f.push_back(hp_field("lr_frn", &train::Hyperparams::lr_frn));
    f.push_back(hp_field("epochs", &train::Hyperparams::epochs));
    f.push_back(hp_field("batch_size", &train::Hyperparams::batch_size));
    f.push_back(hp_field("minibatch_size", &train::Hyperparams::minibatch_size));
    f.push_back(hp_field("max_actions", &train::Hyperparams::max_actions));
    f.push_back(hp_field("ppo_epochs_per_batch", &train::Hyperparams::ppo_epochs_per_batch));
    f.push_back(hp_field("temperature", &train::Hyperparams::temperature));
    f.push_back({"reward_mode",
                 [](const RunConfig& c) { return ordered_json(std::string(rl::to_string(c.hp.reward_mode))); },
                 [](RunConfig& c, const ordered_json& j) {
                   auto m = rl::parse_reward_mode(j.get<std::string>());
                   if (!m) throw ConfigError("unknown reward mode " + j.get<std::string>());
                   c.hp.reward_mode = *m;
                 }});
    f.push_back(hp_field("constraint_margin", &train::Hyperparams::constraint_margin));
    f.push_back(hp_field("strict_paper_sign", &train::Hyperparams::strict_paper_sign));
    f.push_back(hp_field("bradley_terry", &train::Hyperparams::bradley_terry));
    f.push_back(hp_field("normalize_advantages", &train::Hyperparams::normalize_advantages));
    f.push_back(hp_field("seed", &train::Hyperparams::seed));
    f.push_back(field("no_scpn", &RunConfig::no_scpn));
    f.push_back(field("no_frn", &RunConfig::no_frn));
    f.push_back(field("macro_f1", &RunConfig::macro_f1));
    f.push_back(model_field("max_len", &model::ModelConfig::max_len));
    f.push_back(model_field("d_model", &model::ModelConfig::d_model));
    f.push_back(model_field("n_layers", &model::ModelConfig::n_layers));
    f.push_back(model_field("n_heads", &model::ModelConfig::n_heads));
    f.push_back(model_field("d_ff", &model::ModelConfig::d_ff));
    f.push_back(field("vocab_max_size", &RunConfig::vocab_max_size));
    f.push_back(field("sft_epochs", &RunConfig::sft_epochs));
    f.push_back(field("sft_batch_size", &RunConfig::sft_batch_size));
    f.push_back(field("frn_epochs", &RunConfig::frn_epochs));
    f.push_back(field("frn_batch_size", &RunConfig::frn_batch_size));
    f.push_back(field("lora_targets", &RunConfig::lora_targets));
    f.push_back(field("lora_rank", &RunConfig::lora_rank));
    f.push_back(field("lora_scale", &RunConfig::lora_scale));
    f.push_back(path_field("train_data", &Paths::train_data));
    f.push_back(path_field("val_data", &Paths::val_data));
    f.push_back(path_field("test_data", &Paths::test_data));
    f.push_back(path_field("vocab", &Paths::vocab));
    f.push_back(path_field("frn_checkpoint", &Paths::frn_checkpoint));
    f.push_back(path_field("sft_checkpoint", &Paths::sft_checkpoint));
    f.push_back(path_field("policy_checkpoint", &Paths::policy_checkpoint));
    f.push_back(path_field("log", &Paths::log));
    f.push_back(path_field("report", &Paths::report));
    return f;
  }();
  return all;
}

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> bad;
  try {
    hp.validate();
  } catch (const ConfigError& e) {
    bad.push_back(e.what());
  }
  if (model.max_len < hp.max_actions + 2) bad.push_back("max_len must exceed max_actions + 1");
  if (model.d_model == 0) bad.push_back("d_model must be positive");
  if (model.n_layers == 0) bad.push_back("n_layers must be positive");
  if (model.n_heads == 0 || model.d_model % model.n_heads != 0) {
    bad.push_back("n_heads must be positive and divide d_model");
  }
  if (model.d_ff == 0) bad.push_back("d_ff must be positive");
  if (vocab_max_size < 7) bad.push_back("vocab_max_size must be at least 7");
  if (sft_epochs == 0) bad.push_back("sft_epochs must be at least 1");
  if (sft_batch_size == 0) bad.push_back("sft_batch_size must be at least 1");
  if (frn_epochs == 0) bad.push_back("frn_epochs must be at least 1");
  if (!lora_targets.empty() && lora_rank == 0) bad.push_back("lora_rank must be positive");
  if (no_frn && hp.reward_mode != rl::RewardMode::dense && hp.reward_mode != rl::RewardMode::binary) {
    bad.push_back("no_frn conflicts with reward_mode " + std::string(rl::to_string(hp.reward_mode)));
  }
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

train::Hyperparams RunConfig::effective_hyperparams() const {
  train::Hyperparams h = hp;
  if (no_scpn) h.constraint_loss = false;
  if (no_frn) h.reward_mode = rl::RewardMode::binary;
  return h;
}

RunConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  RunConfig c;
  std::vector<std::string> bad;
  for (const auto& [key, value] : j.items()) {
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      bad.push_back(key + ": unknown key");
      continue;
    }
    try {
      it->second->set(c, value);
    } catch (const std::exception& e) {
      bad.push_back(key + ": " + e.what());
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid configuration keys:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open configuration " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j = ordered_json::object();
  for (const auto& f : fields()) j[f.key] = f.get(c);
  return j.dump(2) + "\n";
}

void save_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write configuration " + path);
  out << config_to_json(c);
}

}  // namespace stepamc::cfg
