#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "stepamc/models.hpp"
#include "stepamc/training.hpp"

namespace stepamc::cfg {

struct Paths {
  std::string train_data;
  std::string val_data;
  std::string test_data;
  std::string vocab;
  std::string frn_checkpoint;
  std::string sft_checkpoint;
  std::string policy_checkpoint;
  std::string log;
  std::string report;
};

struct RunConfig {
  train::Hyperparams hp;
  model::ModelConfig model;  // vocab_size comes from the vocabulary file
  std::size_t vocab_max_size = 64;
  std::size_t sft_epochs = 3;
  std::size_t sft_batch_size = 16;
  std::size_t frn_epochs = 3;
  std::size_t frn_batch_size = 16;
  std::string lora_targets;  // empty = full fine-tuning
  std::size_t lora_rank = 4;
  double lora_scale = 1.0;
  bool no_scpn = false;
  bool no_frn = false;
  bool macro_f1 = false;
  Paths paths;

  // Collects every offending field before throwing ConfigError.
  void validate() const;
  // Hyperparameters with the ablation switches applied.
  train::Hyperparams effective_hyperparams() const;
};

// Unknown keys and ill-typed values raise ConfigError naming each offending key.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);
// Stable key order; load followed by save reproduces the file byte for byte.
std::string config_to_json(const RunConfig& c);
void save_config(const std::string& path, const RunConfig& c);

}  // namespace stepamc::cfg
