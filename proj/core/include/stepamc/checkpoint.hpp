#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stepamc/models.hpp"

namespace stepamc::model {

// Flat-text checkpoint: a header (kind, stage, vocabulary hash, model config,
// adapters, named scalars) followed by every named parameter with its shape.
// Values are written in shortest round-trip form, so save/load is exact.
struct Checkpoint {
  std::string kind;   // "policy" or "reward"
  std::string stage;  // producing stage, e.g. "init", "sft", "rl", "frn"
  std::string vocab_hash;
  ModelConfig config;
  std::vector<LoraSpec> lora;
  std::map<std::string, double> scalars;
  std::vector<std::pair<std::string, Tensor>> params;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint snapshot(PolicyNetwork& policy, std::string stage, std::string vocab_hash);
Checkpoint snapshot(RewardNetwork& reward, std::string stage, std::string vocab_hash);

// Rebuild a network; throws DataError when the checkpoint was written against a
// different vocabulary or holds the other network kind.
PolicyNetwork restore_policy(const Checkpoint& ckpt, const std::string& vocab_hash);
RewardNetwork restore_reward(const Checkpoint& ckpt, const std::string& vocab_hash);

}  // namespace stepamc::model
