#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "stepamc/config.hpp"
#include "stepamc/data.hpp"

namespace stepamc::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericFailure = 4 };

// Values given on the command line; each set field replaces the configuration's.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> train_data, val_data, test_data, vocab;
  std::optional<std::string> frn_checkpoint, sft_checkpoint, policy_checkpoint;
  std::optional<std::string> log, report;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::string> reward_mode;
  bool no_scpn = false;
  bool no_frn = false;
  bool strict_paper_sign = false;
  bool bradley_terry = false;
  bool macro_f1 = false;
};

cfg::RunConfig resolve_config(const Overrides& o);

int cmd_synth_data(const data::SynthConfig& config, std::uint64_t seed, const std::string& out);
int cmd_prepare_prm(const std::string& input, const std::string& out, std::size_t target,
                    double tolerance, std::uint64_t seed);
int cmd_prepare_preference(const std::string& input, const std::string& out);
int cmd_split(const std::string& input, const std::string& out_dir, std::uint64_t seed);
int cmd_label_pairs(const std::string& input, const std::string& out);
int cmd_build_vocab(const std::string& input, const std::string& out, std::size_t max_size);
int cmd_train_frn(const cfg::RunConfig& c);
int cmd_sft(const cfg::RunConfig& c);
int cmd_train_rl(const cfg::RunConfig& c);
int cmd_evaluate(const cfg::RunConfig& c, const std::string& split, const std::string& dump);
int cmd_gradcheck(std::uint64_t seed);
int cmd_config_dump(const cfg::RunConfig& c, const std::string& out);

}  // namespace stepamc::cli
