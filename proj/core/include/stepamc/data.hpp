#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stepamc/textcodec.hpp"

namespace stepamc::data {

using text::Label;

// One classification instance: judge the last of steps given the question
// and all earlier steps.
struct StepSample {
  std::string question;
  std::vector<std::string> steps;
  Label label = Label::correct;
  std::string provenance;

  bool operator==(const StepSample&) const = default;
};

// A sample with its gold label and the inverted label.
struct LabelPair {
  StepSample base;
  Label y_plus = Label::correct;
  Label y_minus = Label::incorrect;
};

enum class Rating { positive, neutral, negative };

struct RawPrmStep {
  std::string text;
  Rating rating = Rating::positive;
};

struct RawPrmSolution {
  std::vector<RawPrmStep> steps;
};

// A process-supervision record: one problem, several rated solutions.
struct RawPrmRecord {
  std::string problem;
  std::vector<std::string> flags;  // e.g. "bad_problem", "give_up"
  std::vector<RawPrmSolution> solutions;
};

// A step-preference record: shared prefix, one correct and one incorrect next step.
struct PreferenceRecord {
  std::string problem;
  std::vector<std::string> previous_steps;
  std::string chosen;
  std::string rejected;
};

struct DatasetSplit {
  std::vector<StepSample> train;
  std::vector<StepSample> val;
  std::vector<StepSample> test;
  std::uint64_t seed = 0;
  std::array<int, 3> ratio{8, 1, 1};
};

inline constexpr double kDefaultBalanceTolerance = 0.1;

// Drops records flagged bad_problem or give_up, explodes every solution into
// per-step samples (neutral counts as positive), shuffles with seed and
// subsamples target_size samples whose positive fraction lies within
// balance_tol of one half. target_size 0 keeps 2*min(pos, neg) samples.
// Throws BalanceError when the tolerance cannot be met.
std::vector<StepSample> convert_prm(std::span<const RawPrmRecord> records, std::size_t target_size,
                                    double balance_tol, std::uint64_t seed);

// Each record becomes (prefix + chosen -> correct, prefix + rejected -> incorrect).
std::vector<StepSample> convert_preferences(std::span<const PreferenceRecord> records);

std::vector<LabelPair> make_label_pairs(std::span<const StepSample> samples);

// Seeded shuffle, then contiguous cuts at floor(0.8n) and floor(0.9n). Needs n >= 10.
DatasetSplit split_dataset(std::span<const StepSample> samples, std::uint64_t seed);

double positive_fraction(std::span<const StepSample> samples);

// Chain-arithmetic problems: a start value and a list of add/sub/mul operations
// that keep the running value in [0, value_range). Each rendered step states
// "a op b = c" with a the previously stated value. A step is perturbed with
// probability error_rate; it is labelled correct iff c == a op b.
//
// With separable set only the judged (last) step may be perturbed and a wrong
// result is drawn from [value_range, 2*value_range), so correctness is visible
// from the result token alone.
struct SynthConfig {
  std::size_t n = 1000;
  std::size_t max_steps = 4;
  double error_rate = 0.3;
  int value_range = 16;
  bool separable = false;
};

std::vector<StepSample> synth_generate(const SynthConfig& config, std::uint64_t seed);

// Line-delimited JSON. StepSample lines carry {question, steps, label,
// provenance}; LabelPair lines carry {question, steps, y_plus, y_minus}.
std::string to_json_line(const StepSample& s);
StepSample step_sample_from_json_line(const std::string& line);
std::vector<StepSample> read_samples(const std::string& path);
void write_samples(const std::string& path, std::span<const StepSample> samples);
void write_label_pairs(const std::string& path, std::span<const LabelPair> pairs);
std::vector<LabelPair> read_label_pairs(const std::string& path);

// Input adapters. PRM lines: {problem, flags?, solutions: [{steps: [{text, rating}]}]}
// with rating "positive"/"neutral"/"negative" or 1/0/-1. Preference lines:
// {problem|prompt, previous_steps (list) | initial_reason_steps (newline text), chosen, rejected}.
std::vector<RawPrmRecord> read_prm_records(const std::string& path);
std::vector<PreferenceRecord> read_preference_records(const std::string& path);

// Seed, ratio, per-split counts and a content hash over all three parts.
std::string split_manifest_json(const DatasetSplit& split);
void write_split(const std::string& directory, const DatasetSplit& split);

}  // namespace stepamc::data
