#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stepamc/data.hpp"
#include "stepamc/models.hpp"
#include "stepamc/rollout.hpp"
#include "stepamc/textcodec.hpp"

namespace stepamc::eval {

enum class Prediction { correct, incorrect, invalid };

std::string_view to_string(Prediction p) noexcept;

// The first <correct> or <incorrect> before <eos> (or the end of the response)
// decides; a response with neither is invalid.
Prediction extract_prediction(std::span<const int> response);

// Raw tallies. An invalid response lands only in the invalid counts, so
// tp + fp + tn + fn + invalid() equals the number of samples.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t invalid_pos = 0;  // invalid response on a "correct" sample
  std::size_t invalid_neg = 0;  // invalid response on an "incorrect" sample

  std::size_t invalid() const noexcept { return invalid_pos + invalid_neg; }
  std::size_t total() const noexcept { return tp + fp + tn + fn + invalid(); }
  bool operator==(const ConfusionCounts&) const = default;
};

// "correct" is the positive class. Invalid responses are scored as wrong for
// their gold class: they add to FN on positive samples and to FP on negative
// ones. Every ratio with a zero denominator is reported as 0 and recorded in
// zero_denominator.
struct MetricsReport {
  ConfusionCounts counts;
  double f1 = 0.0;
  double acc = 0.0;
  double acc_pos = 0.0;
  double acc_neg = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool macro_f1 = false;
  bool zero_denominator = false;
};

MetricsReport compute_metrics(std::span<const Prediction> predictions,
                              std::span<const text::Label> gold, bool macro_f1 = false);

struct SampleResult {
  std::size_t index = 0;
  text::Label gold = text::Label::correct;
  Prediction prediction = Prediction::invalid;
  std::vector<int> response;
};

struct Evaluation {
  MetricsReport report;
  std::vector<SampleResult> samples;
};

// Greedy decoding from each sample's initial state, then extraction and metrics.
Evaluation evaluate(const model::PolicyNetwork& policy, std::span<const data::StepSample> samples,
                    const text::Vocabulary& vocab, std::size_t max_actions, bool macro_f1 = false);

// Fixed-width table with columns F1, Acc, Acc_pos, Acc_neg in percent.
std::string format_table(const MetricsReport& report, std::string_view row_name);
std::string report_json(const MetricsReport& report);
std::string sample_result_json(const SampleResult& r, const text::Vocabulary& vocab);

}  // namespace stepamc::eval
