#include "stepamc/eval.hpp"

#include <cstdio>

#include <json.hpp>

#include "stepamc/errors.hpp"

namespace stepamc::eval {

std::string_view to_string(Prediction p) noexcept {
  switch (p) {
    case Prediction::correct: return "correct";
    case Prediction::incorrect: return "incorrect";
    case Prediction::invalid: return "invalid";
  }
  return "?";
}

Prediction extract_prediction(std::span<const int> response) {
  for (int tok : response) {
    if (tok == text::kEos) break;
    if (tok == text::kCorrect) return Prediction::correct;
    if (tok == text::kIncorrect) return Prediction::incorrect;
  }
  return Prediction::invalid;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& zero_flag) {
  if (den == 0) {
    zero_flag = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r, bool& zero_flag) {
  if (p + r == 0.0) {
    zero_flag = true;
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

}  // namespace

MetricsReport compute_metrics(std::span<const Prediction> predictions,
                              std::span<const text::Label> gold, bool macro_f1) {
  if (predictions.size() != gold.size()) {
    throw ContractError("compute_metrics: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(gold.size()) + " labels");
  }
  if (predictions.empty()) throw ContractError("compute_metrics on an empty set");

  MetricsReport r;
  ConfusionCounts& c = r.counts;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool positive = gold[i] == text::Label::correct;
    switch (predictions[i]) {
      case Prediction::correct: ++(positive ? c.tp : c.fp); break;
      case Prediction::incorrect: ++(positive ? c.fn : c.tn); break;
      case Prediction::invalid: ++(positive ? c.invalid_pos : c.invalid_neg); break;
    }
  }
  const std::size_t fn_eff = c.fn + c.invalid_pos;
  const std::size_t fp_eff = c.fp + c.invalid_neg;
  bool& z = r.zero_denominator;
  r.acc = ratio(c.tp + c.tn, c.total(), z);
  r.acc_pos = ratio(c.tp, c.tp + fn_eff, z);
  r.acc_neg = ratio(c.tn, c.tn + fp_eff, z);
  r.precision = ratio(c.tp, c.tp + fp_eff, z);
  r.recall = r.acc_pos;
  r.macro_f1 = macro_f1;
  const double f1_pos = f1_of(r.precision, r.recall, z);
  if (!macro_f1) {
    r.f1 = f1_pos;
  } else {
    // Negative class view: predicted-incorrect on positives (plus invalids there) are its false positives.
    const double p_neg = ratio(c.tn, c.tn + c.fn + c.invalid_pos, z);
    r.f1 = 0.5 * (f1_pos + f1_of(p_neg, r.acc_neg, z));
  }
  return r;
}

Evaluation evaluate(const model::PolicyNetwork& policy, std::span<const data::StepSample> samples,
                    const text::Vocabulary& vocab, std::size_t max_actions, bool macro_f1) {
  if (samples.empty()) throw ContractError("evaluate on an empty split");
  const rl::GenerationConfig gen{max_actions, 1.0, true};
  const std::size_t budget = policy.config().max_len - max_actions;
  num::Rng unused(0);
  Evaluation out;
  std::vector<Prediction> preds;
  std::vector<text::Label> gold;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto prompt = rl::initial_state(samples[i], vocab, budget);
    auto traj = rl::generate(policy, std::move(prompt), gen, unused);
    SampleResult res{i, samples[i].label, extract_prediction(traj.actions), std::move(traj.actions)};
    preds.push_back(res.prediction);
    gold.push_back(res.gold);
    out.samples.push_back(std::move(res));
  }
  out.report = compute_metrics(preds, gold, macro_f1);
  return out;
}

std::string format_table(const MetricsReport& r, std::string_view row_name) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-20s %8s %8s %8s %8s\n", "Method", "F1", "Acc", "Acc_pos", "Acc_neg");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-20.20s %8.2f %8.2f %8.2f %8.2f\n", std::string(row_name).c_str(),
                100.0 * r.f1, 100.0 * r.acc, 100.0 * r.acc_pos, 100.0 * r.acc_neg);
  out += buf;
  return out;
}

std::string report_json(const MetricsReport& r) {
  nlohmann::json j;
  j["f1"] = 100.0 * r.f1;
  j["acc"] = 100.0 * r.acc;
  j["acc_pos"] = 100.0 * r.acc_pos;
  j["acc_neg"] = 100.0 * r.acc_neg;
  j["precision"] = 100.0 * r.precision;
  j["recall"] = 100.0 * r.recall;
  j["f1_kind"] = r.macro_f1 ? "macro" : "binary";
  j["zero_denominator"] = r.zero_denominator;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn},
                 {"invalid_pos", r.counts.invalid_pos}, {"invalid_neg", r.counts.invalid_neg},
                 {"total", r.counts.total()}};
  return j.dump(2);
}

std::string sample_result_json(const SampleResult& r, const text::Vocabulary& vocab) {
  nlohmann::json j;
  j["index"] = r.index;
  j["gold"] = std::string(text::label_name(r.gold));
  j["prediction"] = std::string(to_string(r.prediction));
  j["response"] = vocab.decode(r.response);
  return j.dump();
}

}  // namespace stepamc::eval
