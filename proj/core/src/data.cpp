#include "stepamc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stepamc/errors.hpp"
#include "stepamc/hashing.hpp"
#include "stepamc/numerics/rng.hpp"

namespace stepamc::data {

using nlohmann::json;

namespace {

bool is_flagged(const RawPrmRecord& r) {
  return std::any_of(r.flags.begin(), r.flags.end(), [](const std::string& f) {
    return f == "bad_problem" || f == "give_up";
  });
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

json parse_line(const std::string& line, const std::string& path, std::size_t index) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ":" + std::to_string(index + 1) + ": " + e.what());
  }
}

Label require_label(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw DataError(std::string("record lacks string field '") + key + "'");
  }
  auto l = text::parse_label(j[key].get<std::string>());
  if (!l) throw DataError("label must be 'correct' or 'incorrect', got " + j[key].dump());
  return *l;
}

std::vector<std::string> require_steps(const json& j) {
  if (!j.contains("steps") || !j["steps"].is_array() || j["steps"].empty()) {
    throw DataError("record needs a nonempty 'steps' array");
  }
  return j["steps"].get<std::vector<std::string>>();
}

Rating parse_rating(const json& r) {
  if (r.is_number_integer()) {
    const int v = r.get<int>();
    if (v == 1) return Rating::positive;
    if (v == 0) return Rating::neutral;
    if (v == -1) return Rating::negative;
  } else if (r.is_string()) {
    const auto s = r.get<std::string>();
    if (s == "positive") return Rating::positive;
    if (s == "neutral") return Rating::neutral;
    if (s == "negative") return Rating::negative;
  }
  throw DataError("step rating must be positive/neutral/negative or 1/0/-1, got " + r.dump());
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

std::vector<StepSample> convert_prm(std::span<const RawPrmRecord> records, std::size_t target_size,
                                    double balance_tol, std::uint64_t seed) {
  std::vector<StepSample> all;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const RawPrmRecord& rec = records[r];
    if (is_flagged(rec)) continue;
    for (std::size_t s = 0; s < rec.solutions.size(); ++s) {
      const auto& steps = rec.solutions[s].steps;
      std::vector<std::string> prefix;
      for (std::size_t j = 0; j < steps.size(); ++j) {
        prefix.push_back(steps[j].text);
        StepSample sample;
        sample.question = rec.problem;
        sample.steps = prefix;
        sample.label = steps[j].rating == Rating::negative ? Label::incorrect : Label::correct;
        sample.provenance = "prm:" + std::to_string(r) + ":" + std::to_string(s) + ":" + std::to_string(j);
        all.push_back(std::move(sample));
      }
    }
  }

  num::Rng rng(seed);
  rng.shuffle(std::span<StepSample>(all));

  const auto pos = static_cast<std::size_t>(
      std::count_if(all.begin(), all.end(), [](const StepSample& s) { return s.label == Label::correct; }));
  const std::size_t neg = all.size() - pos;
  const std::size_t target = target_size == 0 ? 2 * std::min(pos, neg) : target_size;
  const double available_ratio = all.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(all.size());
  if (target == 0) throw BalanceError("PRM conversion left no samples of one class", available_ratio);
  if (all.size() < target) {
    throw BalanceError("PRM conversion produced " + std::to_string(all.size()) +
                           " samples, fewer than the target " + std::to_string(target),
                       available_ratio);
  }

  std::size_t take_pos = std::min(pos, target / 2);
  const std::size_t take_neg = std::min(neg, target - take_pos);
  take_pos = std::min(pos, target - take_neg);
  const double ratio = static_cast<double>(take_pos) / static_cast<double>(target);
  if (std::abs(ratio - 0.5) > balance_tol) {
    throw BalanceError("cannot balance PRM samples: best positive fraction " + std::to_string(ratio) +
                           " is outside 0.5 +/- " + std::to_string(balance_tol),
                       ratio);
  }

  std::vector<StepSample> out;
  out.reserve(target);
  std::size_t got_pos = 0, got_neg = 0;
  for (auto& s : all) {
    if (s.label == Label::correct && got_pos < take_pos) {
      ++got_pos;
      out.push_back(std::move(s));
    } else if (s.label == Label::incorrect && got_neg < take_neg) {
      ++got_neg;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<StepSample> convert_preferences(std::span<const PreferenceRecord> records) {
  std::vector<StepSample> out;
  out.reserve(2 * records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.chosen == r.rejected) {
      throw DataError("preference record " + std::to_string(i) + " has identical chosen and rejected steps");
    }
    StepSample good{r.problem, r.previous_steps, Label::correct, "pref:" + std::to_string(i) + ":chosen"};
    good.steps.push_back(r.chosen);
    StepSample bad{r.problem, r.previous_steps, Label::incorrect, "pref:" + std::to_string(i) + ":rejected"};
    bad.steps.push_back(r.rejected);
    out.push_back(std::move(good));
    out.push_back(std::move(bad));
  }
  return out;
}

std::vector<LabelPair> make_label_pairs(std::span<const StepSample> samples) {
  std::vector<LabelPair> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) pairs.push_back({s, s.label, text::inverse(s.label)});
  return pairs;
}

DatasetSplit split_dataset(std::span<const StepSample> samples, std::uint64_t seed) {
  if (samples.size() < 10) {
    throw ContractError("split needs at least 10 samples, got " + std::to_string(samples.size()));
  }
  std::vector<StepSample> shuffled(samples.begin(), samples.end());
  num::Rng rng(seed);
  rng.shuffle(std::span<StepSample>(shuffled));
  const std::size_t n = shuffled.size();
  const std::size_t cut1 = (8 * n) / 10, cut2 = (9 * n) / 10;
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(cut1));
  split.val.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(cut1),
                   shuffled.begin() + static_cast<std::ptrdiff_t>(cut2));
  split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(cut2), shuffled.end());
  return split;
}

double positive_fraction(std::span<const StepSample> samples) {
  if (samples.empty()) return 0.0;
  const auto pos = std::count_if(samples.begin(), samples.end(),
                                 [](const StepSample& s) { return s.label == Label::correct; });
  return static_cast<double>(pos) / static_cast<double>(samples.size());
}

// ------------------------------------------------------------------- I/O

std::string to_json_line(const StepSample& s) {
  json j;
  j["question"] = s.question;
  j["steps"] = s.steps;
  j["label"] = std::string(text::label_name(s.label));
  if (!s.provenance.empty()) j["provenance"] = s.provenance;
  return j.dump();
}

StepSample step_sample_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  StepSample s;
  if (!j.contains("question") || !j["question"].is_string()) throw DataError("sample lacks 'question'");
  s.question = j["question"].get<std::string>();
  s.steps = require_steps(j);
  s.label = require_label(j, "label");
  if (j.contains("provenance")) s.provenance = j["provenance"].get<std::string>();
  return s;
}

std::vector<StepSample> read_samples(const std::string& path) {
  std::vector<StepSample> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(step_sample_from_json_line(lines[i]));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_samples(const std::string& path, std::span<const StepSample> samples) {
  std::vector<std::string> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) lines.push_back(to_json_line(s));
  write_lines(path, lines);
}

void write_label_pairs(const std::string& path, std::span<const LabelPair> pairs) {
  std::vector<std::string> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) {
    json j;
    j["question"] = p.base.question;
    j["steps"] = p.base.steps;
    j["y_plus"] = std::string(text::label_name(p.y_plus));
    j["y_minus"] = std::string(text::label_name(p.y_minus));
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

std::vector<LabelPair> read_label_pairs(const std::string& path) {
  std::vector<LabelPair> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json j = parse_line(lines[i], path, i);
    try {
      LabelPair p;
      p.base.question = j.at("question").get<std::string>();
      p.base.steps = require_steps(j);
      p.y_plus = require_label(j, "y_plus");
      p.y_minus = require_label(j, "y_minus");
      if (p.y_plus == p.y_minus) throw DataError("y_plus equals y_minus");
      p.base.label = p.y_plus;
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RawPrmRecord> read_prm_records(const std::string& path) {
  std::vector<RawPrmRecord> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json j = parse_line(lines[i], path, i);
    try {
      RawPrmRecord r;
      r.problem = j.at("problem").get<std::string>();
      if (j.contains("flags")) r.flags = j["flags"].get<std::vector<std::string>>();
      for (const auto& sol : j.at("solutions")) {
        RawPrmSolution s;
        for (const auto& st : sol.at("steps")) {
          s.steps.push_back({st.at("text").get<std::string>(), parse_rating(st.at("rating"))});
        }
        r.solutions.push_back(std::move(s));
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PreferenceRecord> read_preference_records(const std::string& path) {
  std::vector<PreferenceRecord> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json j = parse_line(lines[i], path, i);
    try {
      PreferenceRecord r;
      r.problem = j.contains("problem") ? j["problem"].get<std::string>() : j.at("prompt").get<std::string>();
      if (j.contains("previous_steps")) {
        r.previous_steps = j["previous_steps"].get<std::vector<std::string>>();
      } else if (j.contains("initial_reason_steps")) {
        const auto block = j["initial_reason_steps"].get<std::string>();
        std::size_t start = 0;
        while (start < block.size()) {
          const std::size_t nl = std::min(block.find('\n', start), block.size());
          auto step = text::normalize(std::string_view(block).substr(start, nl - start));
          if (!step.empty()) r.previous_steps.push_back(std::move(step));
          start = nl + 1;
        }
      }
      r.chosen = j.at("chosen").get<std::string>();
      r.rejected = j.at("rejected").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::string split_manifest_json(const DatasetSplit& split) {
  Fnv1a h;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const auto& s : *part) {
      h.update(to_json_line(s));
      h.update("\n");
    }
    h.update("--\n");
  }
  json j;
  j["seed"] = split.seed;
  j["ratio"] = split.ratio;
  j["counts"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
  j["content_hash"] = h.hex();
  return j.dump(2);
}

void write_split(const std::string& directory, const DatasetSplit& split) {
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);
  write_samples((dir / "train.jsonl").string(), split.train);
  write_samples((dir / "val.jsonl").string(), split.val);
  write_samples((dir / "test.jsonl").string(), split.test);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw DataError("cannot write split manifest in " + directory);
  out << split_manifest_json(split) << '\n';
}

}  // namespace stepamc::data
