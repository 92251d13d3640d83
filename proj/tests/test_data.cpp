#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stepamc/data.hpp"
#include "stepamc/errors.hpp"
#include "stepamc/numerics/rng.hpp"

using namespace stepamc;
using namespace stepamc::data;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "stepamc_test_data";
  std::filesystem::create_directories(dir);
  return dir / name;
}

RawPrmRecord record(std::string problem, std::vector<std::vector<Rating>> solutions) {
  RawPrmRecord r;
  r.problem = std::move(problem);
  for (const auto& ratings : solutions) {
    RawPrmSolution s;
    for (std::size_t k = 0; k < ratings.size(); ++k) s.steps.push_back({"step " + std::to_string(k), ratings[k]});
    r.solutions.push_back(std::move(s));
  }
  return r;
}

// Re-evaluates "a op b = c".
bool step_holds(const std::string& step, int* lhs = nullptr, int* result = nullptr) {
  std::istringstream in(step);
  int a = 0, b = 0, c = 0;
  char op = 0, eq = 0;
  in >> a >> op >> b >> eq >> c;
  REQUIRE(eq == '=');
  if (lhs) *lhs = a;
  if (result) *result = c;
  switch (op) {
    case '+': return a + b == c;
    case '-': return a - b == c;
    case '*': return a * b == c;
  }
  FAIL("unknown operator");
  return false;
}

}  // namespace

TEST_CASE("prm conversion labels every step prefix, neutral as correct") {
  std::vector<RawPrmRecord> recs{record("p", {{Rating::positive, Rating::neutral, Rating::negative}})};
  auto out = convert_prm(recs, 3, 0.5, 1);
  REQUIRE(out.size() == 3);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.steps.size() < b.steps.size(); });
  CHECK(out[0].label == Label::correct);
  CHECK(out[1].label == Label::correct);
  CHECK(out[2].label == Label::incorrect);
  CHECK(out[2].steps == std::vector<std::string>{"step 0", "step 1", "step 2"});
  CHECK(out[0].question == "p");
}

TEST_CASE("prm conversion drops flagged records") {
  auto bad = record("bad", {{Rating::negative, Rating::negative}});
  bad.flags = {"give_up"};
  auto worse = record("worse", {{Rating::positive}});
  worse.flags = {"bad_problem"};
  std::vector<RawPrmRecord> recs{record("ok", {{Rating::positive, Rating::negative}}), bad, worse};
  auto out = convert_prm(recs, 0, 0.1, 2);
  CHECK(out.size() == 2);
  for (const auto& s : out) CHECK(s.question == "ok");
}

TEST_CASE("prm conversion raises BalanceError when one class is too rare") {
  std::vector<RawPrmRecord> recs{record("p", {{Rating::positive, Rating::positive, Rating::positive, Rating::negative}})};
  try {
    convert_prm(recs, 4, 0.1, 3);
    FAIL("expected BalanceError");
  } catch (const BalanceError& e) {
    CHECK(e.achievable_ratio() == doctest::Approx(0.75));
  }
  std::vector<RawPrmRecord> all_pos{record("p", {{Rating::positive, Rating::positive}})};
  CHECK_THROWS_AS(convert_prm(all_pos, 0, 0.1, 3), BalanceError);
}

TEST_CASE("a skewed 1000-record corpus is balanced within tolerance") {
  num::Rng rng(17);
  std::vector<RawPrmRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    std::vector<Rating> ratings;
    const int len = rng.between(1, 6);
    for (int k = 0; k < len; ++k) {
      const double u = rng.uniform();
      ratings.push_back(u < 0.6 ? Rating::positive : u < 0.75 ? Rating::neutral : Rating::negative);
    }
    recs.push_back(record("q" + std::to_string(i), {ratings}));
  }
  auto out = convert_prm(recs, 1000, 0.05, 4);
  CHECK(out.size() == 1000);
  const double f = positive_fraction(out);
  CHECK(f >= 0.45);
  CHECK(f <= 0.55);
  CHECK(convert_prm(recs, 1000, 0.05, 4) == out);
}

TEST_CASE("preference records give exactly one sample per class") {
  std::vector<PreferenceRecord> recs{{"p", {"a"}, "good", "bad"}, {"q", {}, "x", "y"}};
  auto out = convert_preferences(recs);
  REQUIRE(out.size() == 4);
  CHECK(positive_fraction(out) == 0.5);
  CHECK(out[0].steps == std::vector<std::string>{"a", "good"});
  CHECK(out[0].label == Label::correct);
  CHECK(out[1].steps == std::vector<std::string>{"a", "bad"});
  CHECK(out[1].label == Label::incorrect);
  std::vector<PreferenceRecord> same{{"p", {}, "x", "x"}};
  CHECK_THROWS_AS(convert_preferences(same), DataError);
}

TEST_CASE("label pairs invert the gold label") {
  auto samples = synth_generate({50, 4, 0.4, 16, false}, 5);
  for (const auto& p : make_label_pairs(samples)) {
    CHECK(p.y_plus == p.base.label);
    CHECK(p.y_minus != p.y_plus);
  }
}

TEST_CASE("split sizes, disjointness and determinism") {
  auto samples = synth_generate({100, 4, 0.3, 16, false}, 6);
  auto split = split_dataset(samples, 42);
  CHECK(split.train.size() == 80);
  CHECK(split.val.size() == 10);
  CHECK(split.test.size() == 10);
  std::multiset<std::string> seen;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const auto& s : *part) seen.insert(s.provenance);
  }
  std::multiset<std::string> expected;
  for (const auto& s : samples) expected.insert(s.provenance);
  CHECK(seen == expected);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 100);

  auto again = split_dataset(samples, 42);
  CHECK(again.train == split.train);
  CHECK(again.val == split.val);
  CHECK(again.test == split.test);
  CHECK(split_manifest_json(again) == split_manifest_json(split));
  CHECK(split_dataset(samples, 43).train != split.train);

  auto odd = split_dataset(std::span(samples).first(37), 1);
  CHECK(odd.train.size() == 29);
  CHECK(odd.val.size() == 4);
  CHECK(odd.test.size() == 4);
  CHECK_THROWS_AS(split_dataset(std::span(samples).first(9), 1), ContractError);
}

TEST_CASE("synthetic data: labels agree with re-evaluated arithmetic") {
  for (bool separable : {false, true}) {
    auto samples = synth_generate({2000, 5, 0.4, 16, separable}, 8);
    for (const auto& s : samples) {
      REQUIRE(!s.steps.empty());
      int prev = -1;
      for (std::size_t k = 0; k < s.steps.size(); ++k) {
        int lhs = 0, result = 0;
        const bool ok = step_holds(s.steps[k], &lhs, &result);
        if (k > 0) CHECK(lhs == prev);
        if (k + 1 < s.steps.size()) CHECK((ok || !separable));
        if (k + 1 == s.steps.size()) {
          CHECK(ok == (s.label == Label::correct));
          if (separable) CHECK((ok ? result < 16 : result >= 16));
        }
        prev = result;
      }
      CHECK(s.question.rfind("start ", 0) == 0);
    }
  }
}

TEST_CASE("synthetic data: error rate controls the label mix") {
  auto clean = synth_generate({500, 4, 0.0, 16, false}, 9);
  CHECK(positive_fraction(clean) == 1.0);
  auto noisy = synth_generate({10000, 4, 0.3, 16, false}, 10);
  CHECK(std::abs((1.0 - positive_fraction(noisy)) - 0.3) <= 0.02);
  CHECK(synth_generate({300, 4, 0.3, 16, false}, 10) == std::vector(noisy.begin(), noisy.begin() + 300));
  CHECK_THROWS_AS(synth_generate({10, 4, 1.5, 16, false}, 1), ContractError);
}

TEST_CASE("jsonl round trips") {
  auto samples = synth_generate({30, 4, 0.3, 16, false}, 11);
  samples[0].question = "unicode \xc3\xa9 and \"quotes\"";
  const auto path = scratch("samples.jsonl").string();
  write_samples(path, samples);
  CHECK(read_samples(path) == samples);
  CHECK(step_sample_from_json_line(to_json_line(samples[3])) == samples[3]);

  auto pairs = make_label_pairs(samples);
  const auto ppath = scratch("pairs.jsonl").string();
  write_label_pairs(ppath, pairs);
  auto back = read_label_pairs(ppath);
  REQUIRE(back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(back[i].base.question == pairs[i].base.question);
    CHECK(back[i].base.steps == pairs[i].base.steps);
    CHECK(back[i].y_plus == pairs[i].y_plus);
    CHECK(back[i].y_minus == pairs[i].y_minus);
  }
}

TEST_CASE("malformed input raises DataError with the line number") {
  const auto path = scratch("bad.jsonl").string();
  {
    std::ofstream out(path);
    out << R"({"question":"q","steps":["a"],"label":"correct"})" << "\n";
    out << R"({"question":"q","steps":[],"label":"correct"})" << "\n";
  }
  try {
    read_samples(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << R"({"question":"q","steps":["a"],"label":"maybe"})" << "\n";
  }
  CHECK_THROWS_AS(read_samples(path), DataError);
  CHECK_THROWS_AS(read_samples(scratch("missing.jsonl").string()), DataError);
}

TEST_CASE("input adapters") {
  const auto prm = scratch("prm.jsonl").string();
  {
    std::ofstream out(prm);
    out << R"({"problem":"p","flags":["give_up"],"solutions":[{"steps":[{"text":"a","rating":1}]}]})" << "\n";
    out << R"({"problem":"q","solutions":[{"steps":[{"text":"a","rating":"neutral"},{"text":"b","rating":-1}]}]})"
        << "\n";
  }
  auto recs = read_prm_records(prm);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].flags == std::vector<std::string>{"give_up"});
  CHECK(recs[1].solutions[0].steps[0].rating == Rating::neutral);
  CHECK(recs[1].solutions[0].steps[1].rating == Rating::negative);

  const auto pref = scratch("pref.jsonl").string();
  {
    std::ofstream out(pref);
    out << R"({"prompt":"p","initial_reason_steps":"one\n\ntwo\n","chosen":"c","rejected":"r"})" << "\n";
  }
  auto prefs = read_preference_records(pref);
  REQUIRE(prefs.size() == 1);
  CHECK(prefs[0].problem == "p");
  CHECK(prefs[0].previous_steps == std::vector<std::string>{"one", "two"});
}
