#include "stepamc/textcodec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>

#include "stepamc/errors.hpp"
#include "stepamc/hashing.hpp"

namespace stepamc::text {

Label inverse(Label l) noexcept {
  return l == Label::correct ? Label::incorrect : Label::correct;
}

int label_token(Label l) noexcept { return l == Label::correct ? kCorrect : kIncorrect; }

std::string_view label_name(Label l) noexcept {
  return l == Label::correct ? "correct" : "incorrect";
}

std::optional<Label> parse_label(std::string_view name) noexcept {
  if (name == "correct") return Label::correct;
  if (name == "incorrect") return Label::incorrect;
  return std::nullopt;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& tok : split_whitespace(text)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || split_whitespace(tokens_[i]).size() != 1) {
      throw DataError("vocabulary entry " + std::to_string(i) + " is not a single token");
    }
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedTokens.size()) {
    throw DataError("vocabulary lacks the reserved tokens");
  }
  for (std::size_t i = 0; i < kReservedTokens.size(); ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw DataError("vocabulary id " + std::to_string(i) + " must be " +
                      std::string(kReservedTokens[i]) + ", found " + tokens[i]);
    }
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t max_size) {
  if (max_size < kReservedTokens.size() + 1) {
    throw ContractError("vocabulary max_size must be at least " +
                        std::to_string(kReservedTokens.size() + 1));
  }
  if (corpus.empty()) throw ContractError("cannot build a vocabulary from an empty corpus");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : split_whitespace(line)) ++counts[std::move(tok)];
  }
  for (auto reserved : kReservedTokens) counts.erase(std::string(reserved));

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  std::vector<std::string> tokens(kReservedTokens.begin(), kReservedTokens.end());
  for (auto& [tok, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(std::move(tok));
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path);
  for (const auto& tok : tokens_) out << tok << '\n';
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(token) != ids_.end();
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& tok : split_whitespace(text)) ids.push_back(id(tok));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

std::string Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& tok : tokens_) {
    h.update(tok);
    h.update("\n");
  }
  return h.hex();
}

std::string render_state_text(const StateText& state) {
  if (state.steps.empty()) throw ContractError("state has no steps");
  std::string out = "Q: " + normalize(state.question) + " <sep>";
  for (std::size_t i = 0; i < state.steps.size(); ++i) {
    out += " S" + std::to_string(state.first_step + i) + ": " + normalize(state.steps[i]) +
           " <sep>";
  }
  out += " ";
  out += kJudgeCue;
  if (state.label) {
    out += " ";
    out += kReservedTokens[static_cast<std::size_t>(label_token(*state.label))];
  }
  return out;
}

std::vector<int> render_state0(const StateText& state, const Vocabulary& vocab) {
  if (state.steps.empty()) throw ContractError("state has no steps");
  std::vector<int> ids;
  // Reserved spellings inside free text are content, never structure.
  auto content = [&](std::string_view text) {
    for (const auto& tok : split_whitespace(text)) {
      const bool reserved = std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) !=
                            kReservedTokens.end();
      ids.push_back(reserved ? kUnk : vocab.id(tok));
    }
  };
  ids.push_back(vocab.id("Q:"));
  content(state.question);
  ids.push_back(kSep);
  for (std::size_t i = 0; i < state.steps.size(); ++i) {
    ids.push_back(vocab.id("S" + std::to_string(state.first_step + i) + ":"));
    content(state.steps[i]);
    ids.push_back(kSep);
  }
  ids.push_back(vocab.id(kJudgeCue));
  if (state.label) ids.push_back(label_token(*state.label));
  return ids;
}

}  // namespace stepamc::text
