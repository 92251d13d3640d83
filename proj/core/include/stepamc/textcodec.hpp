#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stepamc::text {

// Reserved ids, fixed in this order in every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kEos = 1;
inline constexpr int kSep = 2;
inline constexpr int kCorrect = 3;
inline constexpr int kIncorrect = 4;
inline constexpr int kUnk = 5;
inline constexpr std::array<std::string_view, 6> kReservedTokens{
    "<pad>", "<eos>", "<sep>", "<correct>", "<incorrect>", "<unk>"};

inline constexpr std::string_view kJudgeCue = "JUDGE:";

enum class Label { correct, incorrect };

Label inverse(Label l) noexcept;
int label_token(Label l) noexcept;
std::string_view label_name(Label l) noexcept;
std::optional<Label> parse_label(std::string_view name) noexcept;

std::vector<std::string> split_whitespace(std::string_view text);
// Collapses every whitespace run to one space and trims both ends.
std::string normalize(std::string_view text);

// Word-level token <-> id bijection. Immutable once built.
class Vocabulary {
 public:
  // Reserved tokens first, then corpus tokens by descending count with ties
  // broken lexicographically, truncated to max_size entries.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t max_size);
  // Tokens listed in id order; the first six must be the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // kUnk when absent
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  // Fingerprint of the token list; checkpoints refuse to load against a different one.
  std::string hash() const;

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

// A question, the steps s_1..s_j seen so far, and optionally a label field.
struct StateText {
  std::string question;
  std::vector<std::string> steps;
  std::optional<Label> label;
  // Number printed for steps.front(); greater than 1 once older steps are dropped.
  std::size_t first_step = 1;
};

// "Q: <question> <sep> S1: <step1> <sep> ... Sj: <stepj> <sep> JUDGE:" followed
// by the label token when one is set.
std::string render_state_text(const StateText& state);
std::vector<int> render_state0(const StateText& state, const Vocabulary& vocab);

}  // namespace stepamc::text
