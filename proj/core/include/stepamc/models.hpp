#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stepamc/numerics/rng.hpp"
#include "stepamc/numerics/tape.hpp"
#include "stepamc/numerics/tensor.hpp"

namespace stepamc::model {

using num::Tape;
using num::Tensor;
using num::Var;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 48;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 256;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Exact counts for the unadapted networks:
//   backbone = V*d + L*d + n_layers*(4d + 3d^2 + 3d + d^2 + d + 2*d*ff + ff + d) + 2d
//   policy   = backbone + (d*V + V) + (d + 1)
//   reward   = backbone + (d + 1)
std::size_t backbone_parameter_count(const ModelConfig& c);
std::size_t policy_parameter_count(const ModelConfig& c);
std::size_t reward_parameter_count(const ModelConfig& c);

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct LoraSpec {
  std::string selector;
  std::size_t rank = 0;
  double scale = 1.0;
  bool operator==(const LoraSpec&) const = default;
};

// Trainable low-rank update of a frozen linear map: W_eff = W + scale * B * A,
// with B (out x r) starting at zero and A (r x in) small random.
struct LowRankAdapter {
  Tensor a;
  Tensor b;
  std::size_t rank = 0;
  double scale = 1.0;
};

// y = x W + b, W stored in x out. With an adapter attached the base weight and
// bias are frozen.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, num::Rng& rng, double init_std);

  Var forward(Tape& tape, Var x);
  Var forward(Tape& tape, Var x) const;

  void attach_adapter(std::size_t rank, double scale, num::Rng& rng);
  bool adapted() const noexcept { return adapter_.has_value(); }

  const std::string& name() const noexcept { return name_; }
  std::size_t in_features() const noexcept { return weight_.rows(); }
  std::size_t out_features() const noexcept { return weight_.cols(); }
  Tensor& weight() noexcept { return weight_; }
  const Tensor& weight() const noexcept { return weight_; }
  Tensor& bias() noexcept { return bias_; }
  const std::optional<LowRankAdapter>& adapter() const noexcept { return adapter_; }

  void collect(std::vector<NamedTensor>& out);

 private:
  template <class Self>
  static Var run(Self& self, Tape& tape, Var x);

  std::string name_;
  Tensor weight_;
  Tensor bias_;
  std::optional<LowRankAdapter> adapter_;
};

struct LayerNorm {
  std::string name;
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(std::string name, std::size_t width);
  Var forward(Tape& tape, Var x);
  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<NamedTensor>& out);
};

struct Block {
  LayerNorm ln_attn;
  Linear qkv;
  Linear proj;
  LayerNorm ln_ffn;
  Linear up;
  Linear down;
};

// Token + learned positional embeddings, pre-norm causal self-attention blocks
// with GELU feed-forward, and a final layer norm.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const ModelConfig& config, num::Rng& rng);

  // T x d hidden states; T must be in [1, max_len].
  Var hidden(Tape& tape, std::span<const int> tokens);
  Var hidden(Tape& tape, std::span<const int> tokens) const;

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<Block>& blocks() noexcept { return blocks_; }
  void collect(std::vector<NamedTensor>& out);

 private:
  template <class Self>
  static Var run(Self& self, Tape& tape, std::span<const int> tokens);

  ModelConfig config_;
  Tensor token_embedding_;
  Tensor position_embedding_;
  std::vector<Block> blocks_;
  LayerNorm ln_final_;
};

// Autoregressive policy with an LM head and a scalar value head on every position.
class PolicyNetwork {
 public:
  struct Output {
    Var logits;  // rows x vocab
    Var values;  // rows x 1
  };

  PolicyNetwork() = default;
  PolicyNetwork(const ModelConfig& config, std::uint64_t seed);

  // Heads evaluated for positions [first_row, T). Gradients flow to parameters
  // only through the non-const overload.
  Output forward(Tape& tape, std::span<const int> tokens, std::size_t first_row = 0);
  Output forward(Tape& tape, std::span<const int> tokens, std::size_t first_row = 0) const;

  // Applies an adapter to every linear map matched by selector: a comma-separated
  // list of full names ("blocks.0.attn.qkv"), suffixes ("attn.qkv"), or "all".
  void attach_lora(std::string_view selector, std::size_t rank, double scale, std::uint64_t seed);
  const std::vector<LoraSpec>& lora_specs() const noexcept { return lora_; }

  std::vector<NamedTensor> parameters();
  std::vector<Tensor*> trainable();
  std::size_t trainable_count();
  void zero_grad();

  const ModelConfig& config() const noexcept { return backbone_.config(); }
  Linear& lm_head() noexcept { return lm_head_; }
  Linear& value_head() noexcept { return value_head_; }
  Backbone& backbone() noexcept { return backbone_; }

 private:
  template <class Self>
  static Output run(Self& self, Tape& tape, std::span<const int> tokens, std::size_t first_row);
  std::vector<Linear*> linears();

  Backbone backbone_;
  Linear lm_head_;
  Linear value_head_;
  std::vector<LoraSpec> lora_;
};

// Scalar reward read from the final sequence position.
class RewardNetwork {
 public:
  RewardNetwork() = default;
  RewardNetwork(const ModelConfig& config, std::uint64_t seed);
  RewardNetwork(const RewardNetwork& other);
  RewardNetwork& operator=(const RewardNetwork& other);

  Var forward(Tape& tape, std::span<const int> tokens);
  Var forward(Tape& tape, std::span<const int> tokens) const;
  // Inference convenience.
  double reward(std::span<const int> tokens) const;

  void attach_lora(std::string_view selector, std::size_t rank, double scale, std::uint64_t seed);
  const std::vector<LoraSpec>& lora_specs() const noexcept { return lora_; }

  std::vector<NamedTensor> parameters();
  std::vector<Tensor*> trainable();
  void zero_grad();

  const ModelConfig& config() const noexcept { return backbone_.config(); }
  Linear& score_head() noexcept { return score_head_; }

  // Number of forward passes so far, for auditing reward-free runs.
  std::size_t forward_calls() const noexcept { return calls_.load(); }

 private:
  template <class Self>
  static Var run(Self& self, Tape& tape, std::span<const int> tokens);
  std::vector<Linear*> linears();

  Backbone backbone_;
  Linear score_head_;
  std::vector<LoraSpec> lora_;
  mutable std::atomic<std::size_t> calls_{0};
};

// Categorical draw from softmax(logits / temperature); greedy returns the
// first argmax and is the temperature -> 0 limit.
int sample_next(std::span<const double> logits, double temperature, num::Rng& rng,
                bool greedy = false);

}  // namespace stepamc::model
