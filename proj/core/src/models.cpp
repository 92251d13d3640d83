#include "stepamc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stepamc/errors.hpp"
#include "stepamc/numerics/ops.hpp"
#include "stepamc/textcodec.hpp"

namespace stepamc::model {

namespace ops = stepamc::num;

void ModelConfig::validate() const {
  if (vocab_size < text::kReservedTokens.size()) {
    throw ConfigError("model vocab_size must cover the reserved tokens");
  }
  if (max_len < 2) throw ConfigError("model max_len must be at least 2");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0 || d_ff == 0) throw ConfigError("model n_layers and d_ff must be positive");
}

std::size_t backbone_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, ff = c.d_ff;
  const std::size_t per_block = 4 * d                 // two layer norms
                                + 3 * d * d + 3 * d   // qkv
                                + d * d + d           // output projection
                                + d * ff + ff         // up
                                + ff * d + d;         // down
  return c.vocab_size * d + c.max_len * d + c.n_layers * per_block + 2 * d;
}

std::size_t policy_parameter_count(const ModelConfig& c) {
  return backbone_parameter_count(c) + c.d_model * c.vocab_size + c.vocab_size + c.d_model + 1;
}

std::size_t reward_parameter_count(const ModelConfig& c) {
  return backbone_parameter_count(c) + c.d_model + 1;
}

namespace {

Tensor normal_tensor(num::Shape shape, double stddev, num::Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

constexpr double kInitStd = 0.02;

// Every linear map whose name matches one of the comma-separated selectors.
std::vector<Linear*> select_linears(const std::vector<Linear*>& all, std::string_view selector) {
  std::vector<Linear*> chosen;
  std::size_t start = 0;
  while (start <= selector.size()) {
    const std::size_t comma = std::min(selector.find(',', start), selector.size());
    const std::string_view item = selector.substr(start, comma - start);
    start = comma + 1;
    if (item.empty()) continue;
    bool matched = false;
    for (Linear* l : all) {
      const std::string& name = l->name();
      const bool hit =
          (item == "all" && name.starts_with("blocks.")) || name == item ||
          (name.size() > item.size() && name.ends_with(item) &&
           name[name.size() - item.size() - 1] == '.');
      if (hit) {
        matched = true;
        if (std::find(chosen.begin(), chosen.end(), l) == chosen.end()) chosen.push_back(l);
      }
    }
    if (!matched) throw ConfigError("LoRA selector '" + std::string(item) + "' matches no linear layer");
  }
  if (chosen.empty()) throw ConfigError("empty LoRA selector");
  return chosen;
}

void block_linears(Backbone& b, std::vector<Linear*>& out) {
  for (Block& blk : b.blocks()) {
    out.push_back(&blk.qkv);
    out.push_back(&blk.proj);
    out.push_back(&blk.up);
    out.push_back(&blk.down);
  }
}

}  // namespace

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out, num::Rng& rng,
               double init_std)
    : name_(std::move(name)),
      weight_(normal_tensor({in, out}, init_std, rng)),
      bias_(Tensor::zeros({1, out}, true)) {}

template <class Self>
Var Linear::run(Self& self, Tape& tape, Var x) {
  Var y = ops::add_row(ops::matmul(x, tape.param(self.weight_)), tape.param(self.bias_));
  if (self.adapter_) {
    auto& ad = *self.adapter_;
    Var low = ops::matmul(x, ops::transpose(tape.param(ad.a)));
    Var delta = ops::matmul(low, ops::transpose(tape.param(ad.b)));
    y = ops::add(y, ops::scale(delta, ad.scale));
  }
  return y;
}

Var Linear::forward(Tape& tape, Var x) { return run(*this, tape, x); }
Var Linear::forward(Tape& tape, Var x) const { return run(*this, tape, x); }

void Linear::attach_adapter(std::size_t rank, double scale, num::Rng& rng) {
  if (rank == 0) throw ConfigError("LoRA rank must be at least 1");
  if (adapter_) throw ConfigError("layer " + name_ + " already has an adapter");
  LowRankAdapter ad;
  ad.rank = rank;
  ad.scale = scale;
  ad.a = normal_tensor({rank, in_features()}, 1.0 / std::sqrt(static_cast<double>(in_features())), rng);
  ad.b = Tensor::zeros({out_features(), rank}, true);
  weight_.set_requires_grad(false);
  bias_.set_requires_grad(false);
  weight_.clear_grad();
  bias_.clear_grad();
  adapter_ = std::move(ad);
}

void Linear::collect(std::vector<NamedTensor>& out) {
  out.push_back({name_ + ".weight", &weight_});
  out.push_back({name_ + ".bias", &bias_});
  if (adapter_) {
    out.push_back({name_ + ".lora_a", &adapter_->a});
    out.push_back({name_ + ".lora_b", &adapter_->b});
  }
}

// ------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(std::string n, std::size_t width)
    : name(std::move(n)),
      gain(Tensor::filled({1, width}, 1.0, true)),
      bias(Tensor::zeros({1, width}, true)) {}

Var LayerNorm::forward(Tape& tape, Var x) {
  return ops::layer_norm(x, tape.param(gain), tape.param(bias));
}

Var LayerNorm::forward(Tape& tape, Var x) const {
  return ops::layer_norm(x, tape.param(gain), tape.param(bias));
}

void LayerNorm::collect(std::vector<NamedTensor>& out) {
  out.push_back({name + ".gain", &gain});
  out.push_back({name + ".bias", &bias});
}

// -------------------------------------------------------------- Backbone

Backbone::Backbone(const ModelConfig& config, num::Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config.d_model;
  token_embedding_ = normal_tensor({config.vocab_size, d}, kInitStd, rng);
  position_embedding_ = normal_tensor({config.max_len, d}, kInitStd, rng);
  const double resid_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.n_layers));
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    Block b;
    b.ln_attn = LayerNorm(p + "ln_attn", d);
    b.qkv = Linear(p + "attn.qkv", d, 3 * d, rng, kInitStd);
    b.proj = Linear(p + "attn.proj", d, d, rng, resid_std);
    b.ln_ffn = LayerNorm(p + "ln_ffn", d);
    b.up = Linear(p + "ffn.up", d, config.d_ff, rng, kInitStd);
    b.down = Linear(p + "ffn.down", config.d_ff, d, rng, resid_std);
    blocks_.push_back(std::move(b));
  }
  ln_final_ = LayerNorm("ln_final", d);
}

template <class Self>
Var Backbone::run(Self& self, Tape& tape, std::span<const int> tokens) {
  const ModelConfig& c = self.config_;
  if (tokens.empty()) throw ContractError("forward on an empty sequence");
  if (tokens.size() > c.max_len) {
    throw LengthError("sequence of " + std::to_string(tokens.size()) +
                      " tokens exceeds max_len " + std::to_string(c.max_len));
  }
  std::vector<int> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), 0);
  Var x = ops::add(ops::embedding(tape.param(self.token_embedding_), tokens),
                   ops::embedding(tape.param(self.position_embedding_), positions));

  const std::size_t d = c.d_model, dh = d / c.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (auto& b : self.blocks_) {
    Var qkv = b.qkv.forward(tape, b.ln_attn.forward(tape, x));
    std::vector<Var> heads;
    heads.reserve(c.n_heads);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      Var q = ops::slice_cols(qkv, h * dh, (h + 1) * dh);
      Var k = ops::slice_cols(qkv, d + h * dh, d + (h + 1) * dh);
      Var v = ops::slice_cols(qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
      Var scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt);
      heads.push_back(ops::matmul(ops::softmax_rows(scores, /*causal=*/true), v));
    }
    Var attn = heads.size() == 1 ? heads[0] : ops::concat_cols(heads);
    x = ops::add(x, b.proj.forward(tape, attn));
    Var ff = b.down.forward(tape, ops::gelu(b.up.forward(tape, b.ln_ffn.forward(tape, x))));
    x = ops::add(x, ff);
  }
  return self.ln_final_.forward(tape, x);
}

Var Backbone::hidden(Tape& tape, std::span<const int> tokens) { return run(*this, tape, tokens); }
Var Backbone::hidden(Tape& tape, std::span<const int> tokens) const {
  return run(*this, tape, tokens);
}

void Backbone::collect(std::vector<NamedTensor>& out) {
  out.push_back({"token_embedding", &token_embedding_});
  out.push_back({"position_embedding", &position_embedding_});
  for (Block& b : blocks_) {
    b.ln_attn.collect(out);
    b.qkv.collect(out);
    b.proj.collect(out);
    b.ln_ffn.collect(out);
    b.up.collect(out);
    b.down.collect(out);
  }
  ln_final_.collect(out);
}

// --------------------------------------------------------- PolicyNetwork

PolicyNetwork::PolicyNetwork(const ModelConfig& config, std::uint64_t seed) {
  num::Rng rng(seed);
  backbone_ = Backbone(config, rng);
  lm_head_ = Linear("lm_head", config.d_model, config.vocab_size, rng, kInitStd);
  value_head_ = Linear("value_head", config.d_model, 1, rng, kInitStd);
}

template <class Self>
PolicyNetwork::Output PolicyNetwork::run(Self& self, Tape& tape, std::span<const int> tokens,
                                         std::size_t first_row) {
  Var h = self.backbone_.hidden(tape, tokens);
  if (first_row >= tokens.size()) {
    throw ContractError("first_row " + std::to_string(first_row) + " outside sequence of " +
                        std::to_string(tokens.size()));
  }
  if (first_row > 0) h = ops::slice_rows(h, first_row, tokens.size());
  return {self.lm_head_.forward(tape, h), self.value_head_.forward(tape, h)};
}

PolicyNetwork::Output PolicyNetwork::forward(Tape& tape, std::span<const int> tokens,
                                             std::size_t first_row) {
  return run(*this, tape, tokens, first_row);
}

PolicyNetwork::Output PolicyNetwork::forward(Tape& tape, std::span<const int> tokens,
                                             std::size_t first_row) const {
  return run(*this, tape, tokens, first_row);
}

std::vector<Linear*> PolicyNetwork::linears() {
  std::vector<Linear*> out;
  block_linears(backbone_, out);
  out.push_back(&lm_head_);
  out.push_back(&value_head_);
  return out;
}

void PolicyNetwork::attach_lora(std::string_view selector, std::size_t rank, double scale,
                                std::uint64_t seed) {
  if (rank == 0) throw ConfigError("LoRA rank must be at least 1");
  auto chosen = select_linears(linears(), selector);
  num::Rng rng(seed);
  for (Linear* l : chosen) l->attach_adapter(rank, scale, rng);
  lora_.push_back({std::string(selector), rank, scale});
}

std::vector<NamedTensor> PolicyNetwork::parameters() {
  std::vector<NamedTensor> out;
  backbone_.collect(out);
  lm_head_.collect(out);
  value_head_.collect(out);
  return out;
}

std::vector<Tensor*> PolicyNetwork::trainable() {
  std::vector<Tensor*> out;
  for (auto& p : parameters()) {
    if (p.tensor->requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::size_t PolicyNetwork::trainable_count() {
  std::size_t n = 0;
  for (Tensor* t : trainable()) n += t->size();
  return n;
}

void PolicyNetwork::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

// --------------------------------------------------------- RewardNetwork

RewardNetwork::RewardNetwork(const ModelConfig& config, std::uint64_t seed) {
  num::Rng rng(seed);
  backbone_ = Backbone(config, rng);
  score_head_ = Linear("score_head", config.d_model, 1, rng, kInitStd);
}

RewardNetwork::RewardNetwork(const RewardNetwork& other)
    : backbone_(other.backbone_), score_head_(other.score_head_), lora_(other.lora_),
      calls_(other.calls_.load()) {}

RewardNetwork& RewardNetwork::operator=(const RewardNetwork& other) {
  if (this != &other) {
    backbone_ = other.backbone_;
    score_head_ = other.score_head_;
    lora_ = other.lora_;
    calls_.store(other.calls_.load());
  }
  return *this;
}

template <class Self>
Var RewardNetwork::run(Self& self, Tape& tape, std::span<const int> tokens) {
  self.calls_.fetch_add(1);
  Var h = self.backbone_.hidden(tape, tokens);
  Var last = ops::slice_rows(h, tokens.size() - 1, tokens.size());
  return self.score_head_.forward(tape, last);
}

Var RewardNetwork::forward(Tape& tape, std::span<const int> tokens) {
  return run(*this, tape, tokens);
}

Var RewardNetwork::forward(Tape& tape, std::span<const int> tokens) const {
  return run(*this, tape, tokens);
}

double RewardNetwork::reward(std::span<const int> tokens) const {
  Tape tape;
  return forward(tape, tokens).item();
}

std::vector<Linear*> RewardNetwork::linears() {
  std::vector<Linear*> out;
  block_linears(backbone_, out);
  out.push_back(&score_head_);
  return out;
}

void RewardNetwork::attach_lora(std::string_view selector, std::size_t rank, double scale,
                                std::uint64_t seed) {
  if (rank == 0) throw ConfigError("LoRA rank must be at least 1");
  auto chosen = select_linears(linears(), selector);
  num::Rng rng(seed);
  for (Linear* l : chosen) l->attach_adapter(rank, scale, rng);
  lora_.push_back({std::string(selector), rank, scale});
}

std::vector<NamedTensor> RewardNetwork::parameters() {
  std::vector<NamedTensor> out;
  backbone_.collect(out);
  score_head_.collect(out);
  return out;
}

std::vector<Tensor*> RewardNetwork::trainable() {
  std::vector<Tensor*> out;
  for (auto& p : parameters()) {
    if (p.tensor->requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

void RewardNetwork::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

// -------------------------------------------------------------- sampling

int sample_next(std::span<const double> logits, double temperature, num::Rng& rng, bool greedy) {
  if (logits.empty()) throw ContractError("sample_next on empty logits");
  const auto argmax = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (greedy) return argmax;
  if (!(temperature > 0.0)) throw ContractError("sampling temperature must be positive");
  const double mx = logits[static_cast<std::size_t>(argmax)];
  std::vector<double> w(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) z += (w[i] = std::exp((logits[i] - mx) / temperature));
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return static_cast<int>(i);
    u -= w[i];
  }
  return argmax;  // rounding residue
}

}  // namespace stepamc::model
