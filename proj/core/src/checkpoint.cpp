#include "stepamc/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "stepamc/errors.hpp"

namespace stepamc::model {
namespace {

constexpr const char* kMagic = "stepamc-checkpoint 1";

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("checkpoint: bad number '" + s + "'");
  }
  return v;
}

template <class Net>
Checkpoint capture(Net& net, std::string kind, std::string stage, std::string vocab_hash) {
  Checkpoint c;
  c.kind = std::move(kind);
  c.stage = std::move(stage);
  c.vocab_hash = std::move(vocab_hash);
  c.config = net.config();
  c.lora = net.lora_specs();
  for (auto& p : net.parameters()) c.params.emplace_back(p.name, *p.tensor);
  return c;
}

template <class Net>
Net rebuild(const Checkpoint& c, const std::string& kind, const std::string& vocab_hash) {
  if (c.kind != kind) throw DataError("checkpoint holds a " + c.kind + " network, expected " + kind);
  if (c.vocab_hash != vocab_hash) {
    throw DataError("checkpoint vocabulary hash " + c.vocab_hash +
                    " does not match vocabulary " + vocab_hash);
  }
  Net net(c.config, 0);
  for (const auto& spec : c.lora) net.attach_lora(spec.selector, spec.rank, spec.scale, 0);
  auto named = net.parameters();
  if (named.size() != c.params.size()) {
    throw DataError("checkpoint has " + std::to_string(c.params.size()) + " tensors, network has " +
                    std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = c.params[i];
    if (name != named[i].name || tensor.shape() != named[i].tensor->shape()) {
      throw DataError("checkpoint tensor " + name + " " + num::shape_string(tensor.shape()) +
                      " does not match " + named[i].name + " " +
                      num::shape_string(named[i].tensor->shape()));
    }
    std::copy(tensor.values().begin(), tensor.values().end(), named[i].tensor->values().begin());
  }
  return net;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << kMagic << '\n';
  out << "kind " << c.kind << '\n';
  out << "stage " << c.stage << '\n';
  out << "vocab_hash " << c.vocab_hash << '\n';
  out << "config " << c.config.vocab_size << ' ' << c.config.max_len << ' ' << c.config.d_model
      << ' ' << c.config.n_layers << ' ' << c.config.n_heads << ' ' << c.config.d_ff << '\n';
  for (const auto& l : c.lora) {
    out << "lora " << l.selector << ' ' << l.rank << ' ' << format_double(l.scale) << '\n';
  }
  for (const auto& [name, v] : c.scalars) out << "scalar " << name << ' ' << format_double(v) << '\n';
  out << "tensors " << c.params.size() << '\n';
  for (const auto& [name, t] : c.params) {
    out << "tensor " << name << ' ' << t.shape().size();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    bool first = true;
    for (double v : t.values()) {
      if (!first) out << ' ';
      out << format_double(v);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError(path + " is not a checkpoint");

  Checkpoint c;
  std::size_t expected = 0;
  bool have_count = false;
  while (!have_count && std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      ls >> c.kind;
    } else if (key == "stage") {
      ls >> c.stage;
    } else if (key == "vocab_hash") {
      ls >> c.vocab_hash;
    } else if (key == "config") {
      ls >> c.config.vocab_size >> c.config.max_len >> c.config.d_model >> c.config.n_layers >>
          c.config.n_heads >> c.config.d_ff;
    } else if (key == "lora") {
      LoraSpec l;
      std::string scale;
      ls >> l.selector >> l.rank >> scale;
      l.scale = parse_double(scale);
      c.lora.push_back(l);
    } else if (key == "scalar") {
      std::string name, v;
      ls >> name >> v;
      c.scalars[name] = parse_double(v);
    } else if (key == "tensors") {
      ls >> expected;
      have_count = true;
    } else {
      throw DataError("checkpoint: unknown header field '" + key + "'");
    }
    if (ls.fail()) throw DataError("checkpoint: malformed header line '" + line + "'");
  }
  if (!have_count) throw DataError("checkpoint: missing tensor table");

  for (std::size_t i = 0; i < expected; ++i) {
    if (!std::getline(in, line)) throw DataError("checkpoint: truncated tensor table");
    std::istringstream hs(line);
    std::string key, name;
    std::size_t rank = 0;
    hs >> key >> name >> rank;
    if (key != "tensor" || hs.fail()) throw DataError("checkpoint: bad tensor header '" + line + "'");
    num::Shape shape(rank);
    for (auto& d : shape) hs >> d;
    if (!std::getline(in, line)) throw DataError("checkpoint: missing values for " + name);
    std::vector<double> values;
    values.reserve(num::shape_size(shape));
    std::istringstream vs(line);
    std::string tok;
    while (vs >> tok) values.push_back(parse_double(tok));
    c.params.emplace_back(name, Tensor(shape, std::move(values), true));
  }
  return c;
}

Checkpoint snapshot(PolicyNetwork& policy, std::string stage, std::string vocab_hash) {
  return capture(policy, "policy", std::move(stage), std::move(vocab_hash));
}

Checkpoint snapshot(RewardNetwork& reward, std::string stage, std::string vocab_hash) {
  return capture(reward, "reward", std::move(stage), std::move(vocab_hash));
}

PolicyNetwork restore_policy(const Checkpoint& ckpt, const std::string& vocab_hash) {
  return rebuild<PolicyNetwork>(ckpt, "policy", vocab_hash);
}

RewardNetwork restore_reward(const Checkpoint& ckpt, const std::string& vocab_hash) {
  return rebuild<RewardNetwork>(ckpt, "reward", vocab_hash);
}

}  // namespace stepamc::model
