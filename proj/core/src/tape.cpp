#include "stepamc/numerics/tape.hpp"

#include <algorithm>

#include "stepamc/errors.hpp"

namespace stepamc::num {

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

std::size_t Var::rows() const { return tape().rows(id_); }
std::size_t Var::cols() const { return tape().cols(id_); }
std::span<const double> Var::values() const { return tape().value(id_); }
double Var::at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

double Var::item() const {
  if (size() != 1) {
    throw ContractError("item() on a " + std::to_string(rows()) + "x" +
                        std::to_string(cols()) + " value");
  }
  return values()[0];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owned(Var v) const {
  if (!v.valid() || v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::constant(const Tensor& t) {
  Node n;
  n.rows = t.rows();
  n.cols = t.cols();
  n.value.assign(t.values().begin(), t.values().end());
  return push(std::move(n));
}

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (rows * cols != values.size()) {
    throw DimensionError("constant " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " given " + std::to_string(values.size()) + " values");
  }
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(values);
  return push(std::move(n));
}

Var Tape::scalar(double v) { return constant(1, 1, {v}); }

Var Tape::param(Tensor& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.rows = p.rows();
  n.cols = p.cols();
  n.value.assign(p.values().begin(), p.values().end());
  n.param = &p;
  n.needs_grad = p.requires_grad();
  Var v = push(std::move(n));
  param_ids_.emplace(&p, v.id());
  return v;
}

Var Tape::param(const Tensor& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
    return Var(this, it->second);
  }
  Var v = constant(p);
  param_ids_.emplace(&p, v.id());
  return v;
}

Var Tape::record(std::size_t rows, std::size_t cols, std::vector<double> values,
                 std::span<const Var> inputs, Backprop backprop) {
  if (rows * cols != values.size()) {
    throw DimensionError("recorded " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " value holds " + std::to_string(values.size()) + " elements");
  }
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(values);
  for (const Var& in : inputs) {
    check_owned(in);
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (n.needs_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

std::span<double> Tape::grad_accumulator(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return {};
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + std::to_string(loss.rows()) +
                        "x" + std::to_string(loss.cols()));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id()].needs_grad) return;

  grad_accumulator(loss.id())[0] = 1.0;
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.empty()) continue;
    if (n.backprop) n.backprop(*this, static_cast<std::uint32_t>(i));
  }
  for (Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto dst = n.param->mutable_grad();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
  }
}

Tensor Tape::to_tensor(Var v) const {
  check_owned(v);
  const Node& n = nodes_[v.id()];
  return Tensor({n.rows, n.cols}, n.value);
}

}  // namespace stepamc::num
