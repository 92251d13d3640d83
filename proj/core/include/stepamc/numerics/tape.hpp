#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "stepamc/numerics/tensor.hpp"

namespace stepamc::num {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::uint32_t id() const noexcept { return id_; }

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::span<const double> values() const;
  double at(std::size_t r, std::size_t c) const;
  double item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Linear record of executed operations. Every recorded node is a rows x cols
// matrix; backward() replays adjoints in reverse recording order and adds
// leaf gradients into the owning Tensors. Leaf gradients accumulate across
// backward() calls until the caller zeroes them.
//
// Not thread-safe; use one tape per thread.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::uint32_t out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(const Tensor& t);
  Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  Var scalar(double v);
  // Leaf bound to a parameter. Recording the same tensor twice yields the same node.
  Var param(Tensor& p);
  // Read-only binding: the tensor's values enter as a constant.
  Var param(const Tensor& p);

  Var record(std::size_t rows, std::size_t cols, std::vector<double> values,
             std::span<const Var> inputs, Backprop backprop);

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  Tensor to_tensor(Var v) const;

  // Accessors used by operation adjoints.
  std::size_t rows(std::uint32_t id) const { return nodes_[id].rows; }
  std::size_t cols(std::uint32_t id) const { return nodes_[id].cols; }
  std::span<const double> value(std::uint32_t id) const { return nodes_[id].value; }
  std::span<const double> grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  // Zero-initialised on first access; empty when the node needs no gradient.
  std::span<double> grad_accumulator(std::uint32_t id);

 private:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    Backprop backprop;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::uint32_t> param_ids_;
};

}  // namespace stepamc::num
