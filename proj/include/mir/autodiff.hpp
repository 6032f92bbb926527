#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mir/tensor.hpp"

namespace mir {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so walking them backwards is a
/// reverse topological order and visits each node once. A tape is owned by a
/// single thread.
class Tape {
 public:
  // Adjoint rule for node `self`: reads grad(self) and accumulates into inputs.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  // Seeds d loss / d loss = 1 and propagates adjoints. `loss` must be 1 x 1.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& grad(Var v) const { return nodes_[v.id()].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `delta` into the adjoint of `id` when that node requires a gradient.
  void accumulate(std::size_t id, const Tensor& delta);
  // Mutable adjoint buffer; callers must check requires_grad first.
  Tensor& grad_buffer(std::size_t id) { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Backward backward;
  };

  std::vector<Node> nodes_;
};

/// Boolean keep-mask for softmax_rows. `true` entries participate.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = true);

  // Every row keeps exactly the columns flagged in `keep`.
  static Mask columns(std::size_t rows, const std::vector<bool>& keep);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool at(std::size_t r, std::size_t c) const { return keep_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { keep_[r * cols_ + c] = v ? 1 : 0; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<unsigned char> keep_;
};

// Primitives. Binary element-wise ops accept either equal shapes or a 1 x q
// right-hand side broadcast over rows; nothing else.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
// 1 x 1 `s` times every element of `a`.
Var scale_by(Var s, Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var softplus(Var a);
Var leaky_relu(Var a, double slope);

Var softmax_rows(Var a, const Mask* mask = nullptr);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, std::size_t rows, std::size_t cols);
// Stacks the 1 x q row `a` n times.
Var repeat_rows(Var a, std::size_t n);
// Rows of `table` selected by `indices`. With `frozen_padding_row`, row 0
// receives no gradient.
Var gather_rows(Var table, std::span<const std::size_t> indices, bool frozen_padding_row);
// out(i, j) = sum_{s,t} g(i*k + s, j*k + t) * w(s, t) for a k x k `w`.
Var block_weighted_sum(Var g, Var w);
Var sum(Var a);
// Multiplies rows whose `keep` flag is false by zero.
Var mask_rows(Var a, const std::vector<bool>& keep);
// Mean binary cross-entropy over kept rows of an n x 1 logit column.
Var bce_with_logits(Var logits, std::span<const double> labels, const std::vector<bool>& keep);

}  // namespace mir
