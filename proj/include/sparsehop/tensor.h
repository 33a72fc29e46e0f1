// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Dense double tensors with a reverse-mode differentiation record.
//
// A Tensor is a cheap handle onto a shared node. Operations whose inputs
// require gradients record their inputs and a backward rule on the result
// node; `backward(loss)` orders the recorded graph topologically and replays
// the rules once per node. Operations on tensors that do not require
// gradients record nothing, so inference builds no graph.

#ifndef SPARSEHOP_TENSOR_H_
#define SPARSEHOP_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsehop {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Writable view of a leaf's values (parameter updates, test perturbation).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// While alive, operations on this thread record no history (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Reverse pass from a scalar loss. Leaf gradients accumulate across calls;
// interior gradients are recomputed every call.
void backward(const Tensor& loss);

// Number of graph nodes the most recent backward() call on this thread
// visited. Test instrumentation.
std::size_t last_backward_node_count();

// ---- arithmetic -----------------------------------------------------------

// a: [..., k], b: [k, n] -> [..., n]. Leading axes of `a` are flattened.
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched product over the leading axis: [g, m, k] x [g, k, n] -> [g, m, n];
// with transpose_b the right operand is [g, n, k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

enum class Elementwise { kAdd, kSub, kMul, kScale, kRelu };
// Shapes equal, or `b` a one-element tensor (scalar operand). kScale needs a
// scalar `b`; kRelu ignores `b`.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
// x: [..., n], bias: [n].
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Standardizes the last axis then applies gain and bias, both [D].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// ---- rearrangement --------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
// Keeps axes [0, start_axis) and flattens the rest.
Tensor flatten(const Tensor& x, std::size_t start_axis = 1);
// Prepends an axis of length `times`: [s...] -> [times, s...].
Tensor repeat(const Tensor& x, std::size_t times);
// Zero-pads `axis` up to `length`.
Tensor pad_to(const Tensor& x, std::size_t axis, std::size_t length);
// table: [V, G], rows picked by index -> [indices.size(), G].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- normalization and losses ---------------------------------------------

// Optional sink receiving every attention probability matrix produced by
// entmax_rows (instrumentation for simplex checks).
using RowObserver = std::function<void(const Tensor& probabilities)>;

// alpha-entmax over the last axis with a fixed alpha.
Tensor entmax_rows(const Tensor& scores, double alpha,
                   const RowObserver* observer = nullptr);
// alpha = 1 + sigmoid(alpha_pre); alpha_pre is a one-element tensor whose
// gradient is estimated by central differences in alpha (see
// entmax_alpha_gradient).
Tensor entmax_rows(const Tensor& scores, const Tensor& alpha_pre,
                   const RowObserver* observer = nullptr);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

// logits: [B, C]; mean negative log-likelihood.
Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const int> labels);
// predictions: [B] or [B, 1]; mean squared error.
Tensor mse_loss(const Tensor& predictions, std::span<const double> targets);

// ---- oracle ---------------------------------------------------------------

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h);

}  // namespace sparsehop

#endif  // SPARSEHOP_TENSOR_H_
