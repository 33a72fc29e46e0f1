// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <Eigen/Core>

#include "sparsehop/entmax.h"

namespace sparsehop {
namespace detail {

struct Node {
  Shape shape;
  std::shared_ptr<std::vector<double>> storage;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::span<double> values() { return {storage->data(), storage->size()}; }

  std::vector<double>& ensure_grad() {
    if (grad.size() != storage->size()) grad.assign(storage->size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

thread_local std::size_t g_last_backward_nodes = 0;
thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> data) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + to_string(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->storage = std::make_shared<std::vector<double>>(std::move(data));
  return node;
}

// Builds an operation result; history is kept only when some input needs
// gradients.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(data));
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  needs = needs && g_grad_enabled;
  if (needs) {
    node->requires_grad = true;
    node->leaf = false;
    for (const Tensor* t : inputs) node->inputs.push_back(t->node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tensor make_result_many(Shape shape, std::vector<double> data,
                        const std::vector<Tensor>& inputs,
                        std::function<void(Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(data));
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  needs = needs && g_grad_enabled;
  if (needs) {
    node->requires_grad = true;
    node->leaf = false;
    for (const Tensor& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of an input, or nullptr when it does not need one.
double* grad_of(Node& self, std::size_t input) {
  Node& in = *self.inputs[input];
  if (!in.requires_grad) return nullptr;
  return in.ensure_grad().data();
}

const double* values_of(Node& self, std::size_t input) {
  return self.inputs[input]->storage->data();
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ShapeError(message);
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape[i];
  }
  return strides;
}

// Calls fn(out_offset, in_offset, block) for every contiguous block of the
// permuted layout.
template <typename Fn>
void for_each_permuted_block(const Shape& in_shape,
                             const std::vector<std::size_t>& axes, Fn&& fn) {
  const std::size_t rank = in_shape.size();
  std::size_t kept = rank;
  std::size_t block = 1;
  while (kept > 0 && axes[kept - 1] == kept - 1) {
    block *= in_shape[kept - 1];
    --kept;
  }
  const auto in_strides = strides_of(in_shape);
  std::vector<std::size_t> out_dims(kept);
  std::vector<std::size_t> step(kept);
  for (std::size_t i = 0; i < kept; ++i) {
    out_dims[i] = in_shape[axes[i]];
    step[i] = in_strides[axes[i]];
  }
  const std::size_t total = numel(in_shape);
  if (total == 0) return;
  std::vector<std::size_t> counter(kept, 0);
  std::size_t in_offset = 0;
  for (std::size_t out_offset = 0; out_offset < total; out_offset += block) {
    fn(out_offset, in_offset, block);
    for (std::size_t i = kept; i-- > 0;) {
      ++counter[i];
      in_offset += step[i];
      if (counter[i] < out_dims[i]) break;
      in_offset -= step[i] * out_dims[i];
      counter[i] = 0;
    }
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(data))) {
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("tensor: axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->storage->size(); }

std::span<const double> Tensor::data() const {
  return {node_->storage->data(), node_->storage->size()};
}

std::span<double> Tensor::mutable_data() {
  if (!node_->leaf) throw std::logic_error("tensor: mutable_data on non-leaf");
  return node_->values();
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("tensor: item() on " + to_string(shape()));
  return (*node_->storage)[0];
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_->leaf) throw std::logic_error("tensor: requires_grad on non-leaf");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_->leaf; }

bool Tensor::has_grad() const {
  return !node_->grad.empty() && node_->grad.size() == size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor: no gradient recorded");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(shape(), std::vector<double>(data().begin(), data().end()));
}

// ---- backward -------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar");
  }
  Node* root = loss.node();
  if (!root->requires_grad) {
    throw std::logic_error("backward: loss does not depend on any parameter");
  }
  // Iterative post-order DFS gives a topological order of the recorded ops.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior gradients are allocated on first use and released once their
  // node has been replayed, so only the active frontier is resident.
  for (Node* node : order) {
    if (!node->leaf) std::vector<double>().swap(node->grad);
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->leaf) continue;
    node->backward_fn(*node);
    std::vector<double>().swap(node->grad);
  }
  g_last_backward_nodes = order.size();
}

std::size_t last_backward_node_count() { return g_last_backward_nodes; }

// ---- products -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 1 && b.rank() == 2,
          "matmul: expected [..., k] x [k, n], got " + to_string(a.shape()) +
              " and " + to_string(b.shape()));
  const std::size_t k = a.shape().back();
  require(k == b.dim(0), "matmul: inner dimensions differ: " +
                             to_string(a.shape()) + " x " +
                             to_string(b.shape()));
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.size() / std::max<std::size_t>(k, 1);
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(rows * n);
  {
    ConstMatrixMap am(a.data().data(), rows, k);
    ConstMatrixMap bm(b.data().data(), k, n);
    MatrixMap cm(out.data(), rows, n);
    cm.noalias() = am * bm;
  }
  return make_result(std::move(out_shape), std::move(out), {&a, &b},
                     [rows, k, n](Node& self) {
                       ConstMatrixMap g(self.grad.data(), rows, n);
                       if (double* ga = grad_of(self, 0)) {
                         ConstMatrixMap bm(values_of(self, 1), k, n);
                         MatrixMap(ga, rows, k).noalias() += g * bm.transpose();
                       }
                       if (double* gb = grad_of(self, 1)) {
                         ConstMatrixMap am(values_of(self, 0), rows, k);
                         MatrixMap(gb, k, n).noalias() += am.transpose() * g;
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0),
          "bmm: expected batched 3-d operands, got " + to_string(a.shape()) +
              " and " + to_string(b.shape()));
  const std::size_t groups = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  require(k == (transpose_b ? b.dim(2) : b.dim(1)),
          "bmm: inner dimensions differ: " + to_string(a.shape()) + " x " +
              to_string(b.shape()));
  std::vector<double> out(groups * m * n);
  for (std::size_t g = 0; g < groups; ++g) {
    ConstMatrixMap am(a.data().data() + g * m * k, m, k);
    MatrixMap cm(out.data() + g * m * n, m, n);
    if (transpose_b) {
      ConstMatrixMap bm(b.data().data() + g * n * k, n, k);
      cm.noalias() = am * bm.transpose();
    } else {
      ConstMatrixMap bm(b.data().data() + g * k * n, k, n);
      cm.noalias() = am * bm;
    }
  }
  return make_result(
      {groups, m, n}, std::move(out), {&a, &b},
      [groups, m, k, n, transpose_b](Node& self) {
        double* ga = grad_of(self, 0);
        double* gb = grad_of(self, 1);
        const double* av = values_of(self, 0);
        const double* bv = values_of(self, 1);
        for (std::size_t g = 0; g < groups; ++g) {
          ConstMatrixMap gm(self.grad.data() + g * m * n, m, n);
          if (transpose_b) {
            if (ga) {
              ConstMatrixMap bm(bv + g * n * k, n, k);
              MatrixMap(ga + g * m * k, m, k).noalias() += gm * bm;
            }
            if (gb) {
              ConstMatrixMap am(av + g * m * k, m, k);
              MatrixMap(gb + g * n * k, n, k).noalias() += gm.transpose() * am;
            }
          } else {
            if (ga) {
              ConstMatrixMap bm(bv + g * k * n, k, n);
              MatrixMap(ga + g * m * k, m, k).noalias() += gm * bm.transpose();
            }
            if (gb) {
              ConstMatrixMap am(av + g * m * k, m, k);
              MatrixMap(gb + g * k * n, k, n).noalias() += am.transpose() * gm;
            }
          }
        }
      });
}

// ---- elementwise ----------------------------------------------------------

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  if (op == Elementwise::kRelu) return relu(a);
  const bool scalar_b = b.size() == 1 && a.shape() != b.shape();
  require(scalar_b || a.shape() == b.shape(),
          "elementwise: shapes differ: " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
  if (op == Elementwise::kScale) {
    require(b.size() == 1, "elementwise: scale needs a scalar operand");
  }
  const std::size_t n = a.size();
  auto av = a.data();
  auto bv = b.data();
  auto bat = [&](std::size_t i) { return scalar_b ? bv[0] : bv[i]; };
  std::vector<double> out(n);
  switch (op) {
    case Elementwise::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bat(i);
      break;
    case Elementwise::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bat(i);
      break;
    case Elementwise::kMul:
    case Elementwise::kScale:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bat(i);
      break;
    case Elementwise::kRelu:
      break;
  }
  return make_result(a.shape(), std::move(out), {&a, &b},
                     [op, n, scalar_b](Node& self) {
                       const double* g = self.grad.data();
                       const double* av = values_of(self, 0);
                       const double* bv = values_of(self, 1);
                       auto bat = [&](std::size_t i) {
                         return scalar_b ? bv[0] : bv[i];
                       };
                       double* ga = grad_of(self, 0);
                       double* gb = grad_of(self, 1);
                       const double sign = op == Elementwise::kSub ? -1.0 : 1.0;
                       const bool product = op == Elementwise::kMul ||
                                            op == Elementwise::kScale;
                       for (std::size_t i = 0; i < n; ++i) {
                         if (ga) ga[i] += product ? g[i] * bat(i) : g[i];
                         if (gb) {
                           const double d = product ? g[i] * av[i] : sign * g[i];
                           gb[scalar_b ? 0 : i] += d;
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(Elementwise::kAdd, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(Elementwise::kSub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(Elementwise::kMul, a, b);
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  const std::size_t n = a.size();
  return make_result(a.shape(), std::move(out), {&a}, [n, factor](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) ga[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  const std::size_t n = a.size();
  return make_result(a.shape(), std::move(out), {&a}, [n](Node& self) {
    double* ga = grad_of(self, 0);
    const double* av = values_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (av[i] > 0.0) ga[i] += self.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() >= 1 && bias.rank() == 1 &&
              x.shape().back() == bias.dim(0),
          "add_bias: " + to_string(x.shape()) + " + " +
              to_string(bias.shape()));
  const std::size_t width = bias.dim(0);
  const std::size_t rows = x.size() / std::max<std::size_t>(width, 1);
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] += bv[c];
  }
  return make_result(x.shape(), std::move(out), {&x, &bias},
                     [rows, width](Node& self) {
                       const double* g = self.grad.data();
                       if (double* gx = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < rows * width; ++i) gx[i] += g[i];
                       }
                       if (double* gb = grad_of(self, 1)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < width; ++c) {
                             gb[c] += g[r * width + c];
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.rank() >= 1 && gain.rank() == 1 && bias.rank() == 1 &&
              gain.dim(0) == x.shape().back() && bias.dim(0) == gain.dim(0),
          "layer_norm: " + to_string(x.shape()) + " with gain " +
              to_string(gain.shape()));
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  const std::size_t width = gain.dim(0);
  const std::size_t rows = x.size() / width;
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  std::vector<double> out(x.size());
  auto normalized = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * width;
    double mu = 0.0;
    for (std::size_t c = 0; c < width; ++c) mu += row[c];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(width);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < width; ++c) {
      const double h = (row[c] - mu) * is;
      (*normalized)[r * width + c] = h;
      out[r * width + c] = gv[c] * h + bv[c];
    }
  }
  return make_result(
      x.shape(), std::move(out), {&x, &gain, &bias},
      [rows, width, normalized, inv_std](Node& self) {
        const double* g = self.grad.data();
        const double* gv = values_of(self, 1);
        double* gx = grad_of(self, 0);
        double* gg = grad_of(self, 1);
        double* gb = grad_of(self, 2);
        const double inv_w = 1.0 / static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* h = normalized->data() + r * width;
          const double* gr = g + r * width;
          if (gg || gb) {
            for (std::size_t c = 0; c < width; ++c) {
              if (gg) gg[c] += gr[c] * h[c];
              if (gb) gb[c] += gr[c];
            }
          }
          if (gx) {
            double mean_dh = 0.0;
            double mean_dh_h = 0.0;
            for (std::size_t c = 0; c < width; ++c) {
              const double dh = gr[c] * gv[c];
              mean_dh += dh;
              mean_dh_h += dh * h[c];
            }
            mean_dh *= inv_w;
            mean_dh_h *= inv_w;
            const double is = (*inv_std)[r];
            for (std::size_t c = 0; c < width; ++c) {
              const double dh = gr[c] * gv[c];
              gx[r * width + c] += is * (dh - mean_dh - h[c] * mean_dh_h);
            }
          }
        }
      });
}

// ---- rearrangement --------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape: " + to_string(x.shape()) +
                                        " has " + std::to_string(x.size()) +
                                        " values, target " + to_string(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->storage = x.node()->storage;
  if (x.requires_grad() && g_grad_enabled) {
    node->requires_grad = true;
    node->leaf = false;
    node->inputs.push_back(x.node_ptr());
    node->backward_fn = [](Node& self) {
      double* gx = grad_of(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    };
  }
  return Tensor(std::move(node));
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  require(axes.size() == rank, "permute: axis count mismatch");
  std::vector<bool> used(rank, false);
  for (std::size_t a : axes) {
    require(a < rank && !used[a], "permute: invalid axis order");
    used[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.shape()[axes[i]];
  std::vector<double> out(x.size());
  const double* src = x.data().data();
  for_each_permuted_block(x.shape(), axes,
                          [&](std::size_t o, std::size_t i, std::size_t n) {
                            std::memcpy(out.data() + o, src + i, n * sizeof(double));
                          });
  Shape in_shape = x.shape();
  return make_result(std::move(out_shape), std::move(out), {&x},
                     [in_shape, axes](Node& self) {
                       double* gx = grad_of(self, 0);
                       const double* g = self.grad.data();
                       for_each_permuted_block(
                           in_shape, axes,
                           [&](std::size_t o, std::size_t i, std::size_t n) {
                             for (std::size_t j = 0; j < n; ++j) gx[i + j] += g[o + j];
                           });
                     });
}

Tensor transpose(const Tensor& x) {
  require(x.rank() >= 2, "transpose: rank must be >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> chunk;
  for (const Tensor& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      require(i == axis || p.shape()[i] == first[i],
              "concat: shapes " + to_string(first) + " and " +
                  to_string(p.shape()) + " differ off the concat axis");
    }
    out_shape[axis] += p.shape()[axis];
    chunk.push_back(p.shape()[axis] * inner);
  }
  const std::size_t row = out_shape[axis] * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const double* src = parts[j].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::memcpy(out.data() + o * row + offset, src + o * chunk[j],
                  chunk[j] * sizeof(double));
    }
    offset += chunk[j];
  }
  return make_result_many(std::move(out_shape), std::move(out), parts,
                          [outer, row, chunk](Node& self) {
                            std::size_t offset = 0;
                            for (std::size_t j = 0; j < chunk.size(); ++j) {
                              if (double* gp = grad_of(self, j)) {
                                for (std::size_t o = 0; o < outer; ++o) {
                                  const double* g = self.grad.data() + o * row + offset;
                                  for (std::size_t i = 0; i < chunk[j]; ++i) {
                                    gp[o * chunk[j] + i] += g[i];
                                  }
                                }
                              }
                              offset += chunk[j];
                            }
                          });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  require(axis < x.rank(), "slice: axis out of range");
  require(begin < end && end <= x.shape()[axis],
          "slice: range [" + std::to_string(begin) + ", " +
              std::to_string(end) + ") out of bounds for " +
              to_string(x.shape()));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t row = x.shape()[axis] * inner;
  const std::size_t width = (end - begin) * inner;
  const std::size_t start = begin * inner;
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  std::vector<double> out(outer * width);
  const double* src = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * width, src + o * row + start,
                width * sizeof(double));
  }
  return make_result(std::move(out_shape), std::move(out), {&x},
                     [outer, row, width, start](Node& self) {
                       double* gx = grad_of(self, 0);
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < width; ++i) {
                           gx[o * row + start + i] += self.grad[o * width + i];
                         }
                       }
                     });
}

Tensor flatten(const Tensor& x, std::size_t start_axis) {
  require(start_axis <= x.rank(), "flatten: axis out of range");
  Shape shape(x.shape().begin(), x.shape().begin() + start_axis);
  std::size_t rest = 1;
  for (std::size_t i = start_axis; i < x.rank(); ++i) rest *= x.shape()[i];
  shape.push_back(rest);
  return reshape(x, std::move(shape));
}

Tensor repeat(const Tensor& x, std::size_t times) {
  require(times >= 1, "repeat: times must be >= 1");
  Shape shape{times};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  const std::size_t n = x.size();
  std::vector<double> out(times * n);
  for (std::size_t t = 0; t < times; ++t) {
    std::memcpy(out.data() + t * n, x.data().data(), n * sizeof(double));
  }
  return make_result(std::move(shape), std::move(out), {&x},
                     [times, n](Node& self) {
                       double* gx = grad_of(self, 0);
                       for (std::size_t t = 0; t < times; ++t) {
                         for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[t * n + i];
                       }
                     });
}

Tensor pad_to(const Tensor& x, std::size_t axis, std::size_t length) {
  require(axis < x.rank(), "pad_to: axis out of range");
  const std::size_t current = x.shape()[axis];
  require(length >= current, "pad_to: target shorter than input");
  if (length == current) return x;
  Shape zeros_shape = x.shape();
  zeros_shape[axis] = length - current;
  return concat({x, Tensor::zeros(std::move(zeros_shape))}, axis);
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require(table.rank() == 2, "gather_rows: table must be 2-d");
  const std::size_t rows = table.dim(0);
  const std::size_t width = table.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * width);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < rows, "gather_rows: index " + std::to_string(idx[i]) +
                               " out of range " + std::to_string(rows));
    std::memcpy(out.data() + i * width, table.data().data() + idx[i] * width,
                width * sizeof(double));
  }
  const std::size_t count = idx.size();
  return make_result({count, width}, std::move(out), {&table},
                     [idx = std::move(idx), width](Node& self) {
                       double* gt = grad_of(self, 0);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         for (std::size_t c = 0; c < width; ++c) {
                           gt[idx[i] * width + c] += self.grad[i * width + c];
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const std::size_t n = x.size();
  return make_result({}, {total}, {&x}, [n](Node& self) {
    double* gx = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

// ---- entmax over rows -----------------------------------------------------

namespace {

Tensor entmax_rows_impl(const Tensor& scores, double alpha,
                        const Tensor* alpha_pre, const RowObserver* observer) {
  require(scores.rank() >= 1, "entmax_rows: scalar input");
  const std::size_t width = scores.shape().back();
  require(width >= 1, "entmax_rows: empty rows");
  const std::size_t rows = scores.size() / width;
  std::vector<double> out(scores.size());
  const double* z = scores.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    entmax_into({z + r * width, width}, alpha,
                {out.data() + r * width, width});
  }
  auto backward_fn = [rows, width, alpha](Node& self) {
    const double* p = self.storage->data();
    const double* g = self.grad.data();
    if (double* gz = grad_of(self, 0)) {
      std::vector<double> tmp(width);
      for (std::size_t r = 0; r < rows; ++r) {
        entmax_backward_into({p + r * width, width}, alpha,
                             {g + r * width, width}, tmp);
        for (std::size_t c = 0; c < width; ++c) gz[r * width + c] += tmp[c];
      }
    }
    if (self.inputs.size() > 1) {
      if (double* ga = grad_of(self, 1)) {
        const double* zv = values_of(self, 0);
        double dalpha = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          dalpha += entmax_alpha_gradient({zv + r * width, width}, alpha,
                                          {g + r * width, width});
        }
        // d alpha / d pre = sigmoid * (1 - sigmoid) = (alpha - 1)(2 - alpha).
        ga[0] += dalpha * (alpha - 1.0) * (2.0 - alpha);
      }
    }
  };
  Tensor result =
      alpha_pre ? make_result(scores.shape(), std::move(out),
                              {&scores, alpha_pre}, backward_fn)
                : make_result(scores.shape(), std::move(out), {&scores},
                              backward_fn);
  if (observer && *observer) (*observer)(result);
  return result;
}

}  // namespace

Tensor entmax_rows(const Tensor& scores, double alpha,
                   const RowObserver* observer) {
  return entmax_rows_impl(scores, alpha, nullptr, observer);
}

Tensor entmax_rows(const Tensor& scores, const Tensor& alpha_pre,
                   const RowObserver* observer) {
  require(alpha_pre.size() == 1, "entmax_rows: alpha parameter must be scalar");
  return entmax_rows_impl(scores, alpha_from_pre(alpha_pre.item()), &alpha_pre,
                          observer);
}

// ---- dropout and losses ---------------------------------------------------

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const double keep = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = unit(rng) >= rate ? keep : 0.0;
    out[i] = x.data()[i] * (*mask)[i];
  }
  return make_result(x.shape(), std::move(out), {&x}, [mask](Node& self) {
    double* gx = grad_of(self, 0);
    for (std::size_t i = 0; i < mask->size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const int> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(),
          "softmax_cross_entropy: logits " + to_string(logits.shape()) +
              " for " + std::to_string(labels.size()) + " labels");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  std::vector<int> y(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (y[b] < 0 || static_cast<std::size_t>(y[b]) >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    const double* row = logits.data().data() + b * classes;
    const double top = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - top);
    const double lse = top + std::log(total);
    loss += lse - row[y[b]];
    for (std::size_t c = 0; c < classes; ++c) {
      (*probs)[b * classes + c] = std::exp(row[c] - lse);
    }
  }
  loss /= static_cast<double>(batch);
  return make_result({}, {loss}, {&logits},
                     [probs, y = std::move(y), batch, classes](Node& self) {
                       double* gl = grad_of(self, 0);
                       const double s = self.grad[0] / static_cast<double>(batch);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double target = static_cast<int>(c) == y[b] ? 1.0 : 0.0;
                           gl[b * classes + c] += s * ((*probs)[b * classes + c] - target);
                         }
                       }
                     });
}

Tensor mse_loss(const Tensor& predictions, std::span<const double> targets) {
  require(predictions.size() == targets.size() && !targets.empty(),
          "mse_loss: " + std::to_string(predictions.size()) +
              " predictions for " + std::to_string(targets.size()) +
              " targets");
  std::vector<double> t(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = predictions.data()[i] - t[i];
    loss += d * d;
  }
  const std::size_t n = t.size();
  loss /= static_cast<double>(n);
  return make_result({}, {loss}, {&predictions},
                     [t = std::move(t), n](Node& self) {
                       double* gp = grad_of(self, 0);
                       const double* pv = values_of(self, 0);
                       const double s = 2.0 * self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) gp[i] += s * (pv[i] - t[i]);
                     });
}

// ---- oracle ---------------------------------------------------------------

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> probe = base;
    probe[i] = base[i] + h;
    const double up = f(Tensor(x.shape(), probe));
    probe[i] = base[i] - h;
    const double down = f(Tensor(x.shape(), probe));
    out[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(out));
}

}  // namespace sparsehop
