// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Small parameterized building blocks shared by the attention layers and the
// network: linear maps, layer norm and the two-layer feed-forward block.

#ifndef SPARSEHOP_NN_H_
#define SPARSEHOP_NN_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sparsehop/tensor.h"

namespace sparsehop {

// Named parameter handles. Tensor copies share storage, so writing through a
// collected handle updates the owning module.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// Uniform(-bound, bound) leaf of the given shape, requiring grad.
Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng);

// Forward-pass switches shared by every module.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;           // required when training with dropout
  const RowObserver* observer = nullptr;    // sees every attention matrix
};

Tensor maybe_dropout(const Tensor& x, double rate, const ForwardContext& ctx);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gain;  // ones
  Tensor bias;  // zeros

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// Linear -> ReLU -> dropout -> Linear.
struct FeedForward {
  Linear in;
  Linear out;
  double dropout = 0.0;

  FeedForward() = default;
  FeedForward(std::size_t dim, std::size_t hidden, double dropout,
              std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(ParamList& params, const std::string& prefix) const;
};

}  // namespace sparsehop

#endif  // SPARSEHOP_NN_H_
