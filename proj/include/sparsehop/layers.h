// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Sparse Hopfield attention layers. One retrieval step of the associative
// memory, with queries R W_Q, keys Y W_K and values Y W_K W_V:
//
//   GSH(R, Y) = entmax_alpha(beta R W_Q W_K^T Y^T) Y W_K W_V
//
// Three configurations share this core: self/cross attention (gsh_forward),
// pooling against static learnable prototypes with W_Q = I
// (gsh_pooling_forward) and attention against learnable stored patterns
// (gsh_layer_forward). Inputs are [n, D] or batched [G, n, D].

#ifndef SPARSEHOP_LAYERS_H_
#define SPARSEHOP_LAYERS_H_

#include <optional>
#include <random>
#include <string>

#include "sparsehop/nn.h"
#include "sparsehop/tensor.h"

namespace sparsehop {

struct GshOptions {
  std::size_t d_in = 0;
  std::size_t d_k = 0;
  std::size_t d_v = 0;
  std::size_t heads = 1;
  std::optional<double> beta;   // defaults to 1 / sqrt(d_k / heads)
  bool learnable_alpha = true;  // alpha = 1 + sigmoid(a), a starts at pre(alpha)
  double alpha = 1.5;
  double dropout = 0.0;         // on the attention output
  bool query_projection = true; // false pins W_Q to the identity
};

struct GshWeights {
  Tensor w_q;        // [d_in, d_k]; undefined means identity
  Tensor w_k;        // [d_in, d_k]
  Tensor w_v;        // [d_k, d_v]
  Tensor alpha_pre;  // one element; undefined means fixed_alpha
  double fixed_alpha = 1.5;
  std::size_t heads = 1;
  double beta = 1.0;
  double dropout = 0.0;

  static GshWeights init(const GshOptions& options, std::mt19937_64& rng);
  // W_Q = W_K = W_V = I_d with fixed alpha: the plain retrieval step.
  static GshWeights identity(std::size_t d, double alpha, double beta);

  double alpha() const;
  std::size_t key_dim() const { return w_k.dim(1); }
  std::size_t value_dim() const { return w_v.dim(1); }
  void validate() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

Tensor gsh_forward(const Tensor& r, const Tensor& y, const GshWeights& w,
                   const ForwardContext& ctx = {});

// prototypes: [C, d_k] shared across the batch, or [G, C, d_k].
Tensor gsh_pooling_forward(const Tensor& prototypes, const Tensor& y,
                           const GshWeights& w, const ForwardContext& ctx = {});

// stored_k: [S, d_k] and stored_v: [S, d_v] replace Y W_K and Y W_K W_V.
Tensor gsh_layer_forward(const Tensor& r, const Tensor& stored_k,
                         const Tensor& stored_v, const GshWeights& w,
                         const ForwardContext& ctx = {});

// Multi-head core on projected operands: q [G, nq, d_k], k [G, nk, d_k],
// v [G, nk, d_v] -> [G, nq, d_v].
Tensor multihead_entmax_attention(const Tensor& q, const Tensor& k,
                                  const Tensor& v, const GshWeights& w,
                                  const ForwardContext& ctx = {});

}  // namespace sparsehop

#endif  // SPARSEHOP_LAYERS_H_
