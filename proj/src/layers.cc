// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/layers.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sparsehop/entmax.h"

namespace sparsehop {
namespace {

Tensor identity_matrix(std::size_t d) {
  Tensor eye = Tensor::zeros({d, d});
  auto data = eye.mutable_data();
  for (std::size_t i = 0; i < d; ++i) data[i * d + i] = 1.0;
  return eye;
}

// [n, D] -> [1, n, D]; batched inputs pass through.
Tensor as_batched(const Tensor& x, const char* what) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return reshape(x, {1, x.dim(0), x.dim(1)});
  throw ShapeError(std::string("gsh: ") + what + " must be [n, D] or [G, n, D], got " +
                   to_string(x.shape()));
}

Tensor unbatch_like(const Tensor& out, const Tensor& like) {
  if (like.rank() == 3) return out;
  return reshape(out, {out.dim(1), out.dim(2)});
}

// [G, n, H * dh] -> [G * H, n, dh]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  if (heads == 1) return x;
  const std::size_t g = x.dim(0), n = x.dim(1), dh = x.dim(2) / heads;
  return reshape(permute(reshape(x, {g, n, heads, dh}), {0, 2, 1, 3}),
                 {g * heads, n, dh});
}

Tensor merge_heads(const Tensor& x, std::size_t heads) {
  if (heads == 1) return x;
  const std::size_t g = x.dim(0) / heads, n = x.dim(1), dh = x.dim(2);
  return reshape(permute(reshape(x, {g, heads, n, dh}), {0, 2, 1, 3}),
                 {g, n, heads * dh});
}

}  // namespace

GshWeights GshWeights::init(const GshOptions& o, std::mt19937_64& rng) {
  if (o.d_in == 0 || o.d_k == 0 || o.d_v == 0 || o.heads == 0) {
    throw std::invalid_argument("gsh: dimensions and head count must be positive");
  }
  GshWeights w;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(o.d_in));
  if (o.query_projection) w.w_q = uniform_param({o.d_in, o.d_k}, in_bound, rng);
  w.w_k = uniform_param({o.d_in, o.d_k}, in_bound, rng);
  w.w_v = uniform_param({o.d_k, o.d_v}, 1.0 / std::sqrt(static_cast<double>(o.d_k)), rng);
  w.heads = o.heads;
  w.beta = o.beta.value_or(
      1.0 / std::sqrt(static_cast<double>(o.d_k) / static_cast<double>(o.heads)));
  w.fixed_alpha = o.alpha;
  if (o.learnable_alpha) w.alpha_pre = Tensor::scalar(pre_from_alpha(o.alpha), true);
  w.dropout = o.dropout;
  w.validate();
  return w;
}

GshWeights GshWeights::identity(std::size_t d, double alpha, double beta) {
  GshWeights w;
  w.w_q = identity_matrix(d);
  w.w_k = identity_matrix(d);
  w.w_v = identity_matrix(d);
  w.fixed_alpha = alpha;
  w.beta = beta;
  w.validate();
  return w;
}

double GshWeights::alpha() const {
  return alpha_pre.defined() ? alpha_from_pre(alpha_pre.item()) : fixed_alpha;
}

void GshWeights::validate() const {
  if (!w_k.defined() || !w_v.defined() || w_k.rank() != 2 || w_v.rank() != 2) {
    throw ShapeError("gsh: W_K and W_V must be matrices");
  }
  if (w_v.dim(0) != w_k.dim(1)) {
    throw ShapeError("gsh: W_V rows must match the key dimension");
  }
  if (w_q.defined() && w_q.shape() != w_k.shape()) {
    throw ShapeError("gsh: W_Q and W_K shapes differ");
  }
  if (heads == 0 || key_dim() % heads != 0 || value_dim() % heads != 0) {
    throw std::invalid_argument("gsh: heads must divide the key and value width");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("gsh: beta must be > 0");
  const double a = alpha();
  if (!(a >= 1.0 && a <= 2.0)) throw std::invalid_argument("gsh: alpha outside [1, 2]");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("gsh: dropout outside [0, 1)");
  }
}

void GshWeights::collect(ParamList& out, const std::string& prefix) const {
  if (w_q.defined() && w_q.requires_grad()) out.emplace_back(prefix + ".w_q", w_q);
  if (w_k.requires_grad()) out.emplace_back(prefix + ".w_k", w_k);
  if (w_v.requires_grad()) out.emplace_back(prefix + ".w_v", w_v);
  if (alpha_pre.defined()) out.emplace_back(prefix + ".alpha_pre", alpha_pre);
}

Tensor multihead_entmax_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                  const GshWeights& w, const ForwardContext& ctx) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3 || q.dim(0) != k.dim(0) ||
      k.dim(0) != v.dim(0) || k.dim(1) != v.dim(1) || q.dim(2) != k.dim(2)) {
    throw ShapeError("gsh: attention operands " + to_string(q.shape()) + ", " +
                     to_string(k.shape()) + ", " + to_string(v.shape()) +
                     " do not agree");
  }
  if (q.dim(2) % w.heads != 0 || v.dim(2) % w.heads != 0) {
    throw std::invalid_argument("gsh: heads must divide the key and value width");
  }
  const Tensor scores = scale(bmm(split_heads(q, w.heads), split_heads(k, w.heads), true), w.beta);
  const Tensor probs = w.alpha_pre.defined()
                           ? entmax_rows(scores, w.alpha_pre, ctx.observer)
                           : entmax_rows(scores, w.fixed_alpha, ctx.observer);
  const Tensor out = merge_heads(bmm(probs, split_heads(v, w.heads)), w.heads);
  return maybe_dropout(out, w.dropout, ctx);
}

Tensor gsh_forward(const Tensor& r, const Tensor& y, const GshWeights& w,
                   const ForwardContext& ctx) {
  const Tensor rb = as_batched(r, "queries");
  const Tensor yb = as_batched(y, "memory");
  if (rb.dim(0) != yb.dim(0)) throw ShapeError("gsh: query and memory batch differ");
  const Tensor q = w.w_q.defined() ? matmul(rb, w.w_q) : rb;
  const Tensor k = matmul(yb, w.w_k);
  const Tensor v = matmul(k, w.w_v);
  return unbatch_like(multihead_entmax_attention(q, k, v, w, ctx), r);
}

Tensor gsh_pooling_forward(const Tensor& prototypes, const Tensor& y,
                           const GshWeights& w, const ForwardContext& ctx) {
  const Tensor yb = as_batched(y, "memory");
  Tensor q = prototypes;
  if (prototypes.rank() == 2) {
    q = repeat(prototypes, yb.dim(0));
  } else if (prototypes.rank() != 3 || prototypes.dim(0) != yb.dim(0)) {
    throw ShapeError("gsh pooling: prototypes " + to_string(prototypes.shape()) +
                     " do not match memory " + to_string(yb.shape()));
  }
  const Tensor k = matmul(yb, w.w_k);
  const Tensor v = matmul(k, w.w_v);
  return unbatch_like(multihead_entmax_attention(q, k, v, w, ctx), y);
}

Tensor gsh_layer_forward(const Tensor& r, const Tensor& stored_k,
                         const Tensor& stored_v, const GshWeights& w,
                         const ForwardContext& ctx) {
  const Tensor rb = as_batched(r, "queries");
  if (stored_k.rank() != 2 || stored_v.rank() != 2 || stored_k.dim(0) != stored_v.dim(0)) {
    throw ShapeError("gsh layer: stored patterns must be [S, d_k] and [S, d_v]");
  }
  const Tensor q = w.w_q.defined() ? matmul(rb, w.w_q) : rb;
  const std::size_t g = rb.dim(0);
  return unbatch_like(
      multihead_entmax_attention(q, repeat(stored_k, g), repeat(stored_v, g), w, ctx), r);
}

}  // namespace sparsehop
