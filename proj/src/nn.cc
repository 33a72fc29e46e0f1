// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/nn.h"

#include <cmath>
#include <stdexcept>

namespace sparsehop {

Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor maybe_dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (!ctx.rng) throw std::invalid_argument("dropout: training needs an rng");
  return dropout(x, rate, *ctx.rng);
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = uniform_param({in, out}, bound, rng);
  bias = uniform_param({out}, bound, rng);
}

Tensor Linear::forward(const Tensor& x) const {
  return add_bias(matmul(x, weight), bias);
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(std::size_t dim)
    : gain(Tensor::full({dim}, 1.0, true)), bias(Tensor::zeros({dim}, true)) {}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

FeedForward::FeedForward(std::size_t dim, std::size_t hidden, double dropout_rate,
                         std::mt19937_64& rng)
    : in(dim, hidden, rng), out(hidden, dim, rng), dropout(dropout_rate) {}

Tensor FeedForward::forward(const Tensor& x, const ForwardContext& ctx) const {
  return out.forward(maybe_dropout(relu(in.forward(x)), dropout, ctx));
}

void FeedForward::collect(ParamList& params, const std::string& prefix) const {
  in.collect(params, prefix + ".in");
  out.collect(params, prefix + ".out");
}

}  // namespace sparsehop
