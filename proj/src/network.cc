// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/network.h"

#include <cmath>
#include <stdexcept>

#include "sparsehop/entmax.h"

namespace sparsehop {
namespace {

GshWeights attention(std::size_t d, std::size_t heads, bool query_projection,
                     const ModuleOptions& o, std::mt19937_64& rng) {
  GshOptions g;
  g.d_in = g.d_k = g.d_v = d;
  g.heads = heads;
  g.beta = o.beta;
  g.learnable_alpha = o.alpha_mode == AlphaMode::kLearnable;
  g.alpha = o.alpha;
  g.dropout = o.dropout;
  g.query_projection = query_projection;
  return GshWeights::init(g, rng);
}

void check_rank4(const Tensor& x, const char* what) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected [B, N, len, D], got " +
                     to_string(x.shape()));
  }
}

// [1, ...] -> [b, ...]
Tensor broadcast_batch(const Tensor& x, std::size_t b) {
  if (x.dim(0) == b) return x;
  Shape inner(x.shape().begin() + 1, x.shape().end());
  return repeat(reshape(x, inner), b);
}

}  // namespace

void NetworkConfig::validate() const {
  embedding.validate();
  if (pooling == 0 || levels == 0 || merge == 0 || decoded == 0 || d_ff == 0 ||
      heads == 0 || outputs == 0) {
    throw std::invalid_argument("network: C, H, r, S, D_ff, heads and outputs must be positive");
  }
  if (embedding.d_model % heads != 0) {
    throw std::invalid_argument("network: heads must divide D");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("network: dropout outside [0, 1)");
  }
  if (alpha_mode == AlphaMode::kLearnable && !(alpha > 1.0 && alpha < 2.0)) {
    throw std::invalid_argument("network: learnable alpha must start inside (1, 2)");
  }
  if (!(alpha >= 1.0 && alpha <= 2.0)) throw std::invalid_argument("network: alpha outside [1, 2]");
  if (beta && !(*beta > 0.0)) throw std::invalid_argument("network: beta must be > 0");
}

std::vector<std::size_t> encoder_lengths(std::size_t patches, std::size_t merge,
                                         std::size_t levels) {
  if (patches == 0 || merge == 0) throw std::invalid_argument("encoder: P and r must be positive");
  std::vector<std::size_t> len{patches};
  for (std::size_t h = 0; h < levels; ++h) len.push_back((len.back() + merge - 1) / merge);
  return len;
}

BishopModule::BishopModule(const ModuleOptions& o, std::mt19937_64& rng)
    : column_attention(attention(o.d_model, o.heads, true, o, rng)),
      column_mlp(o.d_model, o.d_ff, o.dropout, rng),
      column_norm1(o.d_model),
      column_norm2(o.d_model),
      prototypes(uniform_param({o.pooling, o.length, o.d_model},
                               1.0 / std::sqrt(static_cast<double>(o.d_model)), rng)),
      pooling(attention(o.d_model, o.heads, false, o, rng)),
      expand(attention(o.d_model, o.heads, true, o, rng)),
      row_mlp(o.d_model, o.d_ff, o.dropout, rng),
      row_norm1(o.d_model),
      row_norm2(o.d_model),
      dropout(o.dropout) {}

Tensor BishopModule::column_block(const Tensor& x, const ForwardContext& ctx) const {
  check_rank4(x, "column block");
  const std::size_t b = x.dim(0), n = x.dim(1), len = x.dim(2), d = x.dim(3);
  const Tensor tokens = reshape(x, {b * n, len, d});
  const Tensor attended = gsh_forward(tokens, tokens, column_attention, ctx);
  const Tensor mid = column_norm1.forward(add(tokens, attended));
  const Tensor out = column_norm2.forward(add(mid, column_mlp.forward(mid, ctx)));
  return reshape(out, {b, n, len, d});
}

Tensor BishopModule::row_block(const Tensor& x, const ForwardContext& ctx) const {
  check_rank4(x, "row block");
  const std::size_t b = x.dim(0), n = x.dim(1), len = x.dim(2), d = x.dim(3);
  if (len != prototypes.dim(1) || d != prototypes.dim(2)) {
    throw ShapeError("row block: input " + to_string(x.shape()) +
                     " does not match prototypes " + to_string(prototypes.shape()));
  }
  const std::size_t c = prototypes.dim(0);
  // One attention problem per (row, patch position) across the N features.
  const Tensor rows = reshape(permute(x, {0, 2, 1, 3}), {b * len, n, d});
  const Tensor queries =
      reshape(repeat(permute(prototypes, {1, 0, 2}), b), {b * len, c, d});
  const Tensor pooled = gsh_pooling_forward(queries, rows, pooling, ctx);
  const Tensor expanded = gsh_forward(rows, pooled, expand, ctx);
  const Tensor mid = row_norm1.forward(add(expanded, rows));
  const Tensor out = row_norm2.forward(add(mid, row_mlp.forward(mid, ctx)));
  return permute(reshape(out, {b, len, n, d}), {0, 2, 1, 3});
}

void BishopModule::collect(ParamList& out, const std::string& prefix) const {
  column_attention.collect(out, prefix + ".column.attention");
  column_mlp.collect(out, prefix + ".column.mlp");
  column_norm1.collect(out, prefix + ".column.norm1");
  column_norm2.collect(out, prefix + ".column.norm2");
  out.emplace_back(prefix + ".row.prototypes", prototypes);
  pooling.collect(out, prefix + ".row.pooling");
  expand.collect(out, prefix + ".row.expand");
  row_mlp.collect(out, prefix + ".row.mlp");
  row_norm1.collect(out, prefix + ".row.norm1");
  row_norm2.collect(out, prefix + ".row.norm2");
}

BishopNetwork::BishopNetwork(const NetworkConfig& config, const TabularSchema& schema,
                             QuantileBins bins, std::mt19937_64& rng)
    : config_(config), features_(schema.n()) {
  config_.validate();
  embedding = TabularEmbedding(config_.embedding, schema, std::move(bins), rng);
  const std::size_t d = config_.embedding.d_model;
  ModuleOptions mo;
  mo.d_model = d;
  mo.pooling = config_.pooling;
  mo.d_ff = config_.d_ff;
  mo.heads = config_.heads;
  mo.dropout = config_.dropout;
  mo.alpha_mode = config_.alpha_mode;
  mo.alpha = config_.alpha;
  mo.beta = config_.beta;

  const auto lengths =
      encoder_lengths(config_.embedding.patches(), config_.merge, config_.levels);
  for (std::size_t h = 1; h <= config_.levels; ++h) {
    merges.emplace_back(config_.merge * d, d, rng);
    mo.length = lengths[h];
    encoder.emplace_back(mo, rng);
  }
  const std::size_t s = config_.decoded;
  positional = uniform_param({features_, s, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  mo.length = s;
  decoder_head = BishopModule(mo, rng);
  for (std::size_t h = 1; h <= config_.levels; ++h) {
    DecoderLevel level;
    level.module = BishopModule(mo, rng);
    level.cross = attention(d, config_.heads, true, mo, rng);
    level.mlp = FeedForward(d, config_.d_ff, config_.dropout, rng);
    level.norm1 = LayerNorm(d);
    level.norm2 = LayerNorm(d);
    decoder.push_back(std::move(level));
  }
  predictor_in = Linear(features_ * s * d, config_.d_ff, rng);
  predictor_out = Linear(config_.d_ff, config_.outputs, rng);
}

std::vector<Tensor> BishopNetwork::encode_levels(const Tensor& patches,
                                                 const ForwardContext& ctx) const {
  check_rank4(patches, "encoder");
  std::vector<Tensor> levels{patches};
  const std::size_t r = config_.merge;
  for (std::size_t h = 0; h < encoder.size(); ++h) {
    const Tensor& x = levels.back();
    const std::size_t b = x.dim(0), n = x.dim(1), len = x.dim(2), d = x.dim(3);
    const std::size_t merged = (len + r - 1) / r;
    const Tensor padded = merged * r == len ? x : pad_to(x, 2, merged * r);
    const Tensor coarse = merges[h].forward(reshape(padded, {b, n, merged, r * d}));
    levels.push_back(encoder[h].forward(coarse, ctx));
  }
  return levels;
}

Tensor BishopNetwork::decode(const std::vector<Tensor>& levels,
                             const ForwardContext& ctx) const {
  if (levels.size() != decoder.size() + 1) {
    throw std::invalid_argument("decoder: expected " + std::to_string(decoder.size() + 1) +
                                " encoder levels, got " + std::to_string(levels.size()));
  }
  const std::size_t n = positional.dim(0), s = positional.dim(1), d = positional.dim(2);
  // The positional path does not depend on the input, so it runs once at
  // batch size 1 until it first meets encoder output.
  Tensor state = decoder_head.forward(reshape(positional, {1, n, s, d}), ctx);
  for (std::size_t h = 0; h < decoder.size(); ++h) {
    const DecoderLevel& level = decoder[h];
    const Tensor& enc = levels[h + 1];
    const std::size_t b = enc.dim(0), len = enc.dim(2);
    if (enc.dim(1) != n || enc.dim(3) != d) {
      throw ShapeError("decoder: encoder level " + to_string(enc.shape()) +
                       " does not match the positional tensor");
    }
    const Tensor pos = broadcast_batch(level.module.forward(state, ctx), b);
    const Tensor queries = reshape(pos, {b * n, s, d});
    const Tensor attended =
        gsh_forward(queries, reshape(enc, {b * n, len, d}), level.cross, ctx);
    const Tensor mid = level.norm1.forward(add(attended, queries));
    const Tensor out = level.norm2.forward(add(mid, level.mlp.forward(mid, ctx)));
    state = reshape(out, {b, n, s, d});
  }
  return state;
}

Tensor BishopNetwork::forward_patches(const Tensor& patches,
                                      const ForwardContext& ctx) const {
  const Tensor decoded = decode(encode_levels(patches, ctx), ctx);
  const Tensor hidden = maybe_dropout(relu(predictor_in.forward(flatten(decoded, 1))),
                                      config_.dropout, ctx);
  return predictor_out.forward(hidden);
}

Tensor BishopNetwork::forward(const EncodedBatch& batch, const ForwardContext& ctx) const {
  return forward_patches(embedding.forward(batch), ctx);
}

ParamList BishopNetwork::parameters() const {
  ParamList out;
  embedding.collect(out, "embedding");
  for (std::size_t h = 0; h < encoder.size(); ++h) {
    const std::string level = "encoder." + std::to_string(h + 1);
    merges[h].collect(out, level + ".merge");
    encoder[h].collect(out, level + ".module");
  }
  out.emplace_back("decoder.positional", positional);
  decoder_head.collect(out, "decoder.0.module");
  for (std::size_t h = 0; h < decoder.size(); ++h) {
    const std::string level = "decoder." + std::to_string(h + 1);
    decoder[h].module.collect(out, level + ".module");
    decoder[h].cross.collect(out, level + ".cross");
    decoder[h].mlp.collect(out, level + ".mlp");
    decoder[h].norm1.collect(out, level + ".norm1");
    decoder[h].norm2.collect(out, level + ".norm2");
  }
  predictor_in.collect(out, "predictor.in");
  predictor_out.collect(out, "predictor.out");
  return out;
}

std::vector<std::pair<std::string, double>> BishopNetwork::alphas() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, t] : parameters()) {
    if (name.size() > 10 && name.ends_with(".alpha_pre")) {
      out.emplace_back(name.substr(0, name.size() - 10), alpha_from_pre(t.item()));
    }
  }
  return out;
}

}  // namespace sparsehop
