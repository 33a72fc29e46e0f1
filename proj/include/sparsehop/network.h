// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// The bi-directional sparse Hopfield network for tabular rows.
//
//   rows -> embedding [B, N, P, D]
//        -> encoder: per level, merge r adjacent patches, then a module
//        -> decoder: learned positional queries [N, S, D] refined by modules
//           and cross-attending to every encoder level
//        -> flatten [B, N * S * D] -> MLP -> logits or a scalar
//
// A module is a column block (attention across the patch axis of each
// feature) followed by a row block (attention across features, compressed
// through C learnable prototypes per patch position).

#ifndef SPARSEHOP_NETWORK_H_
#define SPARSEHOP_NETWORK_H_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sparsehop/embedding.h"
#include "sparsehop/layers.h"
#include "sparsehop/nn.h"

namespace sparsehop {

enum class AlphaMode { kFixed, kLearnable };

struct NetworkConfig {
  EmbeddingConfig embedding;   // G, G_shared, L, D
  std::size_t pooling = 10;    // C
  std::size_t levels = 3;      // H
  std::size_t merge = 4;       // r
  std::size_t decoded = 24;    // S
  std::size_t d_ff = 256;
  std::size_t heads = 4;
  double dropout = 0.2;
  AlphaMode alpha_mode = AlphaMode::kLearnable;
  double alpha = 1.5;          // fixed value, or the starting value when learnable
  std::optional<double> beta;  // default 1 / sqrt(D / heads)
  std::size_t outputs = 2;     // class count, or 1 for regression

  void validate() const;
};

// Patch lengths of encoder levels 0..H: len_0 = P, len_h = ceil(len_{h-1} / r).
std::vector<std::size_t> encoder_lengths(std::size_t patches, std::size_t merge,
                                         std::size_t levels);

struct ModuleOptions {
  std::size_t d_model = 0;
  std::size_t length = 0;  // patch positions the prototypes cover
  std::size_t pooling = 1;
  std::size_t d_ff = 0;
  std::size_t heads = 1;
  double dropout = 0.0;
  AlphaMode alpha_mode = AlphaMode::kLearnable;
  double alpha = 1.5;
  std::optional<double> beta;
};

class BishopModule {
 public:
  BishopModule() = default;
  BishopModule(const ModuleOptions& options, std::mt19937_64& rng);

  // [B, N, len, D] -> [B, N, len, D]
  Tensor column_block(const Tensor& x, const ForwardContext& ctx) const;
  Tensor row_block(const Tensor& x, const ForwardContext& ctx) const;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const {
    return row_block(column_block(x, ctx), ctx);
  }

  void collect(ParamList& out, const std::string& prefix) const;

  GshWeights column_attention;
  FeedForward column_mlp;
  LayerNorm column_norm1, column_norm2;
  Tensor prototypes;  // [C, len, D]
  GshWeights pooling;
  GshWeights expand;
  FeedForward row_mlp;
  LayerNorm row_norm1, row_norm2;
  double dropout = 0.0;
};

struct DecoderLevel {
  BishopModule module;
  GshWeights cross;
  FeedForward mlp;
  LayerNorm norm1, norm2;
};

class BishopNetwork {
 public:
  BishopNetwork() = default;
  BishopNetwork(const NetworkConfig& config, const TabularSchema& schema,
                QuantileBins bins, std::mt19937_64& rng);

  const NetworkConfig& config() const { return config_; }
  std::size_t features() const { return features_; }

  // Logits [B, outputs].
  Tensor forward(const EncodedBatch& batch, const ForwardContext& ctx = {}) const;
  Tensor forward_patches(const Tensor& patches, const ForwardContext& ctx = {}) const;

  // X^enc,0 .. X^enc,H.
  std::vector<Tensor> encode_levels(const Tensor& patches, const ForwardContext& ctx) const;
  // [B, N, S, D]
  Tensor decode(const std::vector<Tensor>& levels, const ForwardContext& ctx) const;

  ParamList parameters() const;
  // Current alpha of every attention sub-layer, by parameter name.
  std::vector<std::pair<std::string, double>> alphas() const;

  TabularEmbedding embedding;
  std::vector<Linear> merges;          // H maps r * D -> D
  std::vector<BishopModule> encoder;   // H
  Tensor positional;                   // [N, S, D]
  BishopModule decoder_head;           // applied to the positional tensor
  std::vector<DecoderLevel> decoder;   // H
  Linear predictor_in, predictor_out;

 private:
  NetworkConfig config_;
  std::size_t features_ = 0;
};

}  // namespace sparsehop

#endif  // SPARSEHOP_NETWORK_H_
