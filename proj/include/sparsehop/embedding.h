// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Tabular feature embedding. Numerical columns get a piecewise-linear
// encoding over training quantiles; categorical columns get a shared
// per-feature vector concatenated with a per-category vector. The resulting
// N x G cell matrix is cut into P = ceil(G / L) patches of length L, each
// projected to D model channels.
//
// Feature order everywhere is numerical columns first, then categorical
// columns, each in schema order.

#ifndef SPARSEHOP_EMBEDDING_H_
#define SPARSEHOP_EMBEDDING_H_

#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparsehop/nn.h"
#include "sparsehop/tensor.h"

namespace sparsehop {

enum class ColumnKind { kNumerical, kCategorical };

ColumnKind parse_column_kind(const std::string& name);
std::string column_kind_name(ColumnKind kind);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumerical;
};

// Feature columns stored column-major, split by kind in schema order.
struct TabularData {
  std::vector<ColumnSpec> columns;
  std::vector<std::vector<double>> numerical;         // [N_num][rows]
  std::vector<std::vector<std::string>> categorical;  // [N_cat][rows]

  std::size_t rows() const;
  TabularData select(std::span<const std::size_t> rows) const;
};

struct TabularSchema {
  std::vector<ColumnSpec> columns;
  std::vector<std::string> numerical_names;
  std::vector<std::string> categorical_names;
  // Known values per categorical feature, indexed from 1; 0 is the unknown slot.
  std::vector<std::map<std::string, std::size_t>> vocabularies;

  std::size_t n_num() const { return numerical_names.size(); }
  std::size_t n_cat() const { return categorical_names.size(); }
  std::size_t n() const { return n_num() + n_cat(); }
  std::size_t vocab_size(std::size_t feature) const;
  std::size_t lookup(std::size_t feature, const std::string& value) const;
};

// Validates unique names and at least one column; vocabularies come from
// the given (training) rows only.
TabularSchema fit_schema(const TabularData& train);

struct QuantileBins {
  std::size_t g = 0;
  std::vector<std::vector<double>> boundaries;  // [N_num][g + 1]
};

// Empirical quantiles at fractions k / g, k = 0..g, interpolating linearly
// between order statistics.
std::vector<double> quantile_boundaries(std::vector<double> values, std::size_t g);

QuantileBins fit_bins(const TabularData& train, std::size_t g);

// Piecewise-linear encoding of x against boundaries b_0..b_g. Zero-width
// bins give 0 and interior ratios are clamped to [0, 1].
std::vector<double> ple_encode(double x, std::span<const double> boundaries);

// Row-major model input: raw numerical values and vocabulary indices.
struct EncodedBatch {
  std::size_t rows = 0;
  std::vector<double> numerical;         // [rows][N_num]
  std::vector<std::size_t> categorical;  // [rows][N_cat]

  EncodedBatch select(std::span<const std::size_t> rows) const;
};

// Throws std::invalid_argument when the column set does not match the
// schema or a numerical cell is not finite.
EncodedBatch encode(const TabularData& data, const TabularSchema& schema);

struct EmbeddingConfig {
  std::size_t g = 32;
  std::size_t g_shared = 8;
  std::size_t patch = 8;  // L
  std::size_t d_model = 512;

  std::size_t patches() const { return (g + patch - 1) / patch; }
  void validate() const;
};

class TabularEmbedding {
 public:
  TabularEmbedding() = default;
  TabularEmbedding(const EmbeddingConfig& config, const TabularSchema& schema,
                   QuantileBins bins, std::mt19937_64& rng);

  const EmbeddingConfig& config() const { return config_; }
  const QuantileBins& bins() const { return bins_; }
  QuantileBins& mutable_bins() { return bins_; }

  // [B, N_num, G] constant piecewise-linear block (no parameters).
  Tensor numerical_embedding(const EncodedBatch& batch) const;
  // [B, N_cat, G]: shared row of feature i next to the category row.
  Tensor categorical_embedding(const EncodedBatch& batch) const;
  // [B, N, G]
  Tensor embed(const EncodedBatch& batch) const;
  // [B, N, G] -> [B, N, P, D]
  Tensor patch_embed(const Tensor& cells) const;
  Tensor forward(const EncodedBatch& batch) const { return patch_embed(embed(batch)); }

  void collect(ParamList& out, const std::string& prefix) const;

  Tensor shared;      // [N_cat, G_shared]
  Tensor individual;  // [sum of vocab sizes, G - G_shared]; feature i starts at offsets[i]
  std::vector<std::size_t> offsets;
  Linear projection;  // L -> D, shared over patches and features

 private:
  EmbeddingConfig config_;
  QuantileBins bins_;
  std::size_t n_num_ = 0;
  std::size_t n_cat_ = 0;
};

}  // namespace sparsehop

#endif  // SPARSEHOP_EMBEDDING_H_
