// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/embedding.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sparsehop {

ColumnKind parse_column_kind(const std::string& name) {
  if (name == "numerical" || name == "numeric") return ColumnKind::kNumerical;
  if (name == "categorical") return ColumnKind::kCategorical;
  throw std::invalid_argument("unknown column kind '" + name + "'");
}

std::string column_kind_name(ColumnKind kind) {
  return kind == ColumnKind::kNumerical ? "numerical" : "categorical";
}

std::size_t TabularData::rows() const {
  if (!numerical.empty()) return numerical.front().size();
  if (!categorical.empty()) return categorical.front().size();
  return 0;
}

TabularData TabularData::select(std::span<const std::size_t> rows) const {
  TabularData out;
  out.columns = columns;
  for (const auto& col : numerical) {
    auto& dst = out.numerical.emplace_back();
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(col.at(r));
  }
  for (const auto& col : categorical) {
    auto& dst = out.categorical.emplace_back();
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(col.at(r));
  }
  return out;
}

std::size_t TabularSchema::vocab_size(std::size_t feature) const {
  return vocabularies.at(feature).size() + 1;
}

std::size_t TabularSchema::lookup(std::size_t feature, const std::string& value) const {
  const auto& vocab = vocabularies.at(feature);
  const auto it = vocab.find(value);
  return it == vocab.end() ? 0 : it->second;
}

TabularSchema fit_schema(const TabularData& train) {
  if (train.columns.empty()) throw std::invalid_argument("schema: no feature columns");
  if (train.rows() == 0) throw std::invalid_argument("schema: empty training set");
  TabularSchema schema;
  schema.columns = train.columns;
  std::set<std::string> seen;
  for (const ColumnSpec& c : train.columns) {
    if (!seen.insert(c.name).second) {
      throw std::invalid_argument("schema: duplicate column '" + c.name + "'");
    }
    (c.kind == ColumnKind::kNumerical ? schema.numerical_names
                                      : schema.categorical_names)
        .push_back(c.name);
  }
  if (train.numerical.size() != schema.n_num() ||
      train.categorical.size() != schema.n_cat()) {
    throw std::invalid_argument("schema: column data does not match the column list");
  }
  for (const auto& col : train.categorical) {
    const std::set<std::string> values(col.begin(), col.end());
    auto& vocab = schema.vocabularies.emplace_back();
    std::size_t next = 1;
    for (const std::string& v : values) vocab[v] = next++;
  }
  return schema;
}

std::vector<double> quantile_boundaries(std::vector<double> values, std::size_t g) {
  if (values.empty()) throw std::invalid_argument("quantiles: empty column");
  if (g == 0) throw std::invalid_argument("quantiles: need at least one bin");
  std::sort(values.begin(), values.end());
  const double last = static_cast<double>(values.size() - 1);
  std::vector<double> b(g + 1);
  for (std::size_t k = 0; k <= g; ++k) {
    const double pos = last * static_cast<double>(k) / static_cast<double>(g);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    b[k] = frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
  }
  return b;
}

QuantileBins fit_bins(const TabularData& train, std::size_t g) {
  QuantileBins bins;
  bins.g = g;
  for (const auto& col : train.numerical) {
    for (double v : col) {
      if (!std::isfinite(v)) throw std::invalid_argument("bins: non-finite training value");
    }
    bins.boundaries.push_back(quantile_boundaries(col, g));
  }
  return bins;
}

std::vector<double> ple_encode(double x, std::span<const double> b) {
  if (!std::isfinite(x)) throw std::invalid_argument("ple: non-finite value");
  if (b.size() < 2) throw std::invalid_argument("ple: need at least two boundaries");
  const std::size_t g = b.size() - 1;
  std::vector<double> e(g, 0.0);
  // Coordinate k covers the bin [b_k, b_{k+1}].
  for (std::size_t k = 0; k < g; ++k) {
    const double lo = b[k], hi = b[k + 1];
    if (hi - lo <= 0.0) continue;
    if (k > 0 && x < lo) continue;
    if (k + 1 < g && x >= hi) {
      e[k] = 1.0;
      continue;
    }
    e[k] = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  }
  return e;
}

EncodedBatch EncodedBatch::select(std::span<const std::size_t> picked) const {
  EncodedBatch out;
  out.rows = picked.size();
  const std::size_t nn = rows ? numerical.size() / rows : 0;
  const std::size_t nc = rows ? categorical.size() / rows : 0;
  for (std::size_t r : picked) {
    if (r >= rows) throw std::out_of_range("batch: row index out of range");
    out.numerical.insert(out.numerical.end(), numerical.begin() + r * nn,
                         numerical.begin() + (r + 1) * nn);
    out.categorical.insert(out.categorical.end(), categorical.begin() + r * nc,
                           categorical.begin() + (r + 1) * nc);
  }
  return out;
}

EncodedBatch encode(const TabularData& data, const TabularSchema& schema) {
  if (data.numerical.size() != schema.n_num() ||
      data.categorical.size() != schema.n_cat()) {
    throw std::invalid_argument("encode: data has " +
                                std::to_string(data.numerical.size()) + " numerical and " +
                                std::to_string(data.categorical.size()) +
                                " categorical columns, schema expects " +
                                std::to_string(schema.n_num()) + " and " +
                                std::to_string(schema.n_cat()));
  }
  const bool same_columns = std::equal(
      data.columns.begin(), data.columns.end(), schema.columns.begin(),
      schema.columns.end(), [](const ColumnSpec& a, const ColumnSpec& b) {
        return a.name == b.name && a.kind == b.kind;
      });
  if (!same_columns) throw std::invalid_argument("encode: columns do not match the schema");
  EncodedBatch batch;
  batch.rows = data.rows();
  batch.numerical.resize(batch.rows * schema.n_num());
  batch.categorical.resize(batch.rows * schema.n_cat());
  for (std::size_t j = 0; j < schema.n_num(); ++j) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      const double v = data.numerical[j].at(r);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("encode: non-finite value in column '" +
                                    schema.numerical_names[j] + "', row " +
                                    std::to_string(r));
      }
      batch.numerical[r * schema.n_num() + j] = v;
    }
  }
  for (std::size_t i = 0; i < schema.n_cat(); ++i) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      batch.categorical[r * schema.n_cat() + i] = schema.lookup(i, data.categorical[i].at(r));
    }
  }
  return batch;
}

void EmbeddingConfig::validate() const {
  if (g == 0 || patch == 0 || d_model == 0) {
    throw std::invalid_argument("embedding: G, L and D must be positive");
  }
  if (g_shared >= g) throw std::invalid_argument("embedding: G_shared must be < G");
}

TabularEmbedding::TabularEmbedding(const EmbeddingConfig& config,
                                   const TabularSchema& schema, QuantileBins bins,
                                   std::mt19937_64& rng)
    : config_(config), bins_(std::move(bins)), n_num_(schema.n_num()),
      n_cat_(schema.n_cat()) {
  config_.validate();
  if (schema.n() == 0) throw std::invalid_argument("embedding: no features");
  if (bins_.g != config_.g || bins_.boundaries.size() != n_num_) {
    throw std::invalid_argument("embedding: bins do not match the config");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.g));
  std::size_t total = 0;
  for (std::size_t i = 0; i < n_cat_; ++i) {
    offsets.push_back(total);
    total += schema.vocab_size(i);
  }
  if (n_cat_ > 0) {
    if (config_.g_shared > 0) shared = uniform_param({n_cat_, config_.g_shared}, bound, rng);
    individual = uniform_param({total, config_.g - config_.g_shared}, bound, rng);
  }
  projection = Linear(config_.patch, config_.d_model, rng);
}

Tensor TabularEmbedding::numerical_embedding(const EncodedBatch& batch) const {
  const std::size_t g = config_.g;
  std::vector<double> cells(batch.rows * n_num_ * g);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t j = 0; j < n_num_; ++j) {
      const auto e = ple_encode(batch.numerical[r * n_num_ + j], bins_.boundaries[j]);
      std::copy(e.begin(), e.end(), cells.begin() + (r * n_num_ + j) * g);
    }
  }
  return Tensor({batch.rows, n_num_, g}, std::move(cells));
}

Tensor TabularEmbedding::categorical_embedding(const EncodedBatch& batch) const {
  std::vector<std::size_t> idx(batch.rows * n_cat_);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t i = 0; i < n_cat_; ++i) {
      const std::size_t v = batch.categorical[r * n_cat_ + i];
      const std::size_t limit =
          (i + 1 < n_cat_ ? offsets[i + 1] : individual.dim(0)) - offsets[i];
      // Indices beyond the fitted vocabulary fall back to the unknown slot.
      idx[r * n_cat_ + i] = offsets[i] + (v < limit ? v : 0);
    }
  }
  const std::size_t g_ind = config_.g - config_.g_shared;
  const Tensor own = reshape(gather_rows(individual, idx), {batch.rows, n_cat_, g_ind});
  if (config_.g_shared == 0) return own;
  return concat({repeat(shared, batch.rows), own}, 2);
}

Tensor TabularEmbedding::embed(const EncodedBatch& batch) const {
  if (batch.numerical.size() != batch.rows * n_num_ ||
      batch.categorical.size() != batch.rows * n_cat_) {
    throw std::invalid_argument("embedding: batch does not match the schema");
  }
  if (n_cat_ == 0) return numerical_embedding(batch);
  if (n_num_ == 0) return categorical_embedding(batch);
  return concat({numerical_embedding(batch), categorical_embedding(batch)}, 1);
}

Tensor TabularEmbedding::patch_embed(const Tensor& cells) const {
  if (cells.rank() != 3 || cells.dim(2) != config_.g) {
    throw ShapeError("patch_embed: expected [B, N, " + std::to_string(config_.g) +
                     "], got " + to_string(cells.shape()));
  }
  const std::size_t p = config_.patches(), l = config_.patch;
  const Tensor padded = p * l == config_.g ? cells : pad_to(cells, 2, p * l);
  return projection.forward(reshape(padded, {cells.dim(0), cells.dim(1), p, l}));
}

void TabularEmbedding::collect(ParamList& out, const std::string& prefix) const {
  if (shared.defined()) out.emplace_back(prefix + ".shared", shared);
  if (individual.defined()) out.emplace_back(prefix + ".individual", individual);
  projection.collect(out, prefix + ".patch");
}

}  // namespace sparsehop
