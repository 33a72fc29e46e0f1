// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/network.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.h"

namespace sparsehop {
namespace {

using testing::random_tensor;

ModuleOptions module_options(std::size_t d, std::size_t len, std::size_t c,
                             double alpha = 1.5) {
  ModuleOptions o;
  o.d_model = d;
  o.length = len;
  o.pooling = c;
  o.d_ff = 2 * d;
  o.heads = 2;
  o.alpha_mode = AlphaMode::kFixed;
  o.alpha = alpha;
  return o;
}

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.embedding.g = 8;
  c.embedding.g_shared = 2;
  c.embedding.patch = 4;
  c.embedding.d_model = 8;
  c.pooling = 2;
  c.levels = 1;
  c.merge = 4;
  c.decoded = 2;
  c.d_ff = 16;
  c.heads = 1;
  c.dropout = 0.0;
  c.alpha_mode = AlphaMode::kFixed;
  c.alpha = 1.5;
  c.outputs = 2;
  return c;
}

// Three numerical and one categorical feature.
TabularData tiny_data(std::size_t rows, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TabularData d;
  d.columns = {{"a", ColumnKind::kNumerical}, {"b", ColumnKind::kNumerical},
               {"c", ColumnKind::kNumerical}, {"k", ColumnKind::kCategorical}};
  d.numerical.resize(3);
  d.categorical.resize(1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& col : d.numerical) col.push_back(normal(rng));
    d.categorical[0].push_back(r % 3 == 0 ? "x" : (r % 3 == 1 ? "y" : "z"));
  }
  return d;
}

BishopNetwork tiny_network(const NetworkConfig& config, const TabularData& data,
                           std::mt19937_64& rng) {
  const TabularSchema schema = fit_schema(data);
  return BishopNetwork(config, schema, fit_bins(data, config.embedding.g), rng);
}

TEST(EncoderLengthsTest, CeilingRecurrence) {
  EXPECT_EQ(encoder_lengths(4, 4, 1), (std::vector<std::size_t>{4, 1}));
  EXPECT_EQ(encoder_lengths(4, 4, 3), (std::vector<std::size_t>{4, 1, 1, 1}));
  EXPECT_EQ(encoder_lengths(10, 3, 2), (std::vector<std::size_t>{10, 4, 2}));
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<std::size_t> dist(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = dist(rng), r = 1 + dist(rng) % 5, h = 1 + dist(rng) % 4;
    const auto len = encoder_lengths(p, r, h);
    ASSERT_EQ(len.size(), h + 1);
    for (std::size_t i = 1; i < len.size(); ++i) {
      ASSERT_EQ(len[i], static_cast<std::size_t>(std::ceil(double(len[i - 1]) / double(r))));
      ASSERT_GE(len[i], 1u);
    }
  }
}

TEST(ColumnBlockTest, PreservesShapeAndPermutesWithFeatures) {
  std::mt19937_64 rng(72);
  const BishopModule m(module_options(8, 3, 2), rng);
  const Tensor x = random_tensor({2, 4, 3, 8}, rng);
  const Tensor out = m.column_block(x, {});
  ASSERT_EQ(out.shape(), x.shape());
  const std::vector<std::size_t> order{2, 0, 3, 1};
  // Feature permutation on the flattened [B * N] axis, per batch row.
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t n : order) rows.push_back(b * 4 + n);
  }
  const Tensor permuted =
      reshape(gather_rows(reshape(x, {8, 24}), rows), {2, 4, 3, 8});
  const Tensor out_p = m.column_block(permuted, {});
  const Tensor expected = reshape(gather_rows(reshape(out, {8, 24}), rows), {2, 4, 3, 8});
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out_p[i], expected[i], 1e-12);
}

TEST(ColumnBlockTest, SinglePatchReducesToResidualStages) {
  std::mt19937_64 rng(73);
  const BishopModule m(module_options(4, 1, 1), rng);
  const Tensor x = random_tensor({1, 3, 1, 4}, rng);
  const Tensor tokens = reshape(x, {3, 1, 4});
  // One key: the attention output is that key's value row x W_K W_V.
  const Tensor value =
      matmul(matmul(tokens, m.column_attention.w_k), m.column_attention.w_v);
  const Tensor mid = m.column_norm1.forward(add(tokens, value));
  const Tensor expected = m.column_norm2.forward(add(mid, m.column_mlp.forward(mid, {})));
  const Tensor out = m.column_block(x, {});
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-12);
}

TEST(RowBlockTest, ScoreMatricesAreFeatureByPrototype) {
  std::mt19937_64 rng(74);
  const std::size_t n = 6, c = 2, len = 3;
  const BishopModule m(module_options(8, len, c), rng);
  std::vector<Shape> shapes;
  const RowObserver observer = [&](const Tensor& p) { shapes.push_back(p.shape()); };
  ForwardContext ctx;
  ctx.observer = &observer;
  const Tensor out = m.row_block(random_tensor({2, n, len, 8}, rng), ctx);
  EXPECT_EQ(out.shape(), (Shape{2, n, len, 8}));
  ASSERT_EQ(shapes.size(), 2u);
  EXPECT_EQ(shapes[0], (Shape{2 * len * 2, c, n}));  // pooling: C x N per head
  EXPECT_EQ(shapes[1], (Shape{2 * len * 2, n, c}));  // re-expansion: N x C
}

TEST(RowBlockTest, SingleFeatureSinglePrototype) {
  std::mt19937_64 rng(75);
  const BishopModule m(module_options(4, 2, 1), rng);
  const Tensor x = random_tensor({1, 1, 2, 4}, rng);
  const Tensor a = m.row_block(x, {});
  const Tensor b = m.row_block(x, {});
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::isfinite(a[i]));
    EXPECT_EQ(a[i], b[i]);
  }
}

TEST(ModuleTest, CompositionAndShapeMismatch) {
  std::mt19937_64 rng(76);
  const BishopModule m(module_options(8, 2, 3), rng);
  const Tensor x = random_tensor({2, 5, 2, 8}, rng);
  const Tensor direct = m.forward(x, {});
  const Tensor staged = m.row_block(m.column_block(x, {}), {});
  EXPECT_EQ(std::vector<double>(direct.data().begin(), direct.data().end()),
            std::vector<double>(staged.data().begin(), staged.data().end()));
  EXPECT_THROW(m.forward(random_tensor({2, 5, 3, 8}, rng), {}), ShapeError);
}

TEST(ModuleTest, GradientOfScalarReadout) {
  std::mt19937_64 rng(77);
  for (double a : {1.0, 1.5, 2.0}) {
    const BishopModule m(module_options(8, 4, 2, a), rng);
    const Tensor x = random_tensor({1, 2, 4, 8}, rng);
    const Tensor w = random_tensor({1, 2, 4, 8}, rng);
    ParamList params;
    m.collect(params, "m");
    const double err = testing::parameter_gradient_error(
        params, [&] { return sum(mul(m.forward(x, {}), w)); });
    EXPECT_LE(err, 1e-3) << a;
    EXPECT_LE(testing::gradient_error(
                  [&](const Tensor& t) { return sum(mul(m.forward(t, {}), w)); }, x),
              1e-3)
        << a;
  }
}

TEST(NetworkTest, LogitsShapeAndRowIndependence) {
  std::mt19937_64 rng(78);
  const TabularData data = tiny_data(5, rng);
  const BishopNetwork net = tiny_network(tiny_config(), data, rng);
  const TabularSchema schema = fit_schema(data);
  const EncodedBatch batch = encode(data, schema);
  const Tensor logits = net.forward(batch);
  ASSERT_EQ(logits.shape(), (Shape{5, 2}));
  for (double v : logits.data()) EXPECT_TRUE(std::isfinite(v));
  for (std::size_t r = 0; r < 5; ++r) {
    const std::vector<std::size_t> pick{r, r};
    const Tensor alone = net.forward(batch.select(pick));
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(alone[k], alone[2 + k]);
      EXPECT_NEAR(alone[k], logits[2 * r + k], 1e-12);
    }
  }
}

TEST(NetworkTest, DecoderShapeBridgesEncoderLengths) {
  std::mt19937_64 rng(79);
  NetworkConfig config = tiny_config();
  config.embedding.g = 12;
  config.embedding.patch = 2;  // P = 6
  config.merge = 4;
  config.levels = 2;  // lengths 6, 2, 1
  config.decoded = 3;
  config.heads = 2;
  const TabularData data = tiny_data(3, rng);
  const BishopNetwork net = tiny_network(config, data, rng);
  const Tensor patches = net.embedding.forward(encode(data, fit_schema(data)));
  const auto levels = net.encode_levels(patches, {});
  ASSERT_EQ(levels.size(), 3u);
  EXPECT_EQ(levels[1].dim(2), 2u);
  EXPECT_EQ(levels[2].dim(2), 1u);
  EXPECT_EQ(net.decode(levels, {}).shape(), (Shape{3, 4, 3, 8}));
  EXPECT_EQ(net.decoder.size(), 2u);
  std::vector<Tensor> short_levels(levels.begin(), levels.end() - 1);
  EXPECT_THROW(net.decode(short_levels, {}), std::invalid_argument);
}

TEST(NetworkTest, PositionalTensorReceivesGradient) {
  std::mt19937_64 rng(80);
  const TabularData data = tiny_data(3, rng);
  const BishopNetwork net = tiny_network(tiny_config(), data, rng);
  const EncodedBatch batch = encode(data, fit_schema(data));
  const std::vector<int> labels{0, 1, 1};
  const double err = testing::parameter_gradient_error(
      {{"positional", net.positional}},
      [&] { return softmax_cross_entropy(net.forward(batch), labels); });
  EXPECT_LE(err, 1e-3);
  double norm = 0.0;
  for (double g : net.positional.grad()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(NetworkTest, FullParameterGradientCheck) {
  std::mt19937_64 rng(81);
  const TabularData data = tiny_data(4, rng);
  const BishopNetwork net = tiny_network(tiny_config(), data, rng);
  const EncodedBatch batch = encode(data, fit_schema(data));
  const std::vector<int> labels{0, 1, 1, 0};
  const double err = testing::parameter_gradient_error(
      net.parameters(), [&] { return softmax_cross_entropy(net.forward(batch), labels); });
  EXPECT_LE(err, 1e-3);
}

TEST(NetworkTest, LearnableAlphaPerSublayer) {
  std::mt19937_64 rng(82);
  NetworkConfig config = tiny_config();
  config.alpha_mode = AlphaMode::kLearnable;
  const TabularData data = tiny_data(2, rng);
  const BishopNetwork net = tiny_network(config, data, rng);
  const auto alphas = net.alphas();
  // Three sub-layers per module, three modules, one cross attention.
  EXPECT_EQ(alphas.size(), 3u * 3u + 1u);
  for (const auto& [name, a] : alphas) EXPECT_DOUBLE_EQ(a, 1.5) << name;
}

TEST(NetworkTest, SparseAndDenseExtremesShareThePath) {
  std::mt19937_64 rng(83);
  for (double a : {1.0, 2.0}) {
    NetworkConfig config = tiny_config();
    config.alpha = a;
    const TabularData data = tiny_data(3, rng);
    const BishopNetwork net = tiny_network(config, data, rng);
    const EncodedBatch batch = encode(data, fit_schema(data));
    std::size_t rows = 0, sparse_rows = 0;
    const RowObserver observer = [&](const Tensor& p) {
      const std::size_t k = p.dim(p.rank() - 1);
      for (std::size_t i = 0; i < p.size() / k; ++i) {
        double total = 0.0;
        bool has_zero = false;
        for (std::size_t j = 0; j < k; ++j) {
          total += p[i * k + j];
          has_zero = has_zero || p[i * k + j] == 0.0;
        }
        ASSERT_NEAR(total, 1.0, 1e-10);
        ++rows;
        if (has_zero || k == 1) ++sparse_rows;
      }
    };
    ForwardContext ctx;
    ctx.observer = &observer;
    net.forward(batch, ctx);
    EXPECT_GT(rows, 0u);
    if (a == 1.0) EXPECT_LT(sparse_rows, rows);
    const std::vector<int> labels{0, 1, 0};
    EXPECT_LE(testing::parameter_gradient_error(
                  net.parameters(),
                  [&] { return softmax_cross_entropy(net.forward(batch), labels); }),
              1e-3)
        << a;
  }
}

TEST(NetworkTest, DeterministicUnderSeed) {
  auto run = [] {
    std::mt19937_64 rng(84);
    const TabularData data = tiny_data(3, rng);
    const BishopNetwork net = tiny_network(tiny_config(), data, rng);
    const Tensor out = net.forward(encode(data, fit_schema(data)));
    return std::vector<double>(out.data().begin(), out.data().end());
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace sparsehop
