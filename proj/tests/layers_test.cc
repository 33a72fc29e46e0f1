// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/layers.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsehop/entmax.h"
#include "sparsehop/hopfield.h"
#include "test_util.h"

namespace sparsehop {
namespace {

using testing::gradient_error;
using testing::random_tensor;

GshOptions options(std::size_t d_in, std::size_t d_k, std::size_t d_v,
                   std::size_t heads, bool learnable, double alpha) {
  GshOptions o;
  o.d_in = d_in;
  o.d_k = d_k;
  o.d_v = d_v;
  o.heads = heads;
  o.learnable_alpha = learnable;
  o.alpha = alpha;
  return o;
}

// Row i of a [n, d] tensor as a vector.
std::vector<double> row(const Tensor& t, std::size_t i) {
  const std::size_t d = t.dim(t.rank() - 1);
  return {t.data().begin() + i * d, t.data().begin() + (i + 1) * d};
}

// Dense matrix product written without the tensor library.
std::vector<double> times(const std::vector<double>& x, const Tensor& w) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  std::vector<double> y(out, 0.0);
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < out; ++j) y[j] += x[i] * w[i * out + j];
  }
  return y;
}

TEST(GshTest, IdentityWeightsReproduceRetrievalStep) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> dim(1, 8), count(1, 12);
  std::uniform_real_distribution<double> beta_dist(0.25, 4.0);
  const double alphas[] = {1.0, 1.3, 1.5, 2.0};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = dim(rng), m = count(rng);
    const Tensor xi_t = random_tensor({m, d}, rng);
    const Tensor x_t = random_tensor({1, d}, rng);
    RetrievalConfig cfg;
    cfg.alpha = alphas[trial % 4];
    cfg.beta = beta_dist(rng);
    Eigen::MatrixXd xi(d, m);
    Eigen::VectorXd x(d);
    for (std::size_t mu = 0; mu < m; ++mu) {
      for (std::size_t i = 0; i < d; ++i) xi(i, mu) = xi_t[mu * d + i];
    }
    for (std::size_t i = 0; i < d; ++i) x[i] = x_t[i];
    const Eigen::VectorXd expected = retrieval_step(MemoryBank(xi), x, cfg);
    const Tensor out =
        gsh_forward(x_t, xi_t, GshWeights::identity(d, cfg.alpha, cfg.beta));
    ASSERT_EQ(out.shape(), (Shape{1, d}));
    for (std::size_t i = 0; i < d; ++i) {
      worst = std::max(worst, std::abs(out[i] - expected[i]));
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(GshTest, SingleKeyHasUnitWeight) {
  std::mt19937_64 rng(42);
  for (double a : {1.0, 1.5, 2.0}) {
    const GshWeights w = GshWeights::init(options(3, 4, 2, 1, false, a), rng);
    const Tensor r = random_tensor({5, 3}, rng);
    const Tensor y = random_tensor({1, 3}, rng);
    const Tensor out = gsh_forward(r, y, w);
    const auto expected = times(times(row(y, 0), w.w_k), w.w_v);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto got = row(out, i);
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got[j], expected[j], 1e-14);
    }
  }
}

TEST(GshTest, SparsemaxSaturationReturnsExactValueRow) {
  GshWeights w = GshWeights::identity(2, 2.0, 1.0);
  const Tensor r({1, 2}, {3.0, 0.0});
  const Tensor y({3, 2}, {1.0, 0.0, 0.0, 1.0, -1.0, 0.0});
  // Scores (3, 0, -3): the top key leads by more than 1.
  const EntmaxResult oracle_p =
      oracle::entmax_bruteforce_oracle(std::vector<double>{3.0, 0.0, -3.0}, 2.0);
  EXPECT_EQ(oracle_p.p, (std::vector<double>{1.0, 0.0, 0.0}));
  const Tensor out = gsh_forward(r, y, w);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 0.0);
}

TEST(GshTest, AttentionRowsAreOnTheSimplex) {
  std::mt19937_64 rng(43);
  for (double a : {1.0, 1.25, 1.5, 2.0}) {
    const GshWeights w = GshWeights::init(options(6, 8, 4, 2, false, a), rng);
    const Tensor r = random_tensor({3, 5, 6}, rng, false, 2.0);
    const Tensor y = random_tensor({3, 7, 6}, rng, false, 2.0);
    std::size_t seen = 0;
    const RowObserver observer = [&](const Tensor& p) {
      ASSERT_EQ(p.shape(), (Shape{6, 5, 7}));
      for (std::size_t i = 0; i < p.size() / 7; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
          ASSERT_GE(p[i * 7 + j], 0.0);
          total += p[i * 7 + j];
        }
        ASSERT_NEAR(total, 1.0, 1e-10);
      }
      ++seen;
    };
    ForwardContext ctx;
    ctx.observer = &observer;
    gsh_forward(r, y, w, ctx);
    EXPECT_EQ(seen, 1u);
  }
}

TEST(GshTest, KeyPermutationInvariance) {
  std::mt19937_64 rng(44);
  const GshWeights w = GshWeights::init(options(4, 4, 4, 2, false, 1.5), rng);
  const Tensor r = random_tensor({3, 4}, rng);
  const Tensor y = random_tensor({5, 4}, rng);
  const std::vector<std::size_t> order{3, 0, 4, 1, 2};
  const Tensor shuffled = gather_rows(y, order);
  const Tensor a = gsh_forward(r, y, w);
  const Tensor b = gsh_forward(r, shuffled, w);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(GshTest, OutputRowsDependOnlyOnTheirQuery) {
  std::mt19937_64 rng(45);
  const GshWeights w = GshWeights::init(options(4, 4, 2, 1, false, 1.5), rng);
  const Tensor y = random_tensor({6, 4}, rng);
  const Tensor start = random_tensor({4, 4}, rng);
  std::vector<double> values(start.data().begin(), start.data().end());
  const Tensor base = gsh_forward(Tensor({4, 4}, values), y, w);
  for (std::size_t k = 4; k < 8; ++k) values[k] += 0.7;  // perturb query row 1
  const Tensor moved = gsh_forward(Tensor({4, 4}, values), y, w);
  for (std::size_t i : {0u, 2u, 3u}) EXPECT_EQ(row(base, i), row(moved, i));
  EXPECT_NE(row(base, 1), row(moved, 1));
}

TEST(GshTest, WeightGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(46);
  for (double a : {1.0, 1.5, 2.0}) {
    GshWeights w = GshWeights::init(options(3, 4, 4, 2, false, a), rng);
    const Tensor r = random_tensor({2, 3, 3}, rng);
    const Tensor y = random_tensor({2, 5, 3}, rng);
    const Tensor target = random_tensor({2, 3, 4}, rng);
    auto loss_with = [&](const GshWeights& weights, const Tensor& rr, const Tensor& yy) {
      return sum(mul(gsh_forward(rr, yy, weights), target));
    };
    EXPECT_LE(gradient_error([&](const Tensor& t) { GshWeights c = w; c.w_q = t; return loss_with(c, r, y); }, w.w_q.detach()), 1e-5) << a;
    EXPECT_LE(gradient_error([&](const Tensor& t) { GshWeights c = w; c.w_k = t; return loss_with(c, r, y); }, w.w_k.detach()), 1e-5) << a;
    EXPECT_LE(gradient_error([&](const Tensor& t) { GshWeights c = w; c.w_v = t; return loss_with(c, r, y); }, w.w_v.detach()), 1e-5) << a;
    EXPECT_LE(gradient_error([&](const Tensor& t) { return loss_with(w, t, y); }, r.detach()), 1e-5) << a;
    EXPECT_LE(gradient_error([&](const Tensor& t) { return loss_with(w, r, t); }, y.detach()), 1e-5) << a;
  }
}

TEST(GshTest, RejectsBadShapes) {
  std::mt19937_64 rng(47);
  EXPECT_THROW(GshWeights::init(options(4, 6, 4, 4, false, 1.5), rng),
               std::invalid_argument);
  const GshWeights w = GshWeights::init(options(4, 4, 4, 2, false, 1.5), rng);
  EXPECT_THROW(gsh_forward(random_tensor({2, 3}, rng), random_tensor({5, 4}, rng), w),
               ShapeError);
  EXPECT_THROW(gsh_forward(random_tensor({2, 2, 4}, rng),
                           random_tensor({3, 5, 4}, rng), w),
               ShapeError);
  GshWeights bad = w;
  bad.beta = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(GshTest, DefaultBetaUsesPerHeadWidth) {
  std::mt19937_64 rng(48);
  EXPECT_DOUBLE_EQ(GshWeights::init(options(4, 16, 4, 4, true, 1.5), rng).beta, 0.5);
  EXPECT_DOUBLE_EQ(GshWeights::init(options(4, 16, 4, 4, true, 1.5), rng).alpha(), 1.5);
}

TEST(PoolingTest, SingleKeySinglePrototype) {
  std::mt19937_64 rng(49);
  GshOptions o = options(3, 3, 2, 1, false, 1.5);
  o.query_projection = false;
  const GshWeights w = GshWeights::init(o, rng);
  const Tensor y = random_tensor({1, 3}, rng);
  const Tensor out = gsh_pooling_forward(random_tensor({1, 3}, rng), y, w);
  const auto expected = times(times(row(y, 0), w.w_k), w.w_v);
  EXPECT_NEAR(out[0], expected[0], 1e-14);
  EXPECT_NEAR(out[1], expected[1], 1e-14);
}

TEST(PoolingTest, EqualPrototypesGiveEqualRows) {
  std::mt19937_64 rng(50);
  GshOptions o = options(3, 4, 4, 2, false, 1.5);
  o.query_projection = false;
  const GshWeights w = GshWeights::init(o, rng);
  const Tensor proto = repeat(random_tensor({1, 4}, rng), 3);
  const Tensor out = gsh_pooling_forward(reshape(proto, {3, 4}),
                                         random_tensor({2, 6, 3}, rng), w);
  ASSERT_EQ(out.shape(), (Shape{2, 3, 4}));
  for (std::size_t g = 0; g < 2; ++g) {
    EXPECT_EQ(row(out, g * 3), row(out, g * 3 + 1));
    EXPECT_EQ(row(out, g * 3), row(out, g * 3 + 2));
  }
}

TEST(PoolingTest, MatchesHandAssembledSparsemax) {
  std::mt19937_64 rng(51);
  GshOptions o = options(3, 3, 2, 1, false, 2.0);
  o.query_projection = false;
  o.beta = 1.3;
  const GshWeights w = GshWeights::init(o, rng);
  const Tensor proto = random_tensor({2, 3}, rng, false, 2.0);
  const Tensor y = random_tensor({3, 3}, rng, false, 2.0);
  const Tensor out = gsh_pooling_forward(proto, y, w);
  std::vector<std::vector<double>> keys, values;
  for (std::size_t j = 0; j < 3; ++j) {
    keys.push_back(times(row(y, j), w.w_k));
    values.push_back(times(keys.back(), w.w_v));
  }
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> z(3, 0.0);
    const auto q = row(proto, c);
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < 3; ++i) z[j] += 1.3 * q[i] * keys[j][i];
    }
    const EntmaxResult p = oracle::entmax_bruteforce_oracle(z, 2.0);
    for (std::size_t v = 0; v < 2; ++v) {
      double expected = 0.0;
      for (std::size_t j = 0; j < 3; ++j) expected += p.p[j] * values[j][v];
      EXPECT_NEAR(out[c * 2 + v], expected, 1e-12);
    }
  }
}

TEST(StoredPatternLayerTest, OneStoredPattern) {
  std::mt19937_64 rng(52);
  const GshWeights w = GshWeights::init(options(3, 2, 2, 1, true, 1.5), rng);
  const Tensor out = gsh_layer_forward(random_tensor({4, 3}, rng),
                                       Tensor({1, 2}, {0.3, -1.0}),
                                       Tensor({1, 2}, {5.0, 7.0}), w);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out[2 * i], 5.0, 1e-14);
    EXPECT_NEAR(out[2 * i + 1], 7.0, 1e-14);
  }
}

TEST(StoredPatternLayerTest, OrthogonalKeysSnapAtLargeBeta) {
  GshWeights w = GshWeights::identity(3, 2.0, 20.0);
  const Tensor keys({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor values({3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor queries({3, 3}, {0.1, 0.9, 0.2, 0.8, 0.1, 0.3, 0.1, 0.3, 0.6});
  const Tensor out = gsh_layer_forward(queries, keys, values, w);
  EXPECT_EQ(out.data()[0], 3.0);
  EXPECT_EQ(out.data()[1], 4.0);
  EXPECT_EQ(out.data()[2], 1.0);
  EXPECT_EQ(out.data()[5], 6.0);
}

TEST(StoredPatternLayerTest, StoredValueGradient) {
  std::mt19937_64 rng(53);
  const GshWeights w = GshWeights::init(options(3, 4, 2, 2, false, 1.5), rng);
  const Tensor r = random_tensor({5, 3}, rng);
  const Tensor keys = random_tensor({6, 4}, rng);
  const Tensor target = random_tensor({5, 2}, rng);
  const Tensor values = random_tensor({6, 2}, rng);
  EXPECT_LE(gradient_error(
                [&](const Tensor& v) {
                  return sum(mul(gsh_layer_forward(r, keys, v, w), target));
                },
                values),
            1e-5);
  EXPECT_LE(gradient_error(
                [&](const Tensor& k) {
                  return sum(mul(gsh_layer_forward(r, k, values, w), target));
                },
                keys),
            1e-5);
}

TEST(AlphaGradientLayerTest, VanishesOnSymmetricScoresAndSingleKey) {
  std::mt19937_64 rng(54);
  GshWeights w = GshWeights::identity(2, 1.5, 1.0);
  w.alpha_pre = Tensor::scalar(0.0, true);
  // Orthogonal queries see equal scores on every key.
  const Tensor y({3, 2}, {1, 0, 1, 0, 1, 0});
  backward(sum(mul(gsh_forward(Tensor({2, 2}, {0, 1, 0, 2}), y, w),
                   random_tensor({2, 2}, rng))));
  EXPECT_NEAR(w.alpha_pre.grad()[0], 0.0, 1e-12);
  w.alpha_pre.zero_grad();
  backward(sum(mul(gsh_forward(random_tensor({2, 2}, rng), random_tensor({1, 2}, rng), w),
                   random_tensor({2, 2}, rng))));
  EXPECT_EQ(w.alpha_pre.grad()[0], 0.0);
}

TEST(AlphaGradientLayerTest, MatchesOuterFiniteDifference) {
  std::mt19937_64 rng(55);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    GshWeights w = GshWeights::init(options(3, 4, 3, 1, true, 1.5), rng);
    w.alpha_pre = Tensor::scalar(std::uniform_real_distribution<double>(-1.5, 1.5)(rng), true);
    const Tensor r = random_tensor({3, 3}, rng, false, 1.5);
    const Tensor y = random_tensor({4, 3}, rng, false, 1.5);
    const Tensor target = random_tensor({3, 3}, rng);
    auto loss_at = [&](double a_pre) {
      GshWeights c = w;
      c.alpha_pre = Tensor::scalar(a_pre);
      return sum(mul(gsh_forward(r, y, c), target)).item();
    };
    backward(sum(mul(gsh_forward(r, y, w), target)));
    const double a = w.alpha_pre.item(), h = 1e-5;
    const double outer = (loss_at(a + h) - loss_at(a - h)) / (2 * h);
    const double analytic = w.alpha_pre.grad()[0];
    if (std::abs(outer) < 1e-6) continue;
    EXPECT_LE(std::abs(analytic - outer) / std::abs(outer), 1e-3) << trial;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

}  // namespace
}  // namespace sparsehop
