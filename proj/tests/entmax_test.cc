// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/entmax.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

namespace sparsehop {
namespace {

constexpr double kAlphas[] = {1.0, 1.01, 1.3, 1.5, 1.7, 2.0};

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t m,
                                  double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> z(m);
  for (double& v : z) v = normal(rng);
  return z;
}

TEST(TsallisTest, OneHotHasZeroEntropy) {
  const std::vector<double> one_hot{1, 0, 0};
  for (double a : kAlphas) EXPECT_EQ(tsallis_entropy(one_hot, a), 0.0) << a;
}

TEST(TsallisTest, FairCoin) {
  const std::vector<double> coin{0.5, 0.5};
  EXPECT_NEAR(tsallis_entropy(coin, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(tsallis_entropy(coin, 2.0), 0.25, 1e-15);
}

TEST(TsallisTest, ContinuousAtShannonLimit) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_NEAR(tsallis_entropy(p, 1.0 + 1e-6), tsallis_entropy(p, 1.0), 1e-5);
  EXPECT_NEAR(tsallis_entropy(p, 1.0 + 1e-4), tsallis_entropy(p, 1.0), 1e-3);
}

TEST(TsallisTest, RejectsOffSimplex) {
  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(tsallis_entropy(bad, 1.5), std::domain_error);
  const std::vector<double> negative{1.5, -0.5};
  EXPECT_THROW(tsallis_entropy(negative, 2.0), std::domain_error);
}

TEST(EntmaxTest, SymmetricInputIsUniform) {
  const std::vector<double> z{0, 0};
  for (double a : kAlphas) {
    const EntmaxResult r = entmax(z, a);
    EXPECT_NEAR(r.p[0], 0.5, 1e-12) << a;
    EXPECT_NEAR(r.p[1], 0.5, 1e-12) << a;
  }
}

TEST(EntmaxTest, SparsemaxSaturatesOnUnitMargin) {
  const std::vector<double> z{1, 0};
  const EntmaxResult r = entmax(z, 2.0);
  EXPECT_EQ(r.p, (std::vector<double>{1, 0}));
  EXPECT_NEAR(r.tau, 0.0, 1e-15);
  EXPECT_EQ(r.support, (std::vector<std::size_t>{0}));
}

TEST(EntmaxTest, SparsemaxThreeWay) {
  const std::vector<double> z{0.5, 0.2, 0.1};
  const EntmaxResult r = entmax(z, 2.0);
  EXPECT_NEAR(r.p[0], 0.5 + 0.2 / 3.0, 1e-12);
  EXPECT_NEAR(r.p[1], 0.2 + 0.2 / 3.0, 1e-12);
  EXPECT_NEAR(r.p[2], 0.1 + 0.2 / 3.0, 1e-12);
  EXPECT_NEAR(r.tau, -0.2 / 3.0, 1e-12);
  const EntmaxResult o = oracle::entmax_bruteforce_oracle(z, 2.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.p[i], o.p[i], 1e-12);
}

TEST(EntmaxTest, ClosedFormOnePointFiveMatchesBisection) {
  const std::vector<double> z{1, 0};
  const EntmaxResult closed = entmax(z, 1.5);
  const EntmaxResult bisected = oracle::entmax_bruteforce_oracle(z, 1.5);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(closed.p[i], bisected.p[i], 1e-10);
  EXPECT_NEAR(closed.tau, bisected.tau, 1e-10);
}

TEST(EntmaxTest, SnapsNearSpecialCases) {
  EXPECT_EQ(canonical_alpha(1.0 + 5e-7), 1.0);
  EXPECT_EQ(canonical_alpha(2.0 - 5e-7), 2.0);
  EXPECT_EQ(canonical_alpha(1.25), 1.25);
  EXPECT_EQ(entmax(std::vector<double>{0.3, 0.1}, 2.0 - 5e-7).alpha, 2.0);
}

TEST(EntmaxTest, RejectsInvalidInput) {
  const std::vector<double> z{0.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(entmax(z, 1.5), std::invalid_argument);
  const std::vector<double> nan{std::nan(""), 0.0};
  EXPECT_THROW(entmax(nan, 1.0), std::invalid_argument);
  EXPECT_THROW(entmax(std::vector<double>{1, 2}, 0.9), std::invalid_argument);
  EXPECT_THROW(entmax(std::vector<double>{}, 1.5), std::invalid_argument);
}

TEST(EntmaxTest, ThresholdFormHoldsCoordinatewise) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto z = random_logits(rng, 2 + trial % 10, 2.0);
    for (double a : {1.2, 1.5, 1.8, 2.0}) {
      const EntmaxResult r = entmax(z, a);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double expected =
            std::pow(std::max((a - 1.0) * z[i] - r.tau, 0.0), 1.0 / (a - 1.0));
        ASSERT_NEAR(r.p[i], expected, 1e-8);
      }
      for (std::size_t i : r.support) ASSERT_GT(r.p[i], 0.0);
      ASSERT_EQ(r.support.size(),
                std::count_if(r.p.begin(), r.p.end(),
                              [](double v) { return v > 0.0; }));
    }
  }
}

TEST(EntmaxTest, PermutingInputPermutesOutputExactly) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const auto z = random_logits(rng, 2 + trial % 20, 2.0);
    std::vector<std::size_t> perm(z.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) permuted[i] = z[perm[i]];
    for (double a : kAlphas) {
      const auto p = entmax(z, a).p;
      const auto q = entmax(permuted, a).p;
      for (std::size_t i = 0; i < z.size(); ++i) ASSERT_EQ(q[i], p[perm[i]]) << a;
    }
  }
}

TEST(ConjugateTest, WorkedValues) {
  for (double a : kAlphas) {
    EXPECT_NEAR(entmax_conjugate(std::vector<double>{3.25}, a), 3.25, 1e-15);
  }
  EXPECT_NEAR(entmax_conjugate(std::vector<double>{0, 0}, 1.0), std::log(2.0),
              1e-15);
  // Max over the simplex of <p, 0> + Psi_2(p), attained at the uniform p.
  EXPECT_NEAR(entmax_conjugate(std::vector<double>{0, 0}, 2.0), 0.25, 1e-15);
}

TEST(ConjugateTest, DominatesEveryFeasiblePoint) {
  // Psi* is a maximum: no simplex point does better.
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_logits(rng, 4);
    for (double a : {1.0, 1.5, 2.0}) {
      const double best = entmax_conjugate(z, a);
      std::vector<double> p(4);
      double total = 0.0;
      for (double& v : p) total += (v = unit(rng));
      for (double& v : p) v /= total;
      double value = tsallis_entropy(p, a);
      for (int i = 0; i < 4; ++i) value += p[i] * z[i];
      ASSERT_LE(value, best + 1e-12);
    }
  }
}

TEST(JacobianTest, WorkedValues) {
  const std::vector<double> zero{0, 0};
  const Eigen::MatrixXd soft = entmax_jacobian(zero, 1.0);
  EXPECT_NEAR(soft(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(soft(0, 1), -0.25, 1e-15);
  const Eigen::MatrixXd sparse = entmax_jacobian(zero, 2.0);
  EXPECT_NEAR(sparse(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(sparse(1, 0), -0.5, 1e-15);
  const Eigen::MatrixXd saturated =
      entmax_jacobian(std::vector<double>{1, 0}, 2.0);
  EXPECT_EQ(saturated.norm(), 0.0);
}

TEST(JacobianTest, SymmetricPsdZeroRowSums) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto z = random_logits(rng, 5);
    for (double a : kAlphas) {
      const Eigen::MatrixXd j = entmax_jacobian(z, a);
      EXPECT_LE((j - j.transpose()).norm(), 1e-14);
      EXPECT_LE(j.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    }
  }
}

TEST(OracleTest, Basics) {
  const EntmaxResult big =
      oracle::entmax_bruteforce_oracle(std::vector<double>{10, 0, 0}, 2.0);
  EXPECT_EQ(big.p, (std::vector<double>{1, 0, 0}));
  const EntmaxResult half =
      oracle::entmax_bruteforce_oracle(std::vector<double>{0, 0}, 2.0);
  EXPECT_NEAR(half.p[0], 0.5, 1e-15);
  EXPECT_THROW(oracle::entmax_bruteforce_oracle(std::vector<double>(7, 0.0), 2.0),
               std::invalid_argument);
}

TEST(OracleTest, AgreesWithEntmaxEverywhere) {
  std::mt19937_64 rng(24);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto z = random_logits(rng, 2 + trial % 5, 1.5);
    for (double a : {1.01, 1.3, 1.5, 1.7, 2.0}) {
      const EntmaxResult fast = entmax(z, a);
      const EntmaxResult slow = oracle::entmax_bruteforce_oracle(z, a);
      for (std::size_t i = 0; i < z.size(); ++i) {
        worst = std::max(worst, std::abs(fast.p[i] - slow.p[i]));
      }
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(AlphaGradientTest, VanishesOnSymmetricOrSingleKey) {
  const std::vector<double> equal{0.3, 0.3, 0.3, 0.3};
  const std::vector<double> g{1.0, -2.0, 0.5, 3.0};
  EXPECT_NEAR(entmax_alpha_gradient(equal, 1.5, g), 0.0, 1e-12);
  EXPECT_EQ(entmax_alpha_gradient(std::vector<double>{1.7}, 1.5,
                                  std::vector<double>{4.0}),
            0.0);
}

TEST(AlphaParamTest, SigmoidParameterization) {
  EXPECT_DOUBLE_EQ(alpha_from_pre(0.0), 1.5);
  EXPECT_NEAR(alpha_from_pre(pre_from_alpha(1.2)), 1.2, 1e-14);
  EXPECT_GT(alpha_from_pre(-30.0), 1.0);
  EXPECT_LT(alpha_from_pre(30.0), 2.0);
  EXPECT_THROW(pre_from_alpha(2.0), std::invalid_argument);
}

}  // namespace
}  // namespace sparsehop
