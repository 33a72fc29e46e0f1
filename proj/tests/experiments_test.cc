// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/experiments.h"

#include <gtest/gtest.h>

#include <json.hpp>

namespace sparsehop {
namespace {

ExperimentSpec small_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.trials = 40;
  spec.seed = 7;
  return spec;
}

TEST(ExperimentTest, KindNames) {
  for (auto kind : {ExperimentKind::kRetrievalError, ExperimentKind::kNoiseRobustness,
                    ExperimentKind::kConvergenceSpeed}) {
    EXPECT_EQ(parse_experiment_kind(experiment_kind_name(kind)), kind);
  }
  EXPECT_EQ(parse_experiment_kind("noise_robustness"), ExperimentKind::kNoiseRobustness);
  EXPECT_THROW(parse_experiment_kind("capacity"), std::invalid_argument);
}

TEST(ExperimentTest, RejectsBadSpecs) {
  ExperimentSpec empty = small_spec(ExperimentKind::kRetrievalError);
  empty.alphas.clear();
  EXPECT_THROW(run_experiment(empty), std::invalid_argument);
  ExperimentSpec negative = small_spec(ExperimentKind::kNoiseRobustness);
  negative.noise_levels = {0.1, -0.2};
  EXPECT_THROW(run_experiment(negative), std::invalid_argument);
}

TEST(ExperimentTest, ZeroTrialsGivesEmptyTable) {
  ExperimentSpec spec = small_spec(ExperimentKind::kNoiseRobustness);
  spec.trials = 0;
  const ExperimentResult result = run_experiment(spec);
  EXPECT_TRUE(result.rows.empty());
  EXPECT_EQ(result.rows_csv(), "trial,sigma,alpha,error,iterations,converged\n");
  const auto summary = nlohmann::json::parse(result.summary_json());
  EXPECT_TRUE(summary["zero_trials"].get<bool>());
}

TEST(ExperimentTest, DeterministicGivenSeed) {
  const ExperimentSpec spec = small_spec(ExperimentKind::kNoiseRobustness);
  const ExperimentResult a = run_experiment(spec);
  const ExperimentResult b = run_experiment(spec);
  EXPECT_EQ(a.rows_csv(), b.rows_csv());
  EXPECT_EQ(a.summary_json(), b.summary_json());
  ExperimentSpec other = spec;
  other.seed = 8;
  EXPECT_NE(run_experiment(other).rows_csv(), a.rows_csv());
  EXPECT_NE(trial_seed(0, 0), trial_seed(0, 1));
}

TEST(ExperimentTest, NoiselessQueriesSaturateOnlyWhenSparse) {
  ExperimentSpec spec = small_spec(ExperimentKind::kNoiseRobustness);
  spec.noise_levels = {0.0};
  const ExperimentResult result = run_experiment(spec);
  ASSERT_EQ(result.summary.size(), 2u);
  EXPECT_EQ(result.summary[0].alpha, 1.0);
  EXPECT_GT(result.summary[0].mean_error, 0.0);
  EXPECT_EQ(result.summary[1].alpha, 2.0);
  EXPECT_EQ(result.summary[1].mean_error, 0.0);
}

TEST(ExperimentTest, SparseOrderingOnStandardSuite) {
  for (auto kind : {ExperimentKind::kRetrievalError, ExperimentKind::kNoiseRobustness,
                    ExperimentKind::kConvergenceSpeed}) {
    const ExperimentResult result = run_experiment(small_spec(kind));
    EXPECT_TRUE(result.sparse_le_dense_on_means) << experiment_kind_name(kind);
  }
  const ExperimentResult error =
      run_experiment(small_spec(ExperimentKind::kRetrievalError));
  EXPECT_TRUE(error.sparse_le_dense_all_trials);
}

TEST(ExperimentTest, NoiseRunsCountIterations) {
  const ExperimentResult r = run_experiment(small_spec(ExperimentKind::kNoiseRobustness));
  for (const ExperimentRow& row : r.rows) {
    EXPECT_GE(row.iterations, 1) << row.trial;
    EXPECT_TRUE(row.converged);
  }
  for (const AlphaSummary& s : r.summary) EXPECT_GE(s.mean_iterations, 1.0);
  EXPECT_TRUE(r.sparse_le_dense_on_means);
}

TEST(ExperimentTest, TableShape) {
  const ExperimentSpec spec = small_spec(ExperimentKind::kNoiseRobustness);
  const ExperimentResult result = run_experiment(spec);
  EXPECT_EQ(result.rows.size(), spec.trials * spec.noise_levels.size() * 2);
  EXPECT_EQ(result.summary.size(), spec.noise_levels.size() * 2);
  for (const AlphaSummary& s : result.summary) EXPECT_EQ(s.count, spec.trials);
  const auto summary = nlohmann::json::parse(result.summary_json());
  EXPECT_EQ(summary["summary"].size(), 10u);
  EXPECT_EQ(summary["kind"], "noise");
}

}  // namespace
}  // namespace sparsehop
