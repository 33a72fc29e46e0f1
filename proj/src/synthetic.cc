// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/synthetic.h"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace sparsehop {

LabeledTable rule_dataset(std::size_t rows, std::size_t n_num, std::size_t n_cat,
                          std::uint64_t seed) {
  if (n_num < 4 || n_cat < 1 || rows == 0) {
    throw std::invalid_argument("rule_dataset: needs rows > 0, n_num >= 4, n_cat >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  static const char* kLevels[] = {"a", "b", "c", "d"};
  LabeledTable t;
  for (std::size_t j = 0; j < n_num; ++j) {
    t.data.columns.push_back({"x" + std::to_string(j), ColumnKind::kNumerical});
  }
  for (std::size_t i = 0; i < n_cat; ++i) {
    t.data.columns.push_back({"c" + std::to_string(i), ColumnKind::kCategorical});
  }
  t.data.numerical.assign(n_num, std::vector<double>(rows));
  t.data.categorical.assign(n_cat, std::vector<std::string>(rows));
  std::vector<double> score(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n_num; ++j) t.data.numerical[j][r] = normal(rng);
    for (std::size_t i = 0; i < n_cat; ++i) t.data.categorical[i][r] = kLevels[rng() % 4];
    const auto& x = t.data.numerical;
    const std::string& c0 = t.data.categorical[0][r];
    score[r] = x[0][r] - x[1][r] + 0.5 * x[2][r] * x[3][r] +
               (c0 == "a" || c0 == "b" ? 0.5 : -0.5);
  }
  std::vector<double> sorted = score;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[rows / 2];
  for (std::size_t r = 0; r < rows; ++r) t.targets.classes.push_back(score[r] >= threshold);
  return t;
}

LabeledTable sparse_signal_dataset(std::size_t rows, std::size_t features, double noise,
                                   std::uint64_t seed) {
  if (features < 2 || rows == 0) {
    throw std::invalid_argument("sparse_signal_dataset: needs rows > 0 and features >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledTable t;
  for (std::size_t j = 0; j < features; ++j) {
    t.data.columns.push_back({"x" + std::to_string(j), ColumnKind::kNumerical});
  }
  t.data.numerical.assign(features, std::vector<double>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < features; ++j) t.data.numerical[j][r] = normal(rng);
    const double e = noise * normal(rng);
    t.targets.classes.push_back(t.data.numerical[0][r] + t.data.numerical[1][r] + e > 0.0);
  }
  return t;
}

}  // namespace sparsehop
