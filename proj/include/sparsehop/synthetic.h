// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Seeded synthetic tables for tests, the acceptance suite and the bundled
// example data.

#ifndef SPARSEHOP_SYNTHETIC_H_
#define SPARSEHOP_SYNTHETIC_H_

#include <cstdint>

#include "sparsehop/embedding.h"
#include "sparsehop/training.h"

namespace sparsehop {

struct LabeledTable {
  TabularData data;
  Targets targets;
};

// Numerical features x0..x{n_num-1} ~ N(0, 1) and categorical c0..c{n_cat-1}
// over {a, b, c, d}. Binary label: the score
//   x0 - x1 + 0.5 x2 x3 + (c0 in {a, b} ? 0.5 : -0.5)
// thresholded at its median, so the classes split evenly. Needs n_num >= 4
// and n_cat >= 1.
LabeledTable rule_dataset(std::size_t rows, std::size_t n_num, std::size_t n_cat,
                          std::uint64_t seed);

// `features` numerical N(0, 1) columns; label 1 iff x0 + x1 + e > 0 with
// e ~ N(0, noise²). The other columns carry no signal.
LabeledTable sparse_signal_dataset(std::size_t rows, std::size_t features, double noise,
                                   std::uint64_t seed);

}  // namespace sparsehop

#endif  // SPARSEHOP_SYNTHETIC_H_
