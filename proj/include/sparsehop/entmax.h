// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// The alpha-entmax family: the maximizer of <p, z> + Psi_alpha(p) over the
// probability simplex, with Psi_alpha the Tsallis entropy. alpha = 1 is
// softmax, alpha = 2 is sparsemax; every alpha > 1 can assign exact zeros.
//
// With alpha > 1 the solution has the thresholded form
//   p_i = [(alpha - 1) z_i - tau]_+^(1 / (alpha - 1)),
// where tau is the unique value making p sum to one. For alpha = 1 the
// reported tau is the log-partition, p_i = exp(z_i - tau).

#ifndef SPARSEHOP_ENTMAX_H_
#define SPARSEHOP_ENTMAX_H_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace sparsehop {

struct EntmaxResult {
  std::vector<double> p;
  double tau = 0.0;
  std::vector<std::size_t> support;  // indices with p > 0, ascending
  double alpha = 1.0;                // after snapping to special cases
};

// Values within this distance of 1 or 2 use the exact softmax / sparsemax
// routines.
inline constexpr double kAlphaSnap = 1e-6;
inline constexpr double kThresholdTolerance = 1e-12;
inline constexpr int kThresholdMaxIterations = 200;

double canonical_alpha(double alpha);

// Learnable alpha lives in (1, 2) through alpha = 1 + sigmoid(pre).
double alpha_from_pre(double pre);
double pre_from_alpha(double alpha);

// Tsallis entropy; Shannon entropy at alpha = 1. Throws std::domain_error if
// p is off the simplex by more than 1e-8.
double tsallis_entropy(std::span<const double> p, double alpha);

EntmaxResult entmax(std::span<const double> z, double alpha);

// Allocation-free core used by the attention kernels. Writes the
// distribution into `p` (same length as z) and returns tau.
double entmax_into(std::span<const double> z, double alpha,
                   std::span<double> p);

// Psi*(z) = max_p <p, z> + Psi_alpha(p) evaluated at p = entmax(z); the
// log-sum-exp at alpha = 1. Its gradient in z is entmax(z).
double entmax_conjugate(std::span<const double> z, double alpha);

// d entmax / dz = diag(s) - s s^T / sum(s), s_i = p_i^(2 - alpha) on the
// support and 0 elsewhere.
Eigen::MatrixXd entmax_jacobian(std::span<const double> z, double alpha);

// Jacobian-vector product with an upstream gradient, given the forward
// output p. Writes into `out`.
void entmax_backward_into(std::span<const double> p, double alpha,
                          std::span<const double> upstream,
                          std::span<double> out);

// d <upstream, entmax(z, alpha)> / d alpha by central differences with step
// h, shrunk to a one-sided stencil at the ends of [1, 2].
double entmax_alpha_gradient(std::span<const double> z, double alpha,
                             std::span<const double> upstream,
                             double h = 1e-4);

namespace oracle {

inline constexpr std::size_t kBruteForceMaxSize = 6;

// Enumerates every candidate support, solves the threshold equation on it by
// plain bisection, keeps the KKT-consistent candidates and returns the one
// with the largest objective. Independent of the sort and Newton routes used
// by entmax(). Throws std::invalid_argument when z.size() > 6.
EntmaxResult entmax_bruteforce_oracle(std::span<const double> z,
                                      double alpha);

}  // namespace oracle

}  // namespace sparsehop

#endif  // SPARSEHOP_ENTMAX_H_
