// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Generalized sparse modern Hopfield associative memory.
//
// Energy and one-step retrieval for memory patterns stored as the columns of
// Xi (d x M):
//
//   E(x) = -(1 / beta) Psi*(beta Xi^T x) + 0.5 <x, x>
//   T(x) = Xi entmax_alpha(beta Xi^T x)
//
// T is the concave-convex update of E, so iterating it never increases the
// energy. alpha = 1 is the dense model with E = -lse(beta, Xi^T x) + 0.5|x|^2.

#ifndef SPARSEHOP_HOPFIELD_H_
#define SPARSEHOP_HOPFIELD_H_

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "sparsehop/entmax.h"

namespace sparsehop {

// Immutable pattern store with cached geometry: the largest pattern norm m,
// half the smallest pairwise distance R (+inf for a single pattern) and the
// per-pattern separation Delta_mu.
class MemoryBank {
 public:
  explicit MemoryBank(Eigen::MatrixXd patterns);

  const Eigen::MatrixXd& patterns() const { return patterns_; }
  Eigen::VectorXd pattern(std::size_t mu) const;
  std::size_t dim() const { return static_cast<std::size_t>(patterns_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(patterns_.cols()); }

  double max_norm() const { return max_norm_; }
  double radius() const { return radius_; }
  double separation(std::size_t mu) const;
  const std::vector<double>& separations() const { return separations_; }

 private:
  Eigen::MatrixXd patterns_;
  double max_norm_ = 0.0;
  double radius_ = 0.0;
  std::vector<double> separations_;
};

struct RetrievalConfig {
  double alpha = 1.0;
  double beta = 1.0;
  int max_iters = 100;
  double tol = 1e-8;

  // Throws std::invalid_argument on beta <= 0, tol <= 0, max_iters < 1 or
  // alpha < 1.
  void validate() const;
};

struct RetrievalTrace {
  std::vector<Eigen::VectorXd> iterates;  // x_0, x_1, ...
  std::vector<double> energies;           // E(x_t) for each iterate
  bool converged = false;
  int iterations = 0;                     // updates that moved the state
  std::optional<double> final_error;      // |x_final - xi_mu| with a target

  const Eigen::VectorXd& final_state() const { return iterates.back(); }
};

double energy(const MemoryBank& bank, const Eigen::VectorXd& x,
              const RetrievalConfig& cfg);

// Simplex weights entmax(beta Xi^T x) behind one retrieval step.
EntmaxResult retrieval_weights(const MemoryBank& bank, const Eigen::VectorXd& x,
                               const RetrievalConfig& cfg);

Eigen::VectorXd retrieval_step(const MemoryBank& bank, const Eigen::VectorXd& x,
                               const RetrievalConfig& cfg);

// Iterates T until |x_{t+1} - x_t| <= tol or max_iters updates.
RetrievalTrace retrieve(const MemoryBank& bank, const Eigen::VectorXd& x0,
                        const RetrievalConfig& cfg,
                        std::optional<std::size_t> target = std::nullopt);

struct SeparationValue {
  double delta = 0.0;               // <xi_mu, xi_mu> - max_{nu != mu} <xi_mu, xi_nu>
  std::optional<double> relative;   // min_{nu != mu} <x, xi_mu> - <x, xi_nu>
};

SeparationValue separation(const MemoryBank& bank, std::size_t mu,
                           const std::optional<Eigen::VectorXd>& x = std::nullopt);

struct WellSeparationReport {
  // (1 / beta) ln(2 (M - 1) m / (R + delta)) + 2 m R, shared by all patterns.
  double bound = 0.0;
  std::vector<double> margins;  // Delta_mu - bound
  std::vector<bool> satisfied;
};

WellSeparationReport well_separation_check(const MemoryBank& bank,
                                           const RetrievalConfig& cfg,
                                           double delta = 0.0);

// |T_alpha(x) - xi_mu| for every alpha, all through the same entmax path.
std::map<double, double> retrieval_error_compare(
    const MemoryBank& bank, const Eigen::VectorXd& x, std::size_t mu,
    double beta, const std::vector<double>& alphas);

// Stored-pattern diagnostic: retrieves from `probes` random points of the
// ball of radius R around xi_mu and reports whether they share one fixed
// point inside that ball. The balls are pairwise disjoint by the definition
// of R; the flag records it explicitly.
struct StoredPatternReport {
  bool common_fixed_point = false;
  bool fixed_point_inside = false;
  bool spheres_disjoint = false;
  double spread = 0.0;  // largest distance between probe fixed points
  Eigen::VectorXd fixed_point;
};

StoredPatternReport stored_pattern_diagnostic(const MemoryBank& bank,
                                              std::size_t mu,
                                              const RetrievalConfig& cfg,
                                              std::size_t probes,
                                              std::mt19937_64& rng);

// M patterns drawn uniformly on the sphere of the given radius, redrawn until
// half the minimum pairwise distance reaches min_half_distance.
MemoryBank random_separated_bank(std::size_t dim, std::size_t memories,
                                 std::mt19937_64& rng, double radius = 3.0,
                                 double min_half_distance = 0.5);

}  // namespace sparsehop

#endif  // SPARSEHOP_HOPFIELD_H_
