// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/hopfield.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sparsehop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dim(const MemoryBank& bank, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != bank.dim()) {
    throw std::invalid_argument(
        "hopfield: query has dimension " + std::to_string(x.size()) +
        ", memory patterns have " + std::to_string(bank.dim()));
  }
}

void check_index(const MemoryBank& bank, std::size_t mu) {
  if (mu >= bank.size()) {
    throw std::out_of_range("hopfield: pattern index " + std::to_string(mu) +
                            " out of range for " +
                            std::to_string(bank.size()) + " patterns");
  }
}

std::vector<double> scores(const MemoryBank& bank, const Eigen::VectorXd& x,
                           double beta) {
  const Eigen::VectorXd z = beta * (bank.patterns().transpose() * x);
  return {z.data(), z.data() + z.size()};
}

}  // namespace

MemoryBank::MemoryBank(Eigen::MatrixXd patterns) : patterns_(std::move(patterns)) {
  if (patterns_.rows() < 1 || patterns_.cols() < 1) {
    throw std::invalid_argument("MemoryBank: need at least one pattern");
  }
  if (!patterns_.allFinite()) {
    throw std::invalid_argument("MemoryBank: non-finite pattern entries");
  }
  const Eigen::Index m = patterns_.cols();
  max_norm_ = patterns_.colwise().norm().maxCoeff();
  const Eigen::MatrixXd gram = patterns_.transpose() * patterns_;
  radius_ = kInf;
  separations_.assign(static_cast<std::size_t>(m), kInf);
  for (Eigen::Index i = 0; i < m; ++i) {
    double cross = -kInf;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      cross = std::max(cross, gram(i, j));
      if (j > i) {
        radius_ = std::min(radius_,
                           0.5 * (patterns_.col(i) - patterns_.col(j)).norm());
      }
    }
    if (m > 1) separations_[static_cast<std::size_t>(i)] = gram(i, i) - cross;
  }
}

Eigen::VectorXd MemoryBank::pattern(std::size_t mu) const {
  check_index(*this, mu);
  return patterns_.col(static_cast<Eigen::Index>(mu));
}

double MemoryBank::separation(std::size_t mu) const {
  check_index(*this, mu);
  return separations_[mu];
}

void RetrievalConfig::validate() const {
  if (!(alpha >= 1.0)) throw std::invalid_argument("retrieval: alpha < 1");
  if (!(beta > 0.0)) throw std::invalid_argument("retrieval: beta must be > 0");
  if (!(tol > 0.0)) throw std::invalid_argument("retrieval: tol must be > 0");
  if (max_iters < 1) throw std::invalid_argument("retrieval: max_iters < 1");
}

double energy(const MemoryBank& bank, const Eigen::VectorXd& x,
              const RetrievalConfig& cfg) {
  cfg.validate();
  check_dim(bank, x);
  const auto z = scores(bank, x, cfg.beta);
  return -entmax_conjugate(z, cfg.alpha) / cfg.beta + 0.5 * x.squaredNorm();
}

EntmaxResult retrieval_weights(const MemoryBank& bank, const Eigen::VectorXd& x,
                               const RetrievalConfig& cfg) {
  cfg.validate();
  check_dim(bank, x);
  return entmax(scores(bank, x, cfg.beta), cfg.alpha);
}

Eigen::VectorXd retrieval_step(const MemoryBank& bank, const Eigen::VectorXd& x,
                               const RetrievalConfig& cfg) {
  const EntmaxResult w = retrieval_weights(bank, x, cfg);
  const Eigen::Map<const Eigen::VectorXd> p(w.p.data(),
                                            static_cast<Eigen::Index>(w.p.size()));
  return bank.patterns() * p;
}

RetrievalTrace retrieve(const MemoryBank& bank, const Eigen::VectorXd& x0,
                        const RetrievalConfig& cfg,
                        std::optional<std::size_t> target) {
  cfg.validate();
  check_dim(bank, x0);
  if (target) check_index(bank, *target);
  RetrievalTrace trace;
  trace.iterates.push_back(x0);
  trace.energies.push_back(energy(bank, x0, cfg));
  for (int t = 0; t < cfg.max_iters; ++t) {
    const Eigen::VectorXd& current = trace.iterates.back();
    Eigen::VectorXd next = retrieval_step(bank, current, cfg);
    if (!next.allFinite()) {
      throw std::runtime_error("retrieve: non-finite iterate at step " +
                               std::to_string(t + 1));
    }
    if ((next - current).norm() <= cfg.tol) {
      trace.converged = true;
      break;
    }
    trace.energies.push_back(energy(bank, next, cfg));
    trace.iterates.push_back(std::move(next));
    ++trace.iterations;
  }
  if (target) {
    trace.final_error = (trace.final_state() - bank.pattern(*target)).norm();
  }
  return trace;
}

SeparationValue separation(const MemoryBank& bank, std::size_t mu,
                           const std::optional<Eigen::VectorXd>& x) {
  check_index(bank, mu);
  SeparationValue out;
  out.delta = bank.separation(mu);
  if (x) {
    check_dim(bank, *x);
    if (bank.size() == 1) {
      out.relative = kInf;
    } else {
      const Eigen::VectorXd dots = bank.patterns().transpose() * *x;
      double rel = kInf;
      for (Eigen::Index nu = 0; nu < dots.size(); ++nu) {
        if (static_cast<std::size_t>(nu) == mu) continue;
        rel = std::min(rel, dots[static_cast<Eigen::Index>(mu)] - dots[nu]);
      }
      out.relative = rel;
    }
  }
  return out;
}

WellSeparationReport well_separation_check(const MemoryBank& bank,
                                           const RetrievalConfig& cfg,
                                           double delta) {
  cfg.validate();
  if (bank.size() < 2) {
    throw std::invalid_argument("well_separation_check: needs M >= 2");
  }
  if (!(delta >= 0.0)) {
    throw std::invalid_argument("well_separation_check: delta must be >= 0");
  }
  const double m = bank.max_norm();
  const double r = bank.radius();
  const double count = static_cast<double>(bank.size() - 1);
  WellSeparationReport report;
  report.bound = std::log(2.0 * count * m / (r + delta)) / cfg.beta + 2.0 * m * r;
  for (double d : bank.separations()) {
    report.margins.push_back(d - report.bound);
    report.satisfied.push_back(d >= report.bound);
  }
  return report;
}

std::map<double, double> retrieval_error_compare(
    const MemoryBank& bank, const Eigen::VectorXd& x, std::size_t mu,
    double beta, const std::vector<double>& alphas) {
  check_index(bank, mu);
  const Eigen::VectorXd target = bank.pattern(mu);
  std::map<double, double> errors;
  for (double a : alphas) {
    RetrievalConfig cfg;
    cfg.alpha = a;
    cfg.beta = beta;
    errors[a] = (retrieval_step(bank, x, cfg) - target).norm();
  }
  return errors;
}

StoredPatternReport stored_pattern_diagnostic(const MemoryBank& bank,
                                              std::size_t mu,
                                              const RetrievalConfig& cfg,
                                              std::size_t probes,
                                              std::mt19937_64& rng) {
  check_index(bank, mu);
  if (probes == 0) throw std::invalid_argument("stored_pattern: probes == 0");
  const Eigen::VectorXd center = bank.pattern(mu);
  // With M = 1 any radius works; use the pattern norm as a finite scale.
  const double r = std::isfinite(bank.radius()) ? bank.radius()
                                                : std::max(center.norm(), 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> finals;
  for (std::size_t k = 0; k < probes; ++k) {
    Eigen::VectorXd dir(center.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    dir.normalize();
    const double len =
        r * std::pow(unit(rng), 1.0 / static_cast<double>(center.size()));
    finals.push_back(retrieve(bank, center + 0.999 * len * dir, cfg).final_state());
  }
  StoredPatternReport report;
  for (const auto& a : finals) {
    for (const auto& b : finals) report.spread = std::max(report.spread, (a - b).norm());
  }
  report.fixed_point = finals.front();
  report.common_fixed_point = report.spread <= 10.0 * cfg.tol;
  report.fixed_point_inside = (report.fixed_point - center).norm() <= r;
  report.spheres_disjoint = true;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t j = i + 1; j < bank.size(); ++j) {
      if ((bank.pattern(i) - bank.pattern(j)).norm() < 2.0 * r) {
        report.spheres_disjoint = false;
      }
    }
  }
  return report;
}

MemoryBank random_separated_bank(std::size_t dim, std::size_t memories,
                                 std::mt19937_64& rng, double radius,
                                 double min_half_distance) {
  if (dim == 0 || memories == 0) {
    throw std::invalid_argument("random bank: dimension and count must be > 0");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto m = static_cast<Eigen::Index>(memories);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Eigen::MatrixXd xi(d, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) xi(i, j) = normal(rng);
      xi.col(j) *= radius / xi.col(j).norm();
    }
    MemoryBank bank(std::move(xi));
    if (bank.radius() >= min_half_distance) return bank;
  }
  throw std::runtime_error("random bank: separation target unreachable");
}

}  // namespace sparsehop
