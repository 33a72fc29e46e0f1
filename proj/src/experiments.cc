// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/experiments.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "sparsehop/entmax.h"
#include "sparsehop/hopfield.h"

namespace sparsehop {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::VectorXd ball_offset(std::size_t dim, double max_len,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd dir(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
  dir.normalize();
  return unit(rng) * max_len * dir;
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "retrieval-error" || name == "retrieval_error") {
    return ExperimentKind::kRetrievalError;
  }
  if (name == "noise" || name == "noise_robustness") {
    return ExperimentKind::kNoiseRobustness;
  }
  if (name == "convergence" || name == "convergence_speed") {
    return ExperimentKind::kConvergenceSpeed;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

std::string experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kRetrievalError:
      return "retrieval-error";
    case ExperimentKind::kNoiseRobustness:
      return "noise";
    case ExperimentKind::kConvergenceSpeed:
      return "convergence";
  }
  return "unknown";
}

void ExperimentSpec::validate() const {
  if (alphas.empty()) throw std::invalid_argument("experiment: empty alpha set");
  for (double a : alphas) {
    if (!(a >= 1.0)) throw std::invalid_argument("experiment: alpha < 1");
  }
  if (kind == ExperimentKind::kNoiseRobustness && noise_levels.empty()) {
    throw std::invalid_argument("experiment: empty noise level set");
  }
  for (double s : noise_levels) {
    if (!(s >= 0.0)) throw std::invalid_argument("experiment: sigma < 0");
  }
  if (dim == 0 || memories == 0) {
    throw std::invalid_argument("experiment: d and M must be positive");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("experiment: beta must be > 0");
  if (!(tol > 0.0) || max_iters < 1) {
    throw std::invalid_argument("experiment: invalid stopping rule");
  }
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.spec = spec;
  const bool noise = spec.kind == ExperimentKind::kNoiseRobustness;
  const bool convergence = spec.kind == ExperimentKind::kConvergenceSpeed;
  const std::vector<double> sigmas = noise ? spec.noise_levels : std::vector<double>{0.0};

  for (std::size_t trial = 0; trial < spec.trials; ++trial) {
    std::mt19937_64 rng(trial_seed(spec.seed, trial));
    const MemoryBank bank = random_separated_bank(
        spec.dim, spec.memories, rng, spec.sphere_radius, spec.min_half_distance);
    std::uniform_int_distribution<std::size_t> pick(0, spec.memories - 1);
    const std::size_t mu = pick(rng);
    const Eigen::VectorXd target = bank.pattern(mu);
    const double reach = std::isfinite(bank.radius()) ? 0.5 * bank.radius()
                                                      : spec.sphere_radius;
    for (double sigma : sigmas) {
      Eigen::VectorXd query;
      if (noise) {
        std::normal_distribution<double> normal(0.0, sigma);
        query = target;
        for (Eigen::Index i = 0; i < query.size(); ++i) {
          if (sigma > 0.0) query[i] += normal(rng);
        }
      } else {
        query = target + ball_offset(spec.dim, reach, rng);
      }
      for (double a : spec.alphas) {
        RetrievalConfig cfg;
        cfg.alpha = a;
        cfg.beta = spec.beta;
        cfg.max_iters = spec.max_iters;
        cfg.tol = spec.tol;
        ExperimentRow row;
        row.trial = trial;
        row.sigma = sigma;
        row.alpha = a;
        if (convergence) {
          const RetrievalTrace trace = retrieve(bank, query, cfg, mu);
          row.error = *trace.final_error;
          row.iterations = trace.iterations;
          row.converged = trace.converged;
        } else {
          row.error = (retrieval_step(bank, query, cfg) - target).norm();
          if (noise) {
            // Error stays one-step; the iteration count comes from the full run.
            const RetrievalTrace trace = retrieve(bank, query, cfg);
            row.iterations = trace.iterations;
            row.converged = trace.converged;
          }
        }
        result.rows.push_back(row);
      }
    }
  }

  // Per-trial ordering against the dense rows.
  auto metric = [&](const ExperimentRow& r) {
    return convergence ? static_cast<double>(r.iterations) : r.error;
  };
  const std::size_t per_group = spec.alphas.size();
  for (std::size_t start = 0; start < result.rows.size(); start += per_group) {
    const ExperimentRow* dense = nullptr;
    for (std::size_t k = 0; k < per_group; ++k) {
      if (canonical_alpha(result.rows[start + k].alpha) == 1.0) {
        dense = &result.rows[start + k];
      }
    }
    if (!dense) continue;
    for (std::size_t k = 0; k < per_group; ++k) {
      const ExperimentRow& r = result.rows[start + k];
      if (canonical_alpha(r.alpha) > 1.0 && metric(r) > metric(*dense) + 1e-12) {
        result.sparse_le_dense_all_trials = false;
      }
    }
  }

  for (double sigma : sigmas) {
    std::vector<AlphaSummary> level;
    for (double a : spec.alphas) {
      AlphaSummary s;
      s.alpha = a;
      s.sigma = sigma;
      for (const ExperimentRow& r : result.rows) {
        if (r.sigma != sigma || r.alpha != a) continue;
        ++s.count;
        s.mean_error += r.error;
        s.max_error = std::max(s.max_error, r.error);
        s.mean_iterations += r.iterations;
        if (r.converged) ++s.converged;
      }
      if (s.count > 0) {
        s.mean_error /= static_cast<double>(s.count);
        s.mean_iterations /= static_cast<double>(s.count);
      }
      level.push_back(s);
    }
    const AlphaSummary* dense = nullptr;
    for (const auto& s : level) {
      if (canonical_alpha(s.alpha) == 1.0) dense = &s;
    }
    if (dense && dense->count > 0) {
      for (const auto& s : level) {
        if (canonical_alpha(s.alpha) == 1.0) continue;
        const double sparse_metric = convergence ? s.mean_iterations : s.mean_error;
        const double dense_metric =
            convergence ? dense->mean_iterations : dense->mean_error;
        if (sparse_metric > dense_metric + 1e-12) result.sparse_le_dense_on_means = false;
        if (noise && s.mean_iterations > dense->mean_iterations + 1e-12) {
          result.sparse_le_dense_on_means = false;
        }
      }
    }
    result.summary.insert(result.summary.end(), level.begin(), level.end());
  }
  return result;
}

std::string ExperimentResult::rows_csv() const {
  std::ostringstream out;
  out << "trial,sigma,alpha,error,iterations,converged\n";
  for (const ExperimentRow& r : rows) {
    out << r.trial << ',' << format_double(r.sigma) << ','
        << format_double(r.alpha) << ',' << format_double(r.error) << ','
        << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string ExperimentResult::summary_json() const {
  nlohmann::ordered_json j;
  j["kind"] = experiment_kind_name(spec.kind);
  j["d"] = spec.dim;
  j["M"] = spec.memories;
  j["beta"] = spec.beta;
  j["alphas"] = spec.alphas;
  if (spec.kind == ExperimentKind::kNoiseRobustness) {
    j["noise_levels"] = spec.noise_levels;
  }
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  j["zero_trials"] = spec.trials == 0;
  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (const AlphaSummary& s : summary) {
    nlohmann::ordered_json e;
    e["alpha"] = s.alpha;
    e["sigma"] = s.sigma;
    e["count"] = s.count;
    e["mean_error"] = s.mean_error;
    e["max_error"] = s.max_error;
    e["mean_iterations"] = s.mean_iterations;
    e["converged"] = s.converged;
    levels.push_back(e);
  }
  j["summary"] = levels;
  j["sparse_le_dense_all_trials"] = sparse_le_dense_all_trials;
  j["sparse_le_dense_on_means"] = sparse_le_dense_on_means;
  return j.dump(2) + "\n";
}

}  // namespace sparsehop
