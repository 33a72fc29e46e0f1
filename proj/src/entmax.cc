// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/entmax.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsehop {
namespace {

void check_input(std::span<const double> z, double alpha) {
  if (z.empty()) throw std::invalid_argument("entmax: empty input");
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("entmax: alpha must be >= 1, got " +
                                std::to_string(alpha));
  }
  for (double v : z) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("entmax: non-finite input");
    }
  }
}

// Every reduction below runs over the descending copy `sorted`, never over z
// in its given order, so permuting the input permutes the output exactly.
void scale_to_simplex(std::span<double> p, double total) {
  for (double& v : p) v /= total;
}

void normalize(std::span<double> p) {
  double total = 0.0;
  for (double v : p) total += v;
  scale_to_simplex(p, total);
}

double softmax_into(std::span<const double> z, std::span<const double> sorted,
                    std::span<double> p) {
  const double top = sorted[0];
  double total = 0.0;
  for (double v : sorted) total += std::exp(v - top);
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - top);
  scale_to_simplex(p, total);
  return top + std::log(total);
}

// Sorted-threshold sparsemax.
double sparsemax_into(std::span<const double> z, std::span<const double> sorted,
                      std::span<double> p) {
  double cumulative = 0.0;
  double tau = sorted[0] - 1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] > candidate) tau = candidate;
  }
  double total = 0.0;
  for (double v : sorted) total += std::max(v - tau, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::max(z[i] - tau, 0.0);
  scale_to_simplex(p, total);
  return tau;
}

// Sorted closed form for alpha = 1.5: p_i = [z_i / 2 - tau]_+^2.
double entmax15_into(std::span<const double> z, std::span<const double> sorted,
                     std::span<double> p) {
  double s1 = 0.0;
  double s2 = 0.0;
  double tau = 0.5 * sorted[0] - 1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double h = 0.5 * sorted[k];
    s1 += h;
    s2 += h * h;
    const double kk = static_cast<double>(k + 1);
    const double mean = s1 / kk;
    const double spread = s2 / kk - mean * mean;
    const double disc = (1.0 - kk * spread) / kk;
    if (disc < 0.0) break;
    const double candidate = mean - std::sqrt(disc);
    if (candidate <= h) tau = candidate;
  }
  auto weight = [tau](double v) {
    const double t = std::max(0.5 * v - tau, 0.0);
    return t * t;
  };
  double total = 0.0;
  for (double v : sorted) total += weight(v);
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = weight(z[i]);
  scale_to_simplex(p, total);
  return tau;
}

// Safeguarded Newton on f(tau) = sum [u_i - tau]_+^e - 1 over the bracket
// [max u - 1, max u], with u = (alpha - 1) z and e = 1 / (alpha - 1).
double general_into(std::span<const double> z, std::span<const double> sorted,
                    double alpha, std::span<double> p) {
  const double am1 = alpha - 1.0;
  const double exponent = 1.0 / am1;
  const double top = am1 * sorted[0];
  double lo = top - 1.0;
  double hi = top;
  double tau = lo;
  for (int iter = 0; iter < kThresholdMaxIterations; ++iter) {
    double f = -1.0;
    double slope = 0.0;
    for (double v : sorted) {
      const double t = am1 * v - tau;
      if (t <= 0.0) break;
      const double pw = std::pow(t, exponent - 1.0);
      f += pw * t;
      slope -= exponent * pw;
    }
    if (std::abs(f) <= kThresholdTolerance) break;
    if (f > 0.0) {
      lo = tau;
    } else {
      hi = tau;
    }
    double next = slope < 0.0 ? tau - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == tau) break;
    tau = next;
  }
  auto weight = [&](double v) {
    const double t = am1 * v - tau;
    return t > 0.0 ? std::pow(t, exponent) : 0.0;
  };
  double total = 0.0;
  for (double v : sorted) total += weight(v);
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = weight(z[i]);
  scale_to_simplex(p, total);
  return tau;
}

double objective(std::span<const double> p, std::span<const double> z,
                 double alpha) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * z[i];
  return dot + tsallis_entropy(p, alpha);
}

}  // namespace

double canonical_alpha(double alpha) {
  if (std::abs(alpha - 1.0) <= kAlphaSnap) return 1.0;
  if (std::abs(alpha - 2.0) <= kAlphaSnap) return 2.0;
  return alpha;
}

double alpha_from_pre(double pre) { return 1.0 + 1.0 / (1.0 + std::exp(-pre)); }

double pre_from_alpha(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) {
    throw std::invalid_argument("learnable alpha must lie in (1, 2)");
  }
  const double s = alpha - 1.0;
  return std::log(s / (1.0 - s));
}

double tsallis_entropy(std::span<const double> p, double alpha) {
  if (!(alpha >= 1.0)) throw std::domain_error("tsallis: alpha < 1");
  double total = 0.0;
  for (double v : p) {
    if (v < -1e-8 || !std::isfinite(v)) {
      throw std::domain_error("tsallis: p has a negative entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-8) {
    throw std::domain_error("tsallis: p does not sum to one");
  }
  const double a = canonical_alpha(alpha);
  double h = 0.0;
  if (a == 1.0) {
    for (double v : p) {
      if (v > 0.0) h -= v * std::log(v);
    }
    return h;
  }
  for (double v : p) {
    const double q = std::max(v, 0.0);
    h += q - std::pow(q, a);
  }
  return h / (a * (a - 1.0));
}

double entmax_into(std::span<const double> z, double alpha,
                   std::span<double> p) {
  check_input(z, alpha);
  if (p.size() != z.size()) throw std::invalid_argument("entmax: size");
  const double a = canonical_alpha(alpha);
  if (z.size() == 1) {
    p[0] = 1.0;
    if (a == 1.0) return z[0];
    return (a - 1.0) * z[0] - 1.0;
  }
  thread_local std::vector<double> sorted;
  sorted.assign(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  if (a == 1.0) return softmax_into(z, sorted, p);
  if (a == 2.0) return sparsemax_into(z, sorted, p);
  if (a == 1.5) return entmax15_into(z, sorted, p);
  return general_into(z, sorted, a, p);
}

EntmaxResult entmax(std::span<const double> z, double alpha) {
  EntmaxResult result;
  result.p.resize(z.size());
  result.tau = entmax_into(z, alpha, result.p);
  result.alpha = canonical_alpha(alpha);
  for (std::size_t i = 0; i < result.p.size(); ++i) {
    if (result.p[i] > 0.0) result.support.push_back(i);
  }
  return result;
}

double entmax_conjugate(std::span<const double> z, double alpha) {
  check_input(z, alpha);
  if (canonical_alpha(alpha) == 1.0) {
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - top);
    return top + std::log(total);
  }
  const EntmaxResult r = entmax(z, alpha);
  return objective(r.p, z, r.alpha);
}

void entmax_backward_into(std::span<const double> p, double alpha,
                          std::span<const double> upstream,
                          std::span<double> out) {
  const double a = canonical_alpha(alpha);
  double s_total = 0.0;
  double s_dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double s = a == 1.0 ? p[i] : (a == 2.0 ? 1.0 : std::pow(p[i], 2.0 - a));
    s_total += s;
    s_dot += s * upstream[i];
  }
  const double ratio = s_total > 0.0 ? s_dot / s_total : 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) {
      out[i] = 0.0;
      continue;
    }
    const double s = a == 1.0 ? p[i] : (a == 2.0 ? 1.0 : std::pow(p[i], 2.0 - a));
    out[i] = s * (upstream[i] - ratio);
  }
}

Eigen::MatrixXd entmax_jacobian(std::span<const double> z, double alpha) {
  const EntmaxResult r = entmax(z, alpha);
  const auto m = static_cast<Eigen::Index>(z.size());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  for (std::size_t i : r.support) {
    const double pi = r.p[i];
    s[static_cast<Eigen::Index>(i)] =
        r.alpha == 1.0 ? pi : std::pow(pi, 2.0 - r.alpha);
  }
  Eigen::MatrixXd jac = s.asDiagonal();
  jac -= s * s.transpose() / s.sum();
  return jac;
}

double entmax_alpha_gradient(std::span<const double> z, double alpha,
                             std::span<const double> upstream, double h) {
  if (z.size() <= 1) return 0.0;
  const double lo = std::max(1.0, alpha - h);
  const double hi = std::min(2.0, alpha + h);
  if (!(hi > lo)) return 0.0;
  std::vector<double> p_hi(z.size());
  std::vector<double> p_lo(z.size());
  entmax_into(z, hi, p_hi);
  entmax_into(z, lo, p_lo);
  double g = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    g += upstream[i] * (p_hi[i] - p_lo[i]);
  }
  return g / (hi - lo);
}

namespace oracle {

EntmaxResult entmax_bruteforce_oracle(std::span<const double> z,
                                      double alpha) {
  if (z.size() > kBruteForceMaxSize) {
    throw std::invalid_argument("brute-force oracle: at most 6 coordinates");
  }
  check_input(z, alpha);
  const std::size_t m = z.size();
  const double a = canonical_alpha(alpha);

  EntmaxResult best;
  best.alpha = a;
  if (a == 1.0) {
    // Softmax has full support; solve sum exp(z - tau) = 1 in tau.
    double lo = *std::min_element(z.begin(), z.end());
    double hi = *std::max_element(z.begin(), z.end()) + std::log(double(m));
    for (int i = 0; i < 400 && hi - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      double total = 0.0;
      for (double v : z) total += std::exp(v - mid);
      (total > 1.0 ? lo : hi) = mid;
    }
    best.tau = 0.5 * (lo + hi);
    best.p.resize(m);
    for (std::size_t i = 0; i < m; ++i) best.p[i] = std::exp(z[i] - best.tau);
    normalize(best.p);
    for (std::size_t i = 0; i < m; ++i) best.support.push_back(i);
    return best;
  }

  const double am1 = a - 1.0;
  const double exponent = 1.0 / am1;
  double best_value = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    double top = -std::numeric_limits<double>::infinity();
    double bottom = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        top = std::max(top, am1 * z[i]);
        bottom = std::min(bottom, am1 * z[i]);
      }
    }
    auto mass = [&](double tau) {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask & (1u << i)) {
          total += std::pow(std::max(am1 * z[i] - tau, 0.0), exponent);
        }
      }
      return total;
    };
    double tau;
    if (a == 2.0) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (mask & (1u << i)) {
          sum += z[i];
          ++count;
        }
      }
      tau = (sum - 1.0) / count;
    } else {
      double lo = top - 1.0;
      double hi = top;
      for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mass(mid) > 1.0 ? lo : hi) = mid;
      }
      tau = 0.5 * (lo + hi);
    }
    // KKT: strictly positive on the support, inactive off it.
    if (!(bottom - tau > 0.0)) continue;
    bool consistent = true;
    for (std::size_t i = 0; i < m && consistent; ++i) {
      if (!(mask & (1u << i)) && am1 * z[i] > tau) consistent = false;
    }
    if (!consistent) continue;
    std::vector<double> p(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) p[i] = std::pow(am1 * z[i] - tau, exponent);
    }
    normalize(p);
    const double value = objective(p, z, a);
    if (!found || value > best_value) {
      found = true;
      best_value = value;
      best.p = std::move(p);
      best.tau = tau;
    }
  }
  if (!found) throw std::logic_error("brute-force oracle: no feasible support");
  for (std::size_t i = 0; i < m; ++i) {
    if (best.p[i] > 0.0) best.support.push_back(i);
  }
  return best;
}

}  // namespace oracle
}  // namespace sparsehop
