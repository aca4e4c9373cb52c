#include "speclab/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "speclab/error.hpp"

namespace speclab {

double normal_cdf(double x, double mean, double variance) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double kolmogorov_survival(double x) {
  constexpr double kTermCutoff = 1e-12;
  if (!(x > 0.0)) return 1.0;
  if (x < 1.18) {
    // Jacobi theta form of the CDF, converges fast for small x.
    const double pi = std::numbers::pi;
    const double scale = -pi * pi / (8.0 * x * x);
    double cdf = 0.0;
    for (int k = 1;; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(scale * odd * odd);
      cdf += term;
      if (term < kTermCutoff) break;
    }
    cdf *= std::sqrt(2.0 * pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1;; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < kTermCutoff) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_statistic(std::span<const double> samples, double mean, double variance) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "KS statistic of an empty sample");
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::DegenerateVariance, "reference variance must be positive and finite");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i], mean, variance);
    d = std::max({d, (static_cast<double>(i) + 1.0) / m - f, f - static_cast<double>(i) / m});
  }
  return d;
}

KsResult ks_test(std::span<const double> samples, double mean, double variance) {
  if (static_cast<int>(samples.size()) < kKsMinSamples) {
    throw Error(ErrorCode::InvalidArgument, "KS test needs at least " + std::to_string(kKsMinSamples) +
                                                " samples, got " + std::to_string(samples.size()));
  }
  KsResult out;
  out.statistic = ks_statistic(samples, mean, variance);
  out.p_value = kolmogorov_survival(out.statistic * std::sqrt(static_cast<double>(samples.size())));
  return out;
}

Moments empirical_moments(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw Error(ErrorCode::InvalidArgument, "moments need at least two records");
  Moments out;
  out.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - out.mean.transpose();
  out.cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  return out;
}

namespace {

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

// Exact minimum-cost assignment by dynamic programming over subsets of
// estimate indices. forbidden_row/forbidden_col excludes one pairing.
double best_assignment(const Eigen::MatrixXd& cost, std::vector<int>* perm, int forbidden_row = -1,
                       int forbidden_col = -1) {
  const int d = static_cast<int>(cost.rows());
  const std::size_t states = std::size_t{1} << d;
  std::vector<double> best(states, kInfeasible);
  std::vector<int> choice(states, -1);
  best[0] = 0.0;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (best[mask] == kInfeasible) continue;
    const int row = std::popcount(mask);
    if (row == d) continue;
    for (int col = 0; col < d; ++col) {
      if (mask & (std::size_t{1} << col)) continue;
      if (row == forbidden_row && col == forbidden_col) continue;
      const double c = best[mask] + cost(row, col);
      const std::size_t next = mask | (std::size_t{1} << col);
      if (c < best[next]) {
        best[next] = c;
        choice[next] = col;
      }
    }
  }
  const std::size_t full = states - 1;
  if (perm && best[full] < kInfeasible) {
    perm->assign(d, -1);
    std::size_t mask = full;
    for (int row = d - 1; row >= 0; --row) {
      const int col = choice[mask];
      (*perm)[row] = col;
      mask &= ~(std::size_t{1} << col);
    }
  }
  return best[full];
}

}  // namespace

Matching match_eigenvalues(std::span<const double> lambda_hat, std::span<const double> lambda,
                           double sign_threshold) {
  const int d = static_cast<int>(lambda.size());
  if (static_cast<int>(lambda_hat.size()) != d) {
    throw Error(ErrorCode::InvalidArgument, "matching needs equal-length eigenvalue lists");
  }
  if (d > 20) throw Error(ErrorCode::InvalidArgument, "matching supports at most 20 eigenvalues");
  Matching out;
  out.perm.resize(d);
  std::iota(out.perm.begin(), out.perm.end(), 0);
  if (d == 0) return out;

  Eigen::MatrixXd cost(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const bool sign_bound = std::abs(lambda[i]) > sign_threshold;
      const bool agree = (lambda_hat[j] >= 0.0) == (lambda[i] >= 0.0);
      cost(i, j) = (sign_bound && !agree) ? kInfeasible : std::abs(lambda_hat[j] - lambda[i]);
    }
  }
  std::vector<int> perm;
  double optimum = best_assignment(cost, &perm);
  if (optimum == kInfeasible) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) cost(i, j) = std::abs(lambda_hat[j] - lambda[i]);
    }
    optimum = best_assignment(cost, &perm);
  }

  // Every other permutation differs from the optimum in at least one pairing,
  // so the runner-up is the best assignment with one optimal pairing removed.
  double runner_up = kInfeasible;
  for (int i = 0; i < d && d > 1; ++i) {
    runner_up = std::min(runner_up, best_assignment(cost, nullptr, i, perm[i]));
  }
  if (runner_up - optimum < 1e-9) {
    out.ambiguous = true;
    return out;
  }
  out.perm = std::move(perm);
  return out;
}

}  // namespace speclab
