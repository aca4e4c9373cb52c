#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace speclab {

double normal_cdf(double x, double mean = 0.0, double variance = 1.0);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// sup_x |F_emp(x) - Phi((x - mean) / sqrt(variance))| for any non-empty sample.
double ks_statistic(std::span<const double> samples, double mean, double variance);

/// One-sample Kolmogorov-Smirnov test against N(mean, variance) with the
/// asymptotic p-value K(D sqrt(m)). Needs at least 8 samples and a positive
/// finite variance (DegenerateVariance otherwise).
KsResult ks_test(std::span<const double> samples, double mean, double variance);

inline constexpr int kKsMinSamples = 8;

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased (m - 1) covariance of the rows of `rows`.
Moments empirical_moments(const Eigen::MatrixXd& rows);

struct Matching {
  /// lambda_hat[perm[i]] is paired with lambda[i].
  std::vector<int> perm;
  bool ambiguous = false;
};

/// Pairs estimated with reference eigenvalues by minimising
/// sum_i |lambda_hat[perm[i]] - lambda[i]|. Pairs whose reference exceeds
/// sign_threshold in modulus must agree in sign whenever some permutation
/// allows it. When another permutation comes within 1e-9 of the optimal cost
/// the result is flagged ambiguous and the identity is returned.
Matching match_eigenvalues(std::span<const double> lambda_hat, std::span<const double> lambda,
                           double sign_threshold = 0.0);

}  // namespace speclab
