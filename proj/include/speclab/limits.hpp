#pragma once

#include <vector>

#include <Eigen/Dense>

#include "speclab/model.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectral.hpp"

namespace speclab {

inline constexpr double kGapTolerance = 1e-6;

/// Exact population quantities of a point-mass mixture.
struct PopulationMoments {
  Eigen::MatrixXd delta;           // E[X X^T]
  Eigen::VectorXd mu;              // E[X]
  Eigen::MatrixXd delta_sqrt;      // symmetric root of delta
  Eigen::MatrixXd delta_inv_sqrt;
  /// Eigenpairs of delta^{1/2} I_{p,q} delta^{1/2} in modulus order; column i
  /// of whitened_vectors is xi_i.
  Eigen::VectorXd whitened_values;
  Eigen::MatrixXd whitened_vectors;
  std::vector<bool> simple;

  bool all_simple() const;
};

enum class Applicability { full_joint, inapplicable };

/// Limiting law of (lambda_hat_i - lambda_i)_i when every eigenvalue of
/// delta I_{p,q} is simple.
struct LimitLaw {
  Eigen::VectorXd eta;
  Eigen::MatrixXd gamma;
  Applicability applicability = Applicability::inapplicable;
};

/// Centering and scaling conditional on the latent positions.
///
/// `sigma2` is the exact variance of u_i^T (A - P) u_i given X, including the
/// diagonal correction. `sigma2_matrix_form` is the large-n matrix
/// expression 2 m^T I m - 2 tr(M I M I) with m = sum_k u_ik^2 X_k and
/// M = sum_k u_ik^2 X_k X_k^T; it drops the diagonal term and the clamping of
/// probabilities and is reported only for comparison.
struct ConditionalLaw {
  Eigen::VectorXd eta_tilde;
  Eigen::VectorXd sigma2;
  Eigen::VectorXd sigma2_matrix_form;
};

/// Eigenvalues are flagged simple when their distance to every other
/// eigenvalue exceeds gap_tolerance * max |eigenvalue|. Throws SingularDelta.
PopulationMoments population_moments(const LatentMixture& mix, double gap_tolerance = kGapTolerance);

/// Mean offset eta_i as an exact finite sum over atoms. Throws NotSimpleSpectrum.
Eigen::VectorXd eta(const PopulationMoments& mom, const LatentMixture& mix);
/// Covariance Gamma as exact finite sums over atoms. Throws NotSimpleSpectrum.
Eigen::MatrixXd gamma(const PopulationMoments& mom, const LatentMixture& mix);

/// Positive semidefinite (q = 0) forms built from the eigenpairs of delta
/// itself rather than of the whitened matrix. An independent code path for
/// cross-checking eta/gamma. Throw RequiresPositiveSemidefinite or
/// NotSimpleSpectrum.
Eigen::VectorXd eta_rdpg(const PopulationMoments& mom, const LatentMixture& mix);
Eigen::MatrixXd gamma_rdpg(const PopulationMoments& mom, const LatentMixture& mix);

/// eta and gamma together, or an inapplicable law when the spectrum is not
/// simple.
LimitLaw population_law(const LatentMixture& mix);

/// Expected second-order term E[u_i^T (A - P)^2 u_i] / lambda_i. Computed
/// both from the latent positions directly and from the row sums
/// sum_t p_st (1 - p_st); throws InternalMismatch if the two disagree beyond
/// 1e-10 (relative to max(1, |value|)).
Eigen::VectorXd conditional_eta(const LatentSample& sample, const SpectralResult& P_eigs);

struct ConditionalVariance {
  Eigen::VectorXd exact;
  Eigen::VectorXd matrix_form;
};
ConditionalVariance conditional_sigma2(const LatentSample& sample, const SpectralResult& P_eigs);

ConditionalLaw conditional_law(const LatentSample& sample, const SpectralResult& P_eigs);

/// Terms of lambda_hat_i - lambda_i = term1 + term2 + residual with
/// term1 = (lambda_i / lambda_hat_i) u_i^T (A - P) u_i and
/// term2 = (lambda_i / lambda_hat_i^2) u_i^T (A - P)^2 u_i.
struct DecompositionTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double residual = 0.0;
};

/// A_eigs must already be matched to P_eigs coordinate by coordinate.
std::vector<DecompositionTerms> decomposition_diagnostic(const AdjacencyGraph& A,
                                                         const SpectralResult& P_eigs,
                                                         const SpectralResult& A_eigs,
                                                         const ProbabilityMatrix& P);

}  // namespace speclab
