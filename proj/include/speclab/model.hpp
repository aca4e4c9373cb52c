#pragma once

#include <vector>

#include <Eigen/Dense>

#include "speclab/error.hpp"

namespace speclab {

/// Stochastic blockmodel parameters: symmetric K x K edge-probability
/// matrix and block-membership probabilities.
struct BlockModelParams {
  Eigen::MatrixXd B;
  Eigen::VectorXd pi;
};

/// Inertia of the indefinite form x^T I_{p,q} y: the first p coordinates
/// carry +1 and the remaining q carry -1.
struct Signature {
  int p = 1;
  int q = 0;

  int dim() const noexcept { return p + q; }
  /// Diagonal of I_{p,q}.
  Eigen::VectorXd diagonal() const;

  friend bool operator==(const Signature&, const Signature&) = default;
};

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kFormTolerance = 1e-10;
inline constexpr double kRankRelativeTolerance = 1e-10;

/// x^T I_{p,q} y.
double indefinite_form(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, const Signature& sig);

/// Snaps values in [-1e-10, 0) to 0 and (1, 1 + 1e-10] to 1. Anything farther
/// outside [0, 1] throws FormOutOfRange.
double clamp_form(double value);

struct Atom {
  Eigen::VectorXd nu;
  double weight = 0.0;
};

/// Finitely supported latent-position distribution F = sum_k w_k delta_{nu_k}
/// together with its signature. Immutable once constructed; the constructor
/// enforces every invariant and precomputes the clamped pairwise forms.
class LatentMixture {
 public:
  LatentMixture(std::vector<Atom> atoms, Signature signature);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Signature& signature() const noexcept { return signature_; }
  int dim() const noexcept { return signature_.dim(); }
  int size() const noexcept { return static_cast<int>(atoms_.size()); }

  /// Clamped nu_j^T I_{p,q} nu_k.
  double form(int j, int k) const { return forms_(j, k); }
  const Eigen::MatrixXd& form_table() const noexcept { return forms_; }

  /// K x d matrix whose rows are the atoms.
  Eigen::MatrixXd atom_matrix() const;
  Eigen::VectorXd weights() const;

 private:
  std::vector<Atom> atoms_;
  Signature signature_;
  Eigen::MatrixXd forms_;
};

/// Returns a copy of params iff B is symmetric with entries in [0,1] and pi
/// lies on the probability simplex. Throws AsymmetricB, EntryOutOfRange or
/// BadSimplexVector naming the offending index otherwise.
BlockModelParams validate_block_model(const BlockModelParams& params);

/// Factors B = U Sigma U^T and returns the mixture with atoms the rows of
/// U |Sigma|^{1/2} restricted to eigenvalues above
/// rank_relative_tolerance * max|eigenvalue|. Retained eigenvalues are ordered
/// by signed value, descending, so positive coordinates come first; each
/// eigenvector is signed so its largest-magnitude entry is positive.
LatentMixture sbm_to_grdpg(const BlockModelParams& params,
                           double rank_relative_tolerance = kRankRelativeTolerance);

/// Applies W to every atom. W must satisfy W I_{p,q} W^T = I_{p,q} within 1e-10.
LatentMixture indefinite_orthogonal_transform(const LatentMixture& mix, const Eigen::MatrixXd& W);

/// Makes the largest-magnitude entry of v positive (first such entry on ties).
void fix_sign(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace speclab
