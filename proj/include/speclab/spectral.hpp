#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "speclab/error.hpp"
#include "speclab/sampling.hpp"

namespace speclab {

/// Top eigenpairs ordered by decreasing modulus, then by signed value
/// descending. `reduced_vectors` is filled only by eigenpairs_of_P and holds
/// the d x d eigenvectors v_i of (X^T X)^{1/2} I_{p,q} (X^T X)^{1/2}.
struct SpectralResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd reduced_vectors;
  int iterations = 0;

  int size() const noexcept { return static_cast<int>(values.size()); }
};

/// Indices of `values` sorted by |value| descending, then value descending,
/// then original index.
std::vector<int> modulus_order(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Returns a copy with eigenpair k taken from position perm[k].
SpectralResult permute(const SpectralResult& result, std::span<const int> perm);

/// Symmetric operator accessed only through y = M x.
struct SymmetricOperator {
  int n = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  /// Upper bound on the spectral norm; residual tolerances scale with it.
  double norm_bound = 1.0;
};

struct LanczosOptions {
  double tol = 1e-10;
  /// 0 selects 10 * d + 200.
  int max_iter = 0;
  std::uint64_t start_seed = 0x5eed5eedULL;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& message, SpectralResult partial)
      : Error(ErrorCode::NoConvergence, message), partial_(std::move(partial)) {}
  const SpectralResult& partial() const noexcept { return partial_; }

 private:
  SpectralResult partial_;
};

/// Lanczos with full reorthogonalization. Ritz values from both ends of the
/// spectrum are ranked by modulus; iteration stops when the d leading ones
/// have residual <= tol * norm_bound. An invariant Krylov subspace triggers a
/// restart from a fresh vector orthogonal to the basis, so repeated
/// eigenvalues are recovered. Throws NoConvergenceError with the current Ritz
/// pairs after max_iter steps.
SpectralResult lanczos_top_by_modulus(const SymmetricOperator& op, int d,
                                      const LanczosOptions& options = {});

/// lanczos_top_by_modulus on the adjacency matrix, with the maximum row sum
/// as the norm bound.
SpectralResult top_eigenpairs_sparse(const AdjacencyGraph& A, int d, const LanczosOptions& options = {});

inline constexpr int kDenseOracleCap = 2048;

/// Full dense symmetric eigendecomposition; the reference the iterative
/// solver is tested against.
SpectralResult dense_eigen_oracle(const Eigen::MatrixXd& M, int d, int cap = kDenseOracleCap);

/// Exact nonzero eigenpairs of P = X I_{p,q} X^T through the d x d matrix
/// (X^T X)^{1/2} I_{p,q} (X^T X)^{1/2}; eigenvectors of P are lifted as
/// u_i = X (X^T X)^{-1/2} v_i. Throws DegenerateGram if X^T X is numerically
/// singular.
SpectralResult eigenpairs_of_P(const LatentSample& sample);

/// Symmetric square root and inverse square root of a positive definite
/// matrix, through its eigendecomposition. Throws `code` when the smallest
/// eigenvalue is not above 1e-12 times the largest.
struct GramRoots {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;
};
GramRoots symmetric_roots(const Eigen::MatrixXd& S, ErrorCode code);

}  // namespace speclab
