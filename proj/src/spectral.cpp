#include "speclab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "speclab/rng.hpp"

namespace speclab {

std::vector<int> modulus_order(const Eigen::Ref<const Eigen::VectorXd>& values) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double ma = std::abs(values[a]);
    const double mb = std::abs(values[b]);
    if (ma != mb) return ma > mb;
    return values[a] > values[b];
  });
  return idx;
}

SpectralResult permute(const SpectralResult& result, std::span<const int> perm) {
  SpectralResult out;
  const auto d = static_cast<Eigen::Index>(perm.size());
  out.values.resize(d);
  out.residuals.resize(d);
  out.vectors.resize(result.vectors.rows(), d);
  if (result.reduced_vectors.size() > 0) out.reduced_vectors.resize(result.reduced_vectors.rows(), d);
  for (Eigen::Index k = 0; k < d; ++k) {
    out.values[k] = result.values[perm[k]];
    out.residuals[k] = result.residuals[perm[k]];
    out.vectors.col(k) = result.vectors.col(perm[k]);
    if (out.reduced_vectors.size() > 0) out.reduced_vectors.col(k) = result.reduced_vectors.col(perm[k]);
  }
  out.iterations = result.iterations;
  return out;
}

namespace {

Eigen::VectorXd random_unit(int n, CounterRng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = 2.0 * rng.uniform01() - 1.0;
  return v / v.norm();
}

// Two passes of classical Gram-Schmidt against the first m basis columns.
// Returns the accumulated projection coefficients.
Eigen::VectorXd orthogonalize(const Eigen::MatrixXd& Q, int m, Eigen::VectorXd& w) {
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(m);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd h = Q.leftCols(m).transpose() * w;
    w.noalias() -= Q.leftCols(m) * h;
    coeff += h;
  }
  return coeff;
}

struct RitzSelection {
  std::vector<int> picked;  // indices into the tridiagonal eigenpairs
  Eigen::VectorXd values;
  Eigen::MatrixXd small_vectors;
  double worst_estimate = 0.0;
};

RitzSelection select_ritz(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta, int m, int d,
                          double next_beta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  tri.computeFromTridiagonal(alpha.head(m), beta.head(m - 1), Eigen::ComputeEigenvectors);
  const Eigen::VectorXd& theta = tri.eigenvalues();
  auto order = modulus_order(theta);
  RitzSelection sel;
  sel.picked.assign(order.begin(), order.begin() + d);
  sel.values.resize(d);
  sel.small_vectors.resize(m, d);
  for (int k = 0; k < d; ++k) {
    sel.values[k] = theta[sel.picked[k]];
    sel.small_vectors.col(k) = tri.eigenvectors().col(sel.picked[k]);
    sel.worst_estimate =
        std::max(sel.worst_estimate, std::abs(next_beta * tri.eigenvectors()(m - 1, sel.picked[k])));
  }
  return sel;
}

SpectralResult assemble(const SymmetricOperator& op, const Eigen::MatrixXd& Q, int m,
                        const RitzSelection& sel) {
  const int d = static_cast<int>(sel.values.size());
  SpectralResult out;
  out.values = sel.values;
  out.vectors = Q.leftCols(m) * sel.small_vectors;
  out.residuals.resize(d);
  Eigen::VectorXd y(op.n);
  for (int k = 0; k < d; ++k) {
    out.vectors.col(k).normalize();
    fix_sign(out.vectors.col(k));
    const Eigen::VectorXd vk = out.vectors.col(k);
    op.apply(std::span<const double>(vk.data(), vk.size()), std::span<double>(y.data(), y.size()));
    out.residuals[k] = (y - out.values[k] * vk).norm();
  }
  out.iterations = m;
  return out;
}

}  // namespace

SpectralResult lanczos_top_by_modulus(const SymmetricOperator& op, int d, const LanczosOptions& options) {
  const int n = op.n;
  if (d < 1 || d > n) {
    throw Error(ErrorCode::InvalidArgument,
                "requested " + std::to_string(d) + " eigenpairs of a " + std::to_string(n) + "x" +
                    std::to_string(n) + " operator");
  }
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * d + 200;
  const int max_dim = std::min(n, max_iter);
  const double norm = op.norm_bound > 0.0 ? op.norm_bound : 1.0;
  const double target = options.tol * norm;
  const double breakdown = 1e-12 * norm;
  // Fewer steps than this could miss a repeated eigenvalue whose other copies
  // have not yet entered the basis.
  const int min_dim = std::min(n, 2 * d + 8);

  CounterRng rng(options.start_seed, static_cast<std::uint64_t>(n));
  Eigen::MatrixXd Q(n, max_dim);
  Eigen::VectorXd alpha(max_dim), beta = Eigen::VectorXd::Zero(max_dim);
  Q.col(0) = random_unit(n, rng);
  Eigen::VectorXd w(n);

  RitzSelection sel;
  int m = 0;
  for (int j = 0; j < max_dim; ++j) {
    op.apply(std::span<const double>(Q.col(j).data(), n), std::span<double>(w.data(), n));
    const Eigen::VectorXd coeff = orthogonalize(Q, j + 1, w);
    alpha[j] = coeff[j];
    double next_beta = w.norm();
    m = j + 1;

    if (next_beta <= breakdown) {
      next_beta = 0.0;
      // Invariant subspace: restart with a fresh direction unless the basis
      // already spans everything.
      if (m < max_dim) {
        for (int attempt = 0; attempt < 8; ++attempt) {
          w = random_unit(n, rng);
          orthogonalize(Q, m, w);
          if (w.norm() > 1e-8) break;
        }
      }
    }
    beta[j] = next_beta;

    if (m >= d) {
      sel = select_ritz(alpha, beta, m, d, next_beta);
      if (m >= min_dim && sel.worst_estimate <= target) {
        SpectralResult out = assemble(op, Q, m, sel);
        if (out.residuals.maxCoeff() <= target) return out;
      }
    }
    if (m < max_dim) {
      const double len = w.norm();
      Q.col(m) = w / len;
    }
    if (m == n) {
      SpectralResult out = assemble(op, Q, m, sel);
      if (out.residuals.maxCoeff() <= std::max(target, 1e-12 * norm)) return out;
      break;
    }
  }

  std::ostringstream msg;
  msg << "Lanczos did not converge " << d << " eigenpairs within " << max_iter
      << " iterations (worst residual estimate " << sel.worst_estimate << ", target " << target << ")";
  throw NoConvergenceError(msg.str(), m >= d ? assemble(op, Q, m, sel) : SpectralResult{});
}

SpectralResult top_eigenpairs_sparse(const AdjacencyGraph& A, int d, const LanczosOptions& options) {
  SymmetricOperator op;
  op.n = A.n();
  op.apply = [&A](std::span<const double> x, std::span<double> y) { A.multiply(x, y); };
  op.norm_bound = std::max(1, A.max_degree());
  return lanczos_top_by_modulus(op, d, options);
}

SpectralResult dense_eigen_oracle(const Eigen::MatrixXd& M, int d, int cap) {
  const auto n = M.rows();
  if (n > cap) {
    throw Error(ErrorCode::TooLargeForOracle,
                "dense oracle capped at n = " + std::to_string(cap) + ", got " + std::to_string(n));
  }
  if (M.cols() != n || d < 1 || d > n) {
    throw Error(ErrorCode::InvalidArgument, "dense oracle needs a square matrix and 1 <= d <= n");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  auto order = modulus_order(eig.eigenvalues());
  SpectralResult out;
  out.values.resize(d);
  out.vectors.resize(n, d);
  out.residuals.resize(d);
  for (int k = 0; k < d; ++k) {
    out.values[k] = eig.eigenvalues()[order[k]];
    Eigen::VectorXd v = eig.eigenvectors().col(order[k]);
    fix_sign(v);
    out.vectors.col(k) = v;
    out.residuals[k] = (M * v - out.values[k] * v).norm();
  }
  return out;
}

GramRoots symmetric_roots(const Eigen::MatrixXd& S, ErrorCode code) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  const Eigen::VectorXd& g = eig.eigenvalues();
  const double largest = g.cwiseAbs().maxCoeff();
  if (!(g.minCoeff() > 1e-12 * largest)) {
    std::ostringstream msg;
    msg << "matrix is numerically singular (eigenvalues in [" << g.minCoeff() << ", " << g.maxCoeff()
        << "])";
    throw Error(code, msg.str());
  }
  const Eigen::MatrixXd& V = eig.eigenvectors();
  GramRoots roots;
  roots.sqrt = V * g.cwiseSqrt().asDiagonal() * V.transpose();
  roots.inv_sqrt = V * g.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  return roots;
}

SpectralResult eigenpairs_of_P(const LatentSample& sample) {
  const Eigen::MatrixXd& X = sample.X;
  const int d = sample.dim();
  if (d != sample.signature.dim()) {
    throw Error(ErrorCode::InvalidArgument, "X columns do not match the signature");
  }
  const Eigen::MatrixXd gram = X.transpose() * X;
  const GramRoots roots = symmetric_roots(gram, ErrorCode::DegenerateGram);
  const Eigen::VectorXd I = sample.signature.diagonal();

  Eigen::MatrixXd small = roots.sqrt * I.asDiagonal() * roots.sqrt;
  small = 0.5 * (small + small.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  auto order = modulus_order(eig.eigenvalues());

  SpectralResult out;
  out.values.resize(d);
  out.vectors.resize(X.rows(), d);
  out.reduced_vectors.resize(d, d);
  out.residuals.resize(d);
  const Eigen::MatrixXd lift = X * roots.inv_sqrt;
  for (int k = 0; k < d; ++k) {
    out.values[k] = eig.eigenvalues()[order[k]];
    Eigen::VectorXd v = eig.eigenvectors().col(order[k]);
    Eigen::VectorXd u = lift * v;
    // Sign follows the lifted vector so u and v stay paired.
    Eigen::VectorXd signed_u = u;
    fix_sign(signed_u);
    if (signed_u.dot(u) < 0.0) v = -v;
    out.vectors.col(k) = signed_u;
    out.reduced_vectors.col(k) = v;
    const Eigen::VectorXd Pu = X * (I.asDiagonal() * (X.transpose() * signed_u));
    out.residuals[k] = (Pu - out.values[k] * signed_u).norm();
  }
  return out;
}

}  // namespace speclab
