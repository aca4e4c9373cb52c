#include "speclab/limits.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace speclab {

namespace {

double bernoulli_variance(double p) { return p * (1.0 - p); }

std::vector<bool> simple_flags(const Eigen::VectorXd& values, double gap_tolerance) {
  const auto d = values.size();
  const double scale = values.cwiseAbs().maxCoeff();
  std::vector<bool> flags(d, true);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i != j && std::abs(values[i] - values[j]) <= gap_tolerance * scale) flags[i] = false;
    }
  }
  return flags;
}

void require_simple(const PopulationMoments& mom) {
  if (mom.all_simple()) return;
  std::ostringstream msg;
  msg << "delta I_{p,q} has a repeated eigenvalue (";
  for (Eigen::Index i = 0; i < mom.whitened_values.size(); ++i) {
    msg << (i ? ", " : "") << mom.whitened_values[i];
  }
  msg << "); the joint limit law needs simple eigenvalues, use the conditional law instead";
  throw Error(ErrorCode::NotSimpleSpectrum, msg.str());
}

// Row k holds (xi_i^T delta^{-1/2} nu_k)_i.
Eigen::MatrixXd whitened_coordinates(const PopulationMoments& mom, const LatentMixture& mix) {
  return mix.atom_matrix() * mom.delta_inv_sqrt * mom.whitened_vectors;
}

double trace_of_square(const Eigen::MatrixXd& M) { return (M * M).trace(); }

}  // namespace

bool PopulationMoments::all_simple() const {
  for (bool s : simple) {
    if (!s) return false;
  }
  return true;
}

PopulationMoments population_moments(const LatentMixture& mix, double gap_tolerance) {
  const int d = mix.dim();
  PopulationMoments mom;
  mom.delta = Eigen::MatrixXd::Zero(d, d);
  mom.mu = Eigen::VectorXd::Zero(d);
  for (const auto& atom : mix.atoms()) {
    mom.delta.noalias() += atom.weight * atom.nu * atom.nu.transpose();
    mom.mu += atom.weight * atom.nu;
  }
  const GramRoots roots = symmetric_roots(mom.delta, ErrorCode::SingularDelta);
  mom.delta_sqrt = roots.sqrt;
  mom.delta_inv_sqrt = roots.inv_sqrt;

  const Eigen::VectorXd I = mix.signature().diagonal();
  Eigen::MatrixXd whitened = mom.delta_sqrt * I.asDiagonal() * mom.delta_sqrt;
  whitened = 0.5 * (whitened + whitened.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(whitened);
  const auto order = modulus_order(eig.eigenvalues());
  mom.whitened_values.resize(d);
  mom.whitened_vectors.resize(d, d);
  for (int i = 0; i < d; ++i) {
    mom.whitened_values[i] = eig.eigenvalues()[order[i]];
    Eigen::VectorXd xi = eig.eigenvectors().col(order[i]);
    fix_sign(xi);
    mom.whitened_vectors.col(i) = xi;
  }
  mom.simple = simple_flags(mom.whitened_values, gap_tolerance);
  return mom;
}

Eigen::VectorXd eta(const PopulationMoments& mom, const LatentMixture& mix) {
  require_simple(mom);
  const Signature& sig = mix.signature();
  const Eigen::VectorXd I = sig.diagonal();
  const Eigen::MatrixXd IDI = I.asDiagonal() * mom.delta * I.asDiagonal();
  const Eigen::MatrixXd z = whitened_coordinates(mom, mix);
  const int d = mix.dim();

  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < mix.size(); ++k) {
    const Eigen::VectorXd& nu = mix.atoms()[k].nu;
    const double w = mix.atoms()[k].weight;
    const double centering = indefinite_form(nu, mom.mu, sig) - nu.dot(IDI * nu);
    for (int i = 0; i < d; ++i) out[i] += w * z(k, i) * z(k, i) * centering;
  }
  for (int i = 0; i < d; ++i) out[i] /= mom.whitened_values[i];
  return out;
}

Eigen::MatrixXd gamma(const PopulationMoments& mom, const LatentMixture& mix) {
  require_simple(mom);
  const Eigen::VectorXd I = mix.signature().diagonal();
  const Eigen::MatrixXd z = whitened_coordinates(mom, mix);
  const int d = mix.dim();

  Eigen::MatrixXd out(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
      for (int k = 0; k < mix.size(); ++k) {
        const Eigen::VectorXd& nu = mix.atoms()[k].nu;
        const double b = mix.atoms()[k].weight * z(k, i) * z(k, j);
        m += b * nu;
        M.noalias() += b * nu * nu.transpose();
      }
      const Eigen::MatrixXd MI = M * I.asDiagonal();
      out(i, j) = out(j, i) = 2.0 * m.dot(I.asDiagonal() * m) - 2.0 * trace_of_square(MI);
    }
  }
  return out;
}

namespace {

struct PlainEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

PlainEigen rdpg_eigen(const PopulationMoments& mom, const LatentMixture& mix) {
  if (mix.signature().q != 0) {
    throw Error(ErrorCode::RequiresPositiveSemidefinite,
                "random dot product forms need signature q = 0, got q = " +
                    std::to_string(mix.signature().q));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mom.delta);
  const int d = mix.dim();
  PlainEigen out{Eigen::VectorXd(d), Eigen::MatrixXd(d, d)};
  // Ascending from the solver; reverse to descending.
  for (int i = 0; i < d; ++i) {
    out.values[i] = eig.eigenvalues()[d - 1 - i];
    out.vectors.col(i) = eig.eigenvectors().col(d - 1 - i);
  }
  for (bool s : simple_flags(out.values, kGapTolerance)) {
    if (!s) throw Error(ErrorCode::NotSimpleSpectrum, "delta has a repeated eigenvalue");
  }
  return out;
}

}  // namespace

Eigen::VectorXd eta_rdpg(const PopulationMoments& mom, const LatentMixture& mix) {
  const PlainEigen e = rdpg_eigen(mom, mix);
  const int d = mix.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (const auto& atom : mix.atoms()) {
    const double centering = atom.nu.dot(mom.mu) - atom.nu.dot(mom.delta * atom.nu);
    for (int i = 0; i < d; ++i) {
      const double proj = e.vectors.col(i).dot(atom.nu);
      out[i] += atom.weight * proj * proj * centering;
    }
  }
  for (int i = 0; i < d; ++i) out[i] /= e.values[i] * e.values[i];
  return out;
}

Eigen::MatrixXd gamma_rdpg(const PopulationMoments& mom, const LatentMixture& mix) {
  const PlainEigen e = rdpg_eigen(mom, mix);
  const int d = mix.dim();
  Eigen::MatrixXd out(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
      for (const auto& atom : mix.atoms()) {
        const double b = atom.weight * e.vectors.col(i).dot(atom.nu) * e.vectors.col(j).dot(atom.nu);
        m += b * atom.nu;
        M.noalias() += b * atom.nu * atom.nu.transpose();
      }
      const double scale = 2.0 / (e.values[i] * e.values[j]);
      out(i, j) = out(j, i) = scale * m.squaredNorm() - scale * trace_of_square(M);
    }
  }
  return out;
}

LimitLaw population_law(const LatentMixture& mix) {
  const PopulationMoments mom = population_moments(mix);
  LimitLaw law;
  if (!mom.all_simple()) return law;
  law.eta = eta(mom, mix);
  law.gamma = gamma(mom, mix);
  law.applicability = Applicability::full_joint;
  return law;
}

namespace {

void check_conditional_inputs(const LatentSample& sample, const SpectralResult& P_eigs) {
  if (P_eigs.vectors.rows() != sample.n() || P_eigs.size() != sample.dim()) {
    throw Error(ErrorCode::InvalidArgument,
                "eigenpairs do not match the latent sample (need n x d eigenvectors)");
  }
}

// (1/lambda_i) sum_s u_is^2 zeta_s with zeta_s = sum_t p_st (1 - p_st),
// evaluated per block.
Eigen::VectorXd eta_from_row_variances(const ProbabilityMatrix& P, const SpectralResult& P_eigs) {
  const Eigen::MatrixXd variances = P.block_forms().unaryExpr([](double p) { return bernoulli_variance(p); });
  const Eigen::VectorXd zeta_block = variances * P.block_counts();
  const auto& labels = P.labels();
  Eigen::VectorXd out(P_eigs.size());
  for (int i = 0; i < P_eigs.size(); ++i) {
    double acc = 0.0;
    for (int s = 0; s < P.n(); ++s) {
      const double u = P_eigs.vectors(s, i);
      acc += u * u * zeta_block[labels[s]];
    }
    out[i] = acc / P_eigs.values[i];
  }
  return out;
}

}  // namespace

Eigen::VectorXd conditional_eta(const LatentSample& sample, const SpectralResult& P_eigs) {
  check_conditional_inputs(sample, P_eigs);
  const Eigen::MatrixXd& X = sample.X;
  const int n = sample.n();
  const int d = sample.dim();
  const Eigen::VectorXd I = sample.signature.diagonal();
  const Eigen::MatrixXd gram = X.transpose() * X;
  const GramRoots roots = symmetric_roots(gram, ErrorCode::DegenerateGram);

  // sum_t (X_t - X_t X_t^T I X_s) = S - G I X_s, so the inner factor is
  // X_s^T I S - X_s^T I G I X_s.
  const Eigen::VectorXd IS = I.asDiagonal() * X.colwise().sum().transpose();
  const Eigen::MatrixXd IGI = I.asDiagonal() * gram * I.asDiagonal();
  Eigen::VectorXd inner(n);
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd xs = X.row(s).transpose();
    inner[s] = xs.dot(IS) - xs.dot(IGI * xs);
  }

  Eigen::VectorXd direct(d);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v;
    if (P_eigs.reduced_vectors.cols() == d) {
      v = P_eigs.reduced_vectors.col(i);
    } else {
      v = roots.inv_sqrt * (X.transpose() * P_eigs.vectors.col(i));
    }
    const Eigen::VectorXd coord = X * (roots.inv_sqrt * v);
    direct[i] = coord.cwiseAbs2().dot(inner) / P_eigs.values[i];
  }

  const Eigen::VectorXd via_rows = eta_from_row_variances(probability_matrix(sample), P_eigs);
  for (int i = 0; i < d; ++i) {
    if (std::abs(direct[i] - via_rows[i]) > 1e-10 * std::max(1.0, std::abs(direct[i]))) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "conditional eta_" << i << ": latent-position form " << direct[i]
          << " disagrees with row-variance form " << via_rows[i];
      throw Error(ErrorCode::InternalMismatch, msg.str());
    }
  }
  return direct;
}

ConditionalVariance conditional_sigma2(const LatentSample& sample, const SpectralResult& P_eigs) {
  check_conditional_inputs(sample, P_eigs);
  symmetric_roots(sample.X.transpose() * sample.X, ErrorCode::DegenerateGram);
  const ProbabilityMatrix P = probability_matrix(sample);
  const Eigen::MatrixXd variances = P.block_forms().unaryExpr([](double p) { return bernoulli_variance(p); });
  const auto& labels = P.labels();
  const int K = P.blocks();
  const int d = sample.dim();
  const Eigen::VectorXd I = sample.signature.diagonal();

  ConditionalVariance out{Eigen::VectorXd(d), Eigen::VectorXd(d)};
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd w = P_eigs.vectors.col(i).cwiseAbs2();
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd mass_sq = Eigen::VectorXd::Zero(K);
    for (int s = 0; s < P.n(); ++s) {
      mass[labels[s]] += w[s];
      mass_sq[labels[s]] += w[s] * w[s];
    }
    out.exact[i] = 2.0 * mass.dot(variances * mass) - mass_sq.dot(variances.diagonal());

    const Eigen::VectorXd m = sample.X.transpose() * w;
    const Eigen::MatrixXd M = sample.X.transpose() * w.asDiagonal() * sample.X;
    const Eigen::MatrixXd MI = M * I.asDiagonal();
    out.matrix_form[i] = 2.0 * m.dot(I.asDiagonal() * m) - 2.0 * trace_of_square(MI);
  }
  return out;
}

ConditionalLaw conditional_law(const LatentSample& sample, const SpectralResult& P_eigs) {
  ConditionalLaw law;
  law.eta_tilde = conditional_eta(sample, P_eigs);
  auto variance = conditional_sigma2(sample, P_eigs);
  law.sigma2 = std::move(variance.exact);
  law.sigma2_matrix_form = std::move(variance.matrix_form);
  return law;
}

std::vector<DecompositionTerms> decomposition_diagnostic(const AdjacencyGraph& A,
                                                         const SpectralResult& P_eigs,
                                                         const SpectralResult& A_eigs,
                                                         const ProbabilityMatrix& P) {
  if (A.n() != P.n() || P_eigs.vectors.rows() != P.n() || A_eigs.size() != P_eigs.size()) {
    throw Error(ErrorCode::InvalidArgument, "decomposition inputs have inconsistent sizes");
  }
  std::vector<DecompositionTerms> out(P_eigs.size());
  Eigen::VectorXd Au(A.n());
  for (int i = 0; i < P_eigs.size(); ++i) {
    const Eigen::VectorXd u = P_eigs.vectors.col(i);
    A.multiply(std::span<const double>(u.data(), u.size()), std::span<double>(Au.data(), Au.size()));
    const Eigen::VectorXd noise_u = Au - P.multiply(u);
    const double lambda = P_eigs.values[i];
    const double lambda_hat = A_eigs.values[i];
    auto& t = out[i];
    t.term1 = lambda / lambda_hat * u.dot(noise_u);
    t.term2 = lambda / (lambda_hat * lambda_hat) * noise_u.squaredNorm();
    t.residual = (lambda_hat - lambda) - t.term1 - t.term2;
  }
  return out;
}

}  // namespace speclab
