#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "speclab/limits.hpp"
#include "speclab/model.hpp"
#include "speclab/rng.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectral.hpp"

using namespace speclab;

namespace {

LatentMixture er(double p) { return LatentMixture({{Eigen::VectorXd::Constant(1, std::sqrt(p)), 1.0}}, {1, 0}); }

BlockModelParams fig1_params() {
  return {(Eigen::MatrixXd(2, 2) << 0.3, 0.5, 0.5, 0.3).finished(), Eigen::Vector2d(0.3, 0.7)};
}

BlockModelParams fig2_params() {
  return {0.2 * Eigen::MatrixXd::Identity(3, 3) + 0.3 * Eigen::MatrixXd::Ones(3, 3),
          Eigen::VectorXd::Constant(3, 1.0 / 3.0)};
}

// Block-level oracle: with W = diag(w), the unit eigenvectors y_i of
// W^{1/2} B W^{1/2} give the limiting eigenvector value z_ik = y_ik / sqrt(w_k)
// on block k. Then
//   eta_i   = (1 / lambda_i) sum_k w_k z_ik^2 sum_l w_l B_kl (1 - B_kl)
//   Gamma_ij = 2 sum_kl w_k w_l z_ik z_jk z_il z_jl B_kl (1 - B_kl).
struct BlockOracle {
  Eigen::VectorXd lambda;
  Eigen::VectorXd eta;
  Eigen::MatrixXd gamma;
};

BlockOracle block_oracle(const Eigen::MatrixXd& B, const Eigen::VectorXd& w, int d) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sw.asDiagonal() * B * sw.asDiagonal());
  std::vector<int> idx(w.size());
  for (int k = 0; k < w.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
  });
  const Eigen::MatrixXd V = B.array() * (1.0 - B.array());
  BlockOracle o{Eigen::VectorXd(d), Eigen::VectorXd(d), Eigen::MatrixXd(d, d)};
  Eigen::MatrixXd z(w.size(), d);
  for (int i = 0; i < d; ++i) {
    o.lambda(i) = es.eigenvalues()(idx[i]);
    z.col(i) = es.eigenvectors().col(idx[i]).cwiseQuotient(sw);
  }
  const Eigen::VectorXd row_var = V * w;
  for (int i = 0; i < d; ++i) o.eta(i) = (w.array() * z.col(i).array().square() * row_var.array()).sum() / o.lambda(i);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const Eigen::VectorXd c = w.cwiseProduct(z.col(i)).cwiseProduct(z.col(j));
      o.gamma(i, j) = 2.0 * c.dot(V * c);
    }
  return o;
}

Eigen::MatrixXd hyperbolic(int d, int a, int b, double t) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(d, d);
  W(a, a) = W(b, b) = std::cosh(t);
  W(a, b) = W(b, a) = std::sinh(t);
  return W;
}

Eigen::MatrixXd rotation(int d, int a, int b, double t) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(d, d);
  W(a, a) = W(b, b) = std::cos(t);
  W(a, b) = -std::sin(t);
  W(b, a) = std::sin(t);
  return W;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

// Var[u^T (A - P) u] summed pair by pair over the upper triangle.
double brute_sigma2(const Eigen::MatrixXd& P, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int k = 0; k < P.rows(); ++k) {
    s += std::pow(u(k), 4) * P(k, k) * (1 - P(k, k));
    for (int l = k + 1; l < P.rows(); ++l) s += 4 * u(k) * u(k) * u(l) * u(l) * P(k, l) * (1 - P(k, l));
  }
  return s;
}

double brute_eta(const Eigen::MatrixXd& P, const Eigen::VectorXd& u, double lambda) {
  double s = 0.0;
  for (int a = 0; a < P.rows(); ++a)
    for (int t = 0; t < P.rows(); ++t) s += u(a) * u(a) * P(a, t) * (1 - P(a, t));
  return s / lambda;
}

}  // namespace

TEST_CASE("Erdos-Renyi closed forms") {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const LatentMixture mix = er(p);
    const PopulationMoments mom = population_moments(mix);
    CHECK(mom.delta(0, 0) == doctest::Approx(p).epsilon(1e-15));
    CHECK(mom.mu(0) == doctest::Approx(std::sqrt(p)).epsilon(1e-15));
    CHECK(std::abs(mom.whitened_vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(eta(mom, mix)(0) - (1 - p)) < 1e-12);
    CHECK(std::abs(gamma(mom, mix)(0, 0) - 2 * p * (1 - p)) < 1e-12);
    CHECK(std::abs(eta_rdpg(mom, mix)(0) - (1 - p)) < 1e-12);
    CHECK(std::abs(gamma_rdpg(mom, mix)(0, 0) - 2 * p * (1 - p)) < 1e-12);
  }
}

TEST_CASE("two-block model moments and law") {
  const BlockModelParams params = fig1_params();
  const LatentMixture mix = sbm_to_grdpg(params);
  const PopulationMoments mom = population_moments(mix);
  const Eigen::VectorXd& n1 = mix.atoms()[0].nu;
  const Eigen::VectorXd& n2 = mix.atoms()[1].nu;
  const Eigen::MatrixXd delta = 0.3 * n1 * n1.transpose() + 0.7 * n2 * n2.transpose();
  CHECK((mom.delta - delta).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(mom.all_simple());

  const Eigen::MatrixXd DI = delta * mix.signature().diagonal().asDiagonal();
  Eigen::VectorXd ev = DI.eigenvalues().real();
  std::sort(ev.data(), ev.data() + ev.size(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  CHECK((mom.whitened_values - ev).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd xi = mom.whitened_vectors;
  CHECK((xi.transpose() * xi - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  const BlockOracle o = block_oracle(params.B, params.pi, 2);
  CHECK((mom.whitened_values - o.lambda).cwiseAbs().maxCoeff() < 1e-12);
  const LimitLaw law = population_law(mix);
  CHECK(law.applicability == Applicability::full_joint);
  CHECK((law.eta - o.eta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((law.gamma - o.gamma).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(law.gamma(0, 1) == law.gamma(1, 0));
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(law.gamma).eigenvalues().minCoeff() > -1e-10);

  CHECK(code_of([&] { eta_rdpg(mom, mix); }) == ErrorCode::RequiresPositiveSemidefinite);
  CHECK(code_of([&] { gamma_rdpg(mom, mix); }) == ErrorCode::RequiresPositiveSemidefinite);
}

TEST_CASE("repeated eigenvalues are flagged") {
  const LatentMixture mix = sbm_to_grdpg(fig2_params());
  const PopulationMoments mom = population_moments(mix);
  CHECK(std::abs(mom.whitened_values(0) - 11.0 / 30) < 1e-12);
  CHECK(std::abs(mom.whitened_values(1) - 2.0 / 30) < 1e-12);
  CHECK(std::abs(mom.whitened_values(2) - 2.0 / 30) < 1e-12);
  CHECK(mom.simple == std::vector<bool>{true, false, false});
  CHECK(code_of([&] { eta(mom, mix); }) == ErrorCode::NotSimpleSpectrum);
  CHECK(code_of([&] { gamma(mom, mix); }) == ErrorCode::NotSimpleSpectrum);
  CHECK(population_law(mix).applicability == Applicability::inapplicable);
}

TEST_CASE("singular second moment") {
  const LatentMixture flat({{Eigen::Vector2d(0.5, 0.1), 0.5}, {Eigen::Vector2d(0.25, 0.05), 0.5}}, {2, 0});
  CHECK(code_of([&] { population_moments(flat); }) == ErrorCode::SingularDelta);
}

TEST_CASE("positive semidefinite models agree across formulas and with the block oracle") {
  CounterRng rng(7, 3);
  int tested = 0;
  while (tested < 30) {
    const int K = 2 + static_cast<int>(rng.uniform01() * 3);
    const int d = 1 + static_cast<int>(rng.uniform01() * K);
    std::vector<Atom> atoms(K);
    Eigen::VectorXd w(K);
    for (int k = 0; k < K; ++k) {
      atoms[k].nu = Eigen::VectorXd(d);
      for (int c = 0; c < d; ++c) atoms[k].nu(c) = rng.uniform01() / std::sqrt(d);
      w(k) = 0.2 + rng.uniform01();
    }
    w /= w.sum();
    for (int k = 0; k < K; ++k) atoms[k].weight = w(k);
    atoms[K - 1].weight = 1.0 - w.head(K - 1).sum();
    const LatentMixture mix(atoms, {d, 0});
    PopulationMoments mom;
    try {
      mom = population_moments(mix);
    } catch (const Error&) {
      continue;
    }
    if (!mom.all_simple()) continue;
    ++tested;
    CHECK((eta(mom, mix) - eta_rdpg(mom, mix)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((gamma(mom, mix) - gamma_rdpg(mom, mix)).cwiseAbs().maxCoeff() < 1e-10);
    const BlockOracle o = block_oracle(mix.form_table(), mix.weights(), d);
    CHECK((eta(mom, mix) - o.eta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((gamma(mom, mix) - o.gamma).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("law is invariant under indefinite orthogonal transforms") {
  const LatentMixture fig = sbm_to_grdpg(fig1_params());
  const LimitLaw base = population_law(fig);
  for (double t : {-0.8, 0.3, 0.5}) {
    const LatentMixture moved = indefinite_orthogonal_transform(fig, hyperbolic(2, 0, 1, t));
    const LimitLaw law = population_law(moved);
    CHECK((law.eta - base.eta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((law.gamma - base.gamma).cwiseAbs().maxCoeff() < 1e-10);
  }

  // Signature (2,1): rotate the positive block then boost.
  const BlockModelParams three{(Eigen::MatrixXd(3, 3) << 0.2, 0.6, 0.4, 0.6, 0.3, 0.5, 0.4, 0.5, 0.1).finished(),
                               Eigen::Vector3d(0.25, 0.35, 0.4)};
  const LatentMixture mix = sbm_to_grdpg(three);
  REQUIRE(mix.signature().q >= 1);
  const LimitLaw ref = population_law(mix);
  REQUIRE(ref.applicability == Applicability::full_joint);
  const int p = mix.signature().p;
  Eigen::MatrixXd W = hyperbolic(3, 0, p, 0.4);
  if (p >= 2) W = W * rotation(3, 0, 1, 1.1);
  const LimitLaw law = population_law(indefinite_orthogonal_transform(mix, W));
  CHECK((law.eta - ref.eta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((law.gamma - ref.gamma).cwiseAbs().maxCoeff() < 1e-10);

  const BlockOracle o = block_oracle(three.B, three.pi, 3);
  CHECK((ref.eta - o.eta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((ref.gamma - o.gamma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditional law for Erdos-Renyi is exact") {
  for (int n : {10, 57, 200}) {
    const double p = 0.3;
    const LatentSample s = sample_latents(er(p), n, 1);
    const ConditionalLaw law = conditional_law(s, eigenpairs_of_P(s));
    CHECK(std::abs(law.eta_tilde(0) - (1 - p)) < 1e-12);
    // Each pair k < l contributes 4 p (1 - p) / n^2 and each diagonal term p (1 - p) / n^2.
    const double expected = 4.0 * p * (1 - p) * (n * (n - 1) / 2.0) / (double(n) * n) + p * (1 - p) / n;
    CHECK(std::abs(law.sigma2(0) - expected) < 1e-12);
  }
}

TEST_CASE("conditional law matches brute-force sums") {
  const LatentMixture mixes[] = {sbm_to_grdpg(fig1_params()), sbm_to_grdpg(fig2_params()),
                                 sbm_to_grdpg({(Eigen::MatrixXd(3, 3) << 0.2, 0.6, 0.4, 0.6, 0.3, 0.5, 0.4, 0.5, 0.1)
                                                   .finished(),
                                               Eigen::Vector3d(0.25, 0.35, 0.4)})};
  for (const auto& mix : mixes) {
    for (int n : {30, 111, 200}) {
      const LatentSample s = sample_latents(mix, n, n);
      const SpectralResult eig = eigenpairs_of_P(s);
      const ConditionalLaw law = conditional_law(s, eig);
      const Eigen::MatrixXd P = probability_matrix(s).dense();
      for (int i = 0; i < eig.size(); ++i) {
        CHECK(std::abs(law.sigma2(i) - brute_sigma2(P, eig.vectors.col(i))) < 1e-12);
        CHECK(std::abs(law.eta_tilde(i) - brute_eta(P, eig.vectors.col(i), eig.values(i))) <
              1e-10 * std::max(1.0, std::abs(law.eta_tilde(i))));
        CHECK(law.sigma2(i) >= 0.0);
        CHECK(std::isfinite(law.sigma2_matrix_form(i)));
      }
    }
  }
}

TEST_CASE("conditional law is invariant to how the reduced vectors are supplied") {
  const LatentSample s = sample_latents(sbm_to_grdpg(fig1_params()), 150, 4);
  SpectralResult eig = eigenpairs_of_P(s);
  const Eigen::VectorXd with = conditional_eta(s, eig);
  eig.reduced_vectors.resize(0, 0);
  CHECK((conditional_eta(s, eig) - with).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("deterministic probabilities give zero fluctuation terms") {
  const LatentMixture det({{Eigen::Vector2d(1, 0), 0.4}, {Eigen::Vector2d(0, 1), 0.6}}, {2, 0});
  const LatentSample s = sample_latents(det, 60, 3);
  const SpectralResult eig = eigenpairs_of_P(s);
  const ConditionalLaw law = conditional_law(s, eig);
  CHECK((law.eta_tilde.array() == 0.0).all());
  CHECK((law.sigma2.array() == 0.0).all());

  const LatentSample one = sample_latents(er(1.0), 20, 1);
  const ConditionalLaw l1 = conditional_law(one, eigenpairs_of_P(one));
  CHECK(l1.eta_tilde(0) == 0.0);
  CHECK(l1.sigma2(0) == 0.0);

  const ProbabilityMatrix P = probability_matrix(s);
  const AdjacencyGraph A = sample_adjacency(P, 11);
  CHECK(A.dense() == P.dense());
  const SpectralResult A_eigs = top_eigenpairs_sparse(A, 2);
  REQUIRE(std::abs(A_eigs.values(0) - eig.values(0)) < 1e-9);
  const auto terms = decomposition_diagnostic(A, eig, A_eigs, P);
  for (const auto& t : terms) {
    CHECK(std::abs(t.term1) < 1e-12);
    CHECK(std::abs(t.term2) < 1e-12);
    CHECK(std::abs(t.residual) < 1e-9);
  }
}

TEST_CASE("decomposition terms match dense evaluation") {
  const LatentSample s = sample_latents(sbm_to_grdpg(fig1_params()), 300, 9);
  const ProbabilityMatrix P = probability_matrix(s);
  const AdjacencyGraph A = sample_adjacency(P, 10);
  const SpectralResult eig = eigenpairs_of_P(s);
  const SpectralResult A_eigs = top_eigenpairs_sparse(A, 2);
  const auto terms = decomposition_diagnostic(A, eig, A_eigs, P);
  const Eigen::MatrixXd E = A.dense() - P.dense();
  for (int i = 0; i < 2; ++i) {
    const Eigen::VectorXd u = eig.vectors.col(i);
    const double lam = eig.values(i), lam_hat = A_eigs.values(i);
    const double t1 = lam / lam_hat * u.dot(E * u);
    const double t2 = lam / (lam_hat * lam_hat) * (E * u).squaredNorm();
    CHECK(std::abs(terms[i].term1 - t1) < 1e-9);
    CHECK(std::abs(terms[i].term2 - t2) < 1e-9);
    CHECK(std::abs(terms[i].term1 + terms[i].term2 + terms[i].residual - (lam_hat - lam)) < 1e-9);
  }
}
