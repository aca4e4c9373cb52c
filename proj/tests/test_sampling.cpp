#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <Eigen/SVD>

#include "speclab/model.hpp"
#include "speclab/rng.hpp"
#include "speclab/sampling.hpp"

using namespace speclab;

namespace {

LatentMixture er(double p) { return LatentMixture({{Eigen::VectorXd::Constant(1, std::sqrt(p)), 1.0}}, {1, 0}); }

LatentMixture fig1() {
  return sbm_to_grdpg({(Eigen::MatrixXd(2, 2) << 0.3, 0.5, 0.5, 0.3).finished(), Eigen::Vector2d(0.3, 0.7)});
}

// Smallest k with P(Bin(n, p) <= k) >= q, by summing the exact pmf.
int binomial_quantile(int n, double p, double q) {
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                           k * std::log(p) + (n - k) * std::log1p(-p);
    cdf += std::exp(log_pmf);
    if (cdf >= q) return k;
  }
  return n;
}

void check_symmetric_binary(const AdjacencyGraph& g) {
  const Eigen::MatrixXd A = g.dense();
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(((A.array() == 0.0) || (A.array() == 1.0)).all());
  for (int i = 0; i < g.n(); ++i) {
    const auto nb = g.neighbors(i);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
  }
}

}  // namespace

TEST_CASE("single-atom latents") {
  const LatentSample s = sample_latents(er(0.5), 5, 1);
  CHECK(s.n() == 5);
  CHECK((s.X.array() == std::sqrt(0.5)).all());
  CHECK(std::all_of(s.tau.begin(), s.tau.end(), [](auto t) { return t == 0; }));
}

TEST_CASE("latents are deterministic in the seed") {
  const auto mix = fig1();
  const LatentSample a = sample_latents(mix, 1000, 99);
  const LatentSample b = sample_latents(mix, 1000, 99);
  const LatentSample c = sample_latents(mix, 1000, 100);
  CHECK(a.tau == b.tau);
  CHECK(a.X == b.X);
  CHECK(a.tau != c.tau);
  for (int i = 0; i < a.n(); ++i) CHECK(a.X.row(i) == mix.atoms()[a.tau[i]].nu.transpose());
}

TEST_CASE("block frequencies follow the weights") {
  const int n = 100000;
  const LatentSample s = sample_latents(fig1(), n, 12345);
  const long count0 = std::count(s.tau.begin(), s.tau.end(), 0u);
  const int lo = binomial_quantile(n, 0.3, 0.0005);
  const int hi = binomial_quantile(n, 0.3, 0.9995);
  CHECK(count0 >= lo);
  CHECK(count0 <= hi);
  CHECK(std::abs(count0 / double(n) - 0.3) < 0.01);
}

TEST_CASE("probability matrix entries") {
  const LatentSample e = sample_latents(er(0.5), 3, 1);
  CHECK((probability_matrix(e).dense().array() - 0.5).abs().maxCoeff() < 1e-15);

  const LatentSample s = sample_latents(fig1(), 200, 5);
  const ProbabilityMatrix P = probability_matrix(s);
  for (int i = 0; i < s.n(); ++i)
    for (int j = 0; j < s.n(); ++j) {
      const double expected = s.tau[i] == s.tau[j] ? 0.3 : 0.5;
      CHECK(P(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }

  const Eigen::MatrixXd dense = P.dense();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) rank += sv(k) > 1e-8 * sv(0);
  CHECK(rank <= 2);

  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(s.n(), -1.0, 2.0);
  CHECK((P.multiply(x) - dense * x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(P.block_counts().sum() == s.n());
}

TEST_CASE("out-of-range forms are rejected") {
  // Forms within the mixture are valid but an edited sample is not.
  LatentSample s = sample_latents(er(0.5), 4, 1);
  s.X(0, 0) = 2.0;
  CHECK_THROWS_AS(probability_matrix(s), Error);
}

TEST_CASE("degenerate probabilities give empty and complete graphs") {
  const LatentMixture zero({{Eigen::VectorXd::Zero(1), 1.0}}, {1, 0});
  CHECK(sample_adjacency(sample_latents(zero, 10, 1), 3).edge_count() == 0);
  const ProbabilityMatrix P0({0, 0, 0, 0}, Eigen::MatrixXd::Zero(1, 1));
  CHECK(sample_adjacency(P0, 3).edge_count() == 0);

  const AdjacencyGraph full = sample_adjacency(sample_latents(er(1.0), 30, 1), 3);
  CHECK(full.edge_count() == 30u * 31u / 2u);
  CHECK(full.nonzeros() == 30u * 30u);
  for (int i = 0; i < 30; ++i) CHECK(full.has_edge(i, i));

  const AdjacencyGraph hollow = sample_adjacency(sample_latents(er(1.0), 30, 1), 3, true);
  CHECK(hollow.edge_count() == 30u * 29u / 2u);
  for (int i = 0; i < 30; ++i) CHECK_FALSE(hollow.has_edge(i, i));
}

TEST_CASE("Erdos-Renyi edge count") {
  const int n = 2000;
  const AdjacencyGraph g = sample_adjacency(sample_latents(er(0.5), n, 8), 9);
  const double pairs = n * (n + 1.0) / 2.0;
  const double mean = 0.5 * pairs, sd = std::sqrt(0.25 * pairs);
  CHECK(std::abs(double(g.edge_count()) - mean) <= 4 * sd);
  check_symmetric_binary(g);
}

TEST_CASE("hollow graph is the looped graph without its diagonal") {
  const LatentSample s = sample_latents(fig1(), 300, 4);
  const AdjacencyGraph looped = sample_adjacency(s, 17);
  const AdjacencyGraph hollow = sample_adjacency(s, 17, true);
  Eigen::MatrixXd A = looped.dense();
  A.diagonal().setZero();
  CHECK(A == hollow.dense());
  check_symmetric_binary(looped);
  CHECK(sample_adjacency(s, 17).edge_list() == looped.edge_list());
  CHECK(sample_adjacency(s, 18).edge_list() != looped.edge_list());
}

TEST_CASE("average adjacency converges to P") {
  const int n = 50, m = 2000;
  const LatentSample s = sample_latents(fig1(), n, 21);
  const Eigen::MatrixXd P = probability_matrix(s).dense();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < m; ++r) sum += sample_adjacency(s, replicate_seed(77, r, SeedPurpose::adjacency)).dense();
  CHECK((sum / m - P).cwiseAbs().maxCoeff() <= 5 * std::sqrt(0.25 / m));
}

TEST_CASE("matrix-vector product matches the dense matrix") {
  const AdjacencyGraph g = sample_adjacency(sample_latents(fig1(), 257, 2), 3);
  std::vector<double> x(257), y(257);
  for (int i = 0; i < 257; ++i) x[i] = std::sin(i + 1.0);
  g.multiply(x, y);
  const Eigen::VectorXd ref = g.dense() * Eigen::Map<Eigen::VectorXd>(x.data(), 257);
  CHECK((Eigen::Map<Eigen::VectorXd>(y.data(), 257) - ref).cwiseAbs().maxCoeff() < 1e-12);
  int maxdeg = 0;
  for (int i = 0; i < g.n(); ++i) maxdeg = std::max(maxdeg, g.degree(i));
  CHECK(g.max_degree() == maxdeg);
}

TEST_CASE("from_edges validation") {
  const AdjacencyGraph g = AdjacencyGraph::from_edges(4, {{1, 0}, {2, 2}, {3, 1}});
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(g.has_edge(2, 2));
  CHECK(g.edge_count() == 3);
  CHECK(g.nonzeros() == 5);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(4, {{0, 4}}), Error);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(4, {{0, 1}, {1, 0}}), Error);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(4, {{2, 2}}, false), Error);
}

TEST_CASE("replicate seeds") {
  const std::uint64_t s = 0xabcdef;
  CHECK(replicate_seed(s, 0, SeedPurpose::latents) != replicate_seed(s, 0, SeedPurpose::adjacency));
  CHECK(replicate_seed(s, 5, SeedPurpose::latents) == replicate_seed(s, 5, SeedPurpose::latents));
  static_assert(replicate_seed(1, 2, SeedPurpose::adjacency) == replicate_seed(1, 2, SeedPurpose::adjacency));

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(2000000);
  for (int i = 0; i < 500000; ++i) {
    seen.insert(replicate_seed(s, i, SeedPurpose::latents));
    seen.insert(replicate_seed(s, i, SeedPurpose::adjacency));
  }
  CHECK(seen.size() == 1000000);
}

TEST_CASE("counter rng is uniform-ish and reproducible") {
  CounterRng a(5, 1), b(5, 1), c(5, 2);
  double sum = 0.0;
  bool differs = false;
  for (int i = 0; i < 100000; ++i) {
    const double u = a.uniform01();
    if (u != b.uniform01()) FAIL("stream mismatch");
    differs |= u != c.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(differs);
  CHECK(std::abs(sum / 100000 - 0.5) < 4 * std::sqrt(1.0 / 12 / 100000));
}
