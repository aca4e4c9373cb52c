#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "speclab/model.hpp"

namespace speclab {

struct SeedRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

/// Realized latent positions: row i of X is the atom nu_{tau_i}.
struct LatentSample {
  Eigen::MatrixXd X;
  std::vector<std::uint32_t> tau;
  Signature signature;
  SeedRecord seed;

  int n() const noexcept { return static_cast<int>(X.rows()); }
  int dim() const noexcept { return static_cast<int>(X.cols()); }
};

/// P = X I_{p,q} X^T, stored through the block labels: P(i,j) is the clamped
/// form between the atoms of i and j. Matches the dense matrix entrywise but
/// costs O(n + K^2) memory.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix(std::vector<std::uint32_t> labels, Eigen::MatrixXd block_forms);

  int n() const noexcept { return static_cast<int>(labels_.size()); }
  int blocks() const noexcept { return static_cast<int>(forms_.rows()); }
  double operator()(int i, int j) const { return forms_(labels_[i], labels_[j]); }
  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }
  const Eigen::MatrixXd& block_forms() const noexcept { return forms_; }
  /// Number of vertices carrying each label.
  Eigen::VectorXd block_counts() const;

  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd dense() const;

 private:
  std::vector<std::uint32_t> labels_;
  Eigen::MatrixXd forms_;
};

/// Symmetric 0/1 matrix in compressed sparse row form with sorted neighbor
/// lists. A self-loop (i,i) is stored once in row i.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  /// Builds from undirected pairs. Pairs may come in either orientation but
  /// must be unique and in range.
  static AdjacencyGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                   bool loops_allowed = true);

  int n() const noexcept { return n_; }
  bool loops_allowed() const noexcept { return loops_allowed_; }
  SeedRecord seed() const noexcept { return seed_; }

  std::span<const std::uint32_t> neighbors(int i) const {
    return {cols_.data() + offsets_[i], cols_.data() + offsets_[i + 1]};
  }
  int degree(int i) const { return static_cast<int>(offsets_[i + 1] - offsets_[i]); }
  bool has_edge(int i, int j) const;
  /// Undirected edge count, self-loops counted once.
  std::size_t edge_count() const;
  std::size_t nonzeros() const noexcept { return cols_.size(); }
  int max_degree() const;
  std::vector<std::pair<int, int>> edge_list() const;

  /// y = A x.
  void multiply(std::span<const double> x, std::span<double> y) const;
  Eigen::MatrixXd dense() const;

 private:
  friend AdjacencyGraph sample_adjacency(const LatentSample&, std::uint64_t, bool);
  friend AdjacencyGraph sample_adjacency(const ProbabilityMatrix&, std::uint64_t, bool);

  int n_ = 0;
  bool loops_allowed_ = true;
  SeedRecord seed_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> cols_;
};

/// Draws tau_i i.i.d. from the mixture weights and sets X_i = nu_{tau_i}.
LatentSample sample_latents(const LatentMixture& mix, int n, std::uint64_t seed);

/// Throws FormOutOfRange when a pairwise form leaves [-1e-10, 1 + 1e-10] and
/// InvalidArgument when rows sharing a label differ.
ProbabilityMatrix probability_matrix(const LatentSample& sample);

/// For i <= j in row-major order draws a_ij ~ Bernoulli(P_ij). The diagonal is
/// always drawn; `hollow` discards it afterwards, so a hollow graph is the
/// looped graph of the same seed with its diagonal removed.
AdjacencyGraph sample_adjacency(const LatentSample& sample, std::uint64_t seed, bool hollow = false);
AdjacencyGraph sample_adjacency(const ProbabilityMatrix& P, std::uint64_t seed, bool hollow = false);

}  // namespace speclab
