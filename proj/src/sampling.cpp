#include "speclab/sampling.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

#include "speclab/rng.hpp"

namespace speclab {

namespace {
constexpr std::uint64_t kLatentStream = 0;
constexpr std::uint64_t kAdjacencyStream = 1;
}  // namespace

ProbabilityMatrix::ProbabilityMatrix(std::vector<std::uint32_t> labels, Eigen::MatrixXd block_forms)
    : labels_(std::move(labels)), forms_(std::move(block_forms)) {
  for (auto l : labels_) {
    if (l >= forms_.rows()) throw Error(ErrorCode::InvalidArgument, "label exceeds block count");
  }
}

Eigen::VectorXd ProbabilityMatrix::block_counts() const {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(blocks());
  for (auto l : labels_) counts[l] += 1.0;
  return counts;
}

Eigen::VectorXd ProbabilityMatrix::multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd block_sums = Eigen::VectorXd::Zero(blocks());
  for (int j = 0; j < n(); ++j) block_sums[labels_[j]] += x[j];
  const Eigen::VectorXd per_block = forms_ * block_sums;
  Eigen::VectorXd y(n());
  for (int i = 0; i < n(); ++i) y[i] = per_block[labels_[i]];
  return y;
}

Eigen::MatrixXd ProbabilityMatrix::dense() const {
  Eigen::MatrixXd P(n(), n());
  for (int j = 0; j < n(); ++j) {
    for (int i = 0; i < n(); ++i) P(i, j) = forms_(labels_[i], labels_[j]);
  }
  return P;
}

AdjacencyGraph AdjacencyGraph::from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                          bool loops_allowed) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative vertex count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> upper;
  upper.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      std::ostringstream msg;
      msg << "edge (" << a << ", " << b << ") out of range for n = " << n;
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    if (a == b && !loops_allowed) {
      throw Error(ErrorCode::InvalidArgument,
                  "self-loop at " + std::to_string(a) + " in a graph without loops");
    }
    upper.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(upper.begin(), upper.end());
  if (auto dup = std::adjacent_find(upper.begin(), upper.end()); dup != upper.end()) {
    std::ostringstream msg;
    msg << "duplicate edge (" << dup->first << ", " << dup->second << ")";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }

  AdjacencyGraph g;
  g.n_ = n;
  g.loops_allowed_ = loops_allowed;
  std::vector<std::size_t> degree(n, 0);
  for (auto [i, j] : upper) {
    ++degree[i];
    if (i != j) ++degree[j];
  }
  g.offsets_.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.cols_.resize(g.offsets_[n]);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  // Sorted (i, j) with i <= j: row j receives its lower entries in ascending i
  // before its own upper entries, so every row ends up sorted.
  for (auto [i, j] : upper) {
    g.cols_[cursor[i]++] = j;
    if (i != j) g.cols_[cursor[j]++] = i;
  }
  return g;
}

bool AdjacencyGraph::has_edge(int i, int j) const {
  auto row = neighbors(i);
  return std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(j));
}

std::size_t AdjacencyGraph::edge_count() const {
  std::size_t loops = 0;
  for (int i = 0; i < n_; ++i) loops += has_edge(i, i) ? 1 : 0;
  return (cols_.size() - loops) / 2 + loops;
}

int AdjacencyGraph::max_degree() const {
  int best = 0;
  for (int i = 0; i < n_; ++i) best = std::max(best, degree(i));
  return best;
}

std::vector<std::pair<int, int>> AdjacencyGraph::edge_list() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edge_count());
  for (int i = 0; i < n_; ++i) {
    for (auto j : neighbors(i)) {
      if (static_cast<int>(j) >= i) out.emplace_back(i, static_cast<int>(j));
    }
  }
  return out;
}

void AdjacencyGraph::multiply(std::span<const double> x, std::span<double> y) const {
  const std::uint32_t* cols = cols_.data();
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) acc += x[cols[k]];
    y[i] = acc;
  }
}

Eigen::MatrixXd AdjacencyGraph::dense() const {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (auto j : neighbors(i)) A(i, j) = 1.0;
  }
  return A;
}

LatentSample sample_latents(const LatentMixture& mix, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  std::vector<double> cumulative(mix.size());
  double running = 0.0;
  for (int k = 0; k < mix.size(); ++k) {
    running += mix.atoms()[k].weight;
    cumulative[k] = running;
  }
  // Last atom with positive weight absorbs round-off in the cumulative sum.
  int last_positive = mix.size() - 1;
  while (last_positive > 0 && mix.atoms()[last_positive].weight == 0.0) --last_positive;

  LatentSample sample;
  sample.signature = mix.signature();
  sample.seed = {seed, kLatentStream};
  sample.X.resize(n, mix.dim());
  sample.tau.resize(n);
  CounterRng rng(seed, kLatentStream);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const int k = std::min(static_cast<int>(it - cumulative.begin()), last_positive);
    sample.tau[i] = static_cast<std::uint32_t>(k);
    sample.X.row(i) = mix.atoms()[k].nu.transpose();
  }
  return sample;
}

ProbabilityMatrix probability_matrix(const LatentSample& sample) {
  const int n = sample.n();
  if (static_cast<int>(sample.tau.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "tau length does not match X");
  }
  if (sample.dim() != sample.signature.dim()) {
    throw Error(ErrorCode::InvalidArgument, "X columns do not match the signature");
  }
  std::uint32_t K = 0;
  for (auto t : sample.tau) K = std::max(K, t + 1);

  std::vector<std::optional<int>> representative(K);
  for (int i = 0; i < n; ++i) {
    auto& rep = representative[sample.tau[i]];
    if (!rep) {
      rep = i;
    } else if ((sample.X.row(i) - sample.X.row(*rep)).cwiseAbs().maxCoeff() > 1e-12) {
      std::ostringstream msg;
      msg << "rows " << *rep << " and " << i << " share label " << sample.tau[i]
          << " but hold different latent positions";
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
  }

  Eigen::MatrixXd forms = Eigen::MatrixXd::Zero(K, K);
  for (std::uint32_t a = 0; a < K; ++a) {
    if (!representative[a]) continue;
    for (std::uint32_t b = a; b < K; ++b) {
      if (!representative[b]) continue;
      const double raw = indefinite_form(sample.X.row(*representative[a]).transpose(),
                                         sample.X.row(*representative[b]).transpose(),
                                         sample.signature);
      forms(a, b) = forms(b, a) = clamp_form(raw);
    }
  }
  return ProbabilityMatrix(sample.tau, std::move(forms));
}

AdjacencyGraph sample_adjacency(const LatentSample& sample, std::uint64_t seed, bool hollow) {
  return sample_adjacency(probability_matrix(sample), seed, hollow);
}

AdjacencyGraph sample_adjacency(const ProbabilityMatrix& P, std::uint64_t seed, bool hollow) {
  const int n = P.n();
  const int K = P.blocks();
  // Row-major copy of the block table for the inner loop.
  std::vector<double> table(static_cast<std::size_t>(K) * K);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) table[static_cast<std::size_t>(a) * K + b] = P.block_forms()(a, b);
  }
  const auto& labels = P.labels();

  CounterRng rng(seed, kAdjacencyStream);
  std::vector<std::uint32_t> upper_cols;
  std::vector<std::size_t> upper_offsets(n + 1, 0);
  std::vector<std::size_t> degree(n, 0);
  for (int i = 0; i < n; ++i) {
    const double* row = table.data() + static_cast<std::size_t>(labels[i]) * K;
    for (int j = i; j < n; ++j) {
      const bool edge = rng.uniform01() < row[labels[j]];
      if (edge && !(hollow && i == j)) {
        upper_cols.push_back(static_cast<std::uint32_t>(j));
        ++degree[i];
        if (i != j) ++degree[j];
      }
    }
    upper_offsets[i + 1] = upper_cols.size();
  }

  AdjacencyGraph g;
  g.n_ = n;
  g.loops_allowed_ = !hollow;
  g.seed_ = {seed, kAdjacencyStream};
  g.offsets_.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.cols_.resize(g.offsets_[n]);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = upper_offsets[i]; k < upper_offsets[i + 1]; ++k) {
      const std::uint32_t j = upper_cols[k];
      g.cols_[cursor[i]++] = j;
      if (j != static_cast<std::uint32_t>(i)) g.cols_[cursor[j]++] = static_cast<std::uint32_t>(i);
    }
  }
  return g;
}

}  // namespace speclab
