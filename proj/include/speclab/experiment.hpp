#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "speclab/limits.hpp"
#include "speclab/model.hpp"
#include "speclab/spectral.hpp"
#include "speclab/stats.hpp"

namespace speclab {

/// population: fresh latent positions every replicate, compared with the
/// unconditional law (eta, Gamma).
/// conditional: one latent sample reused by every replicate, compared with
/// (eta_tilde(X), sigma^2(X)).
enum class Mode { population, conditional };

std::string_view to_string(Mode mode) noexcept;

struct ExperimentConfig {
  LatentMixture model;
  int n = 0;
  int replicates = 0;
  std::uint64_t master_seed = 0;
  Mode mode = Mode::population;
  /// Track only the leading d_override eigenvalues.
  std::optional<int> d_override;
  LanczosOptions solver;
  /// Linear combinations s^T (lambda_hat - lambda) to test (population mode).
  std::vector<Eigen::VectorXd> weights;
  bool diagnostics = false;
  bool hollow = false;
  int threads = 1;
  double alpha = 0.01;
};

struct ReplicateRecord {
  int replicate = 0;
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd lambda;
  Eigen::VectorXd centered;
  std::optional<Eigen::VectorXd> standardized;
  std::optional<std::vector<DecompositionTerms>> diagnostics;
  bool identity_match = true;
  bool ambiguous_match = false;
  int solver_iterations = 0;
  bool retried = false;
};

struct CoordinateTest {
  std::string label;
  double reference_mean = 0.0;
  double reference_variance = 0.0;
  bool fitted = false;  // reference moments estimated from the sample itself
  KsResult ks;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string rule;
};

struct ExperimentReport {
  Mode mode = Mode::population;
  int n = 0;
  int d = 0;
  int replicates = 0;
  std::uint64_t master_seed = 0;
  int failed_replicates = 0;
  int retried_replicates = 0;
  int ambiguous_matches = 0;
  int identity_matches = 0;

  Moments moments;
  std::optional<LimitLaw> population;
  std::optional<ConditionalLaw> conditional;
  /// Eigenvalues of P for the fixed latent sample (conditional mode).
  Eigen::VectorXd fixed_lambda;

  std::vector<CoordinateTest> tests;
  std::vector<Check> checks;
  std::vector<ReplicateRecord> records;

  bool all_passed() const;
};

/// Runs every replicate and aggregates them in replicate order, so the report
/// does not depend on the number of worker threads.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Per-replicate quantities for one replicate. Exposed for tests.
ReplicateRecord run_replicate(const ExperimentConfig& cfg, int replicate, int d,
                              const LatentSample* fixed_sample, const SpectralResult* fixed_P_eigs,
                              const ConditionalLaw* fixed_law);

}  // namespace speclab
