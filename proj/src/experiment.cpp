#include "speclab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "speclab/rng.hpp"
#include "speclab/sampling.hpp"

namespace speclab {

std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::population ? "population" : "conditional";
}

bool ExperimentReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

std::vector<int> leading(int d) {
  std::vector<int> idx(d);
  for (int i = 0; i < d; ++i) idx[i] = i;
  return idx;
}

int tracked_dim(const ExperimentConfig& cfg) {
  return cfg.d_override.value_or(cfg.model.dim());
}

void validate(const ExperimentConfig& cfg) {
  const int d = cfg.model.dim();
  if (cfg.replicates < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 replicates");
  if (cfg.n < 10 * d) {
    throw Error(ErrorCode::InvalidArgument,
                "n = " + std::to_string(cfg.n) + " is below 10 * d = " + std::to_string(10 * d));
  }
  if (cfg.d_override && (*cfg.d_override < 1 || *cfg.d_override > d)) {
    throw Error(ErrorCode::InvalidArgument, "d override must lie in [1, " + std::to_string(d) + "]");
  }
  if (cfg.threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  }
  for (const auto& s : cfg.weights) {
    if (s.size() != tracked_dim(cfg)) {
      throw Error(ErrorCode::InvalidArgument, "weight vector length must equal the tracked dimension");
    }
  }
  if (cfg.mode == Mode::conditional && !cfg.weights.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "weighted combinations are only tested against the population law");
  }
}

SpectralResult solve_with_retry(const AdjacencyGraph& A, int d, const LanczosOptions& options,
                                bool& retried) {
  try {
    return top_eigenpairs_sparse(A, d, options);
  } catch (const NoConvergenceError&) {
    LanczosOptions doubled = options;
    doubled.max_iter = 2 * (options.max_iter > 0 ? options.max_iter : 10 * d + 200);
    retried = true;
    return top_eigenpairs_sparse(A, d, doubled);
  }
}

}  // namespace

ReplicateRecord run_replicate(const ExperimentConfig& cfg, int replicate, int d,
                              const LatentSample* fixed_sample, const SpectralResult* fixed_P_eigs,
                              const ConditionalLaw* fixed_law) {
  const auto index = static_cast<std::uint64_t>(replicate);
  LatentSample fresh;
  SpectralResult fresh_eigs;
  const LatentSample* sample = fixed_sample;
  const SpectralResult* P_eigs = fixed_P_eigs;
  if (!sample) {
    fresh = sample_latents(cfg.model, cfg.n, replicate_seed(cfg.master_seed, index, SeedPurpose::latents));
    fresh_eigs = permute(eigenpairs_of_P(fresh), leading(d));
    sample = &fresh;
    P_eigs = &fresh_eigs;
  }

  const ProbabilityMatrix P = probability_matrix(*sample);
  const AdjacencyGraph A =
      sample_adjacency(P, replicate_seed(cfg.master_seed, index, SeedPurpose::adjacency), cfg.hollow);

  ReplicateRecord rec;
  rec.replicate = replicate;
  const SpectralResult raw = solve_with_retry(A, d, cfg.solver, rec.retried);
  rec.solver_iterations = raw.iterations;

  const double sign_threshold = 2.0 * cfg.solver.tol * std::max(1, A.max_degree());
  const Matching match = match_eigenvalues(
      std::span<const double>(raw.values.data(), d), std::span<const double>(P_eigs->values.data(), d),
      sign_threshold);
  rec.ambiguous_match = match.ambiguous;
  rec.identity_match = match.perm == leading(d);
  const SpectralResult A_eigs = permute(raw, match.perm);

  rec.lambda_hat = A_eigs.values;
  rec.lambda = P_eigs->values.head(d);
  rec.centered = rec.lambda_hat - rec.lambda;
  if (fixed_law) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) {
      const double sigma = std::sqrt(fixed_law->sigma2[i]);
      z[i] = sigma > 0.0 ? (rec.centered[i] - fixed_law->eta_tilde[i]) / sigma : 0.0;
    }
    rec.standardized = z;
  }
  if (cfg.diagnostics) rec.diagnostics = decomposition_diagnostic(A, *P_eigs, A_eigs, P);
  return rec;
}

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

std::string coordinate_label(int i) { return "lambda_" + std::to_string(i + 1); }

std::string combination_label(const Eigen::VectorXd& s) {
  std::ostringstream out;
  out << "combo(";
  for (Eigen::Index i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
  out << ")";
  return out.str();
}

// KS test of `values` against N(mean, variance), or, for a point-mass
// reference, a check that every value sits on the mean.
void test_against(ExperimentReport& report, const std::string& label, const std::vector<double>& values,
                  double mean, double variance, bool fitted, double alpha_each, double scale) {
  if (!(variance > 0.0)) {
    double worst = 0.0;
    for (double v : values) worst = std::max(worst, std::abs(v - mean));
    const double limit = 1e-8 * std::max(1.0, scale);
    report.checks.push_back({"degenerate " + label, worst, limit, worst <= limit,
                             "max |value - mean| <= 1e-8 * max(1, |lambda|) when the variance is 0"});
    return;
  }
  if (static_cast<int>(values.size()) < kKsMinSamples) {
    report.checks.push_back({"ks " + label, static_cast<double>(values.size()), kKsMinSamples, false,
                             "KS needs at least 8 replicates"});
    return;
  }
  CoordinateTest t{label, mean, variance, fitted, ks_test(values, mean, variance)};
  report.tests.push_back(t);
  report.checks.push_back({std::string(fitted ? "ks-fitted " : "ks ") + label, t.ks.p_value, alpha_each,
                           t.ks.p_value > alpha_each, "KS p-value > alpha / tests"});
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const int d = tracked_dim(cfg);
  const int R = cfg.replicates;

  ExperimentReport report;
  report.mode = cfg.mode;
  report.n = cfg.n;
  report.d = d;
  report.replicates = R;
  report.master_seed = cfg.master_seed;

  LatentSample fixed_sample;
  SpectralResult fixed_full, fixed_eigs;
  ConditionalLaw fixed_law;
  if (cfg.mode == Mode::conditional) {
    fixed_sample = sample_latents(cfg.model, cfg.n, replicate_seed(cfg.master_seed, 0, SeedPurpose::latents));
    fixed_full = eigenpairs_of_P(fixed_sample);
    const ConditionalLaw full_law = conditional_law(fixed_sample, fixed_full);
    fixed_eigs = permute(fixed_full, leading(d));
    fixed_law.eta_tilde = full_law.eta_tilde.head(d);
    fixed_law.sigma2 = full_law.sigma2.head(d);
    fixed_law.sigma2_matrix_form = full_law.sigma2_matrix_form.head(d);
    report.conditional = fixed_law;
    report.fixed_lambda = fixed_eigs.values;
  } else {
    LimitLaw law = population_law(cfg.model);
    if (law.applicability == Applicability::full_joint) {
      law.eta = law.eta.head(d).eval();
      law.gamma = law.gamma.topLeftCorner(d, d).eval();
    }
    report.population = law;
  }

  std::vector<std::optional<ReplicateRecord>> results(R);
  std::vector<std::exception_ptr> errors(R);
  std::vector<std::string> failures(R);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < R; r = next++) {
      try {
        if (cfg.mode == Mode::conditional) {
          results[r] = run_replicate(cfg, r, d, &fixed_sample, &fixed_eigs, &fixed_law);
        } else {
          results[r] = run_replicate(cfg, r, d, nullptr, nullptr, nullptr);
        }
      } catch (const NoConvergenceError& e) {
        failures[r] = e.what();
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const int workers = std::min(cfg.threads, R);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (int r = 0; r < R; ++r) {
    if (!results[r]) {
      ++report.failed_replicates;
      continue;
    }
    report.records.push_back(std::move(*results[r]));
  }
  if (report.failed_replicates * 100 > R) {
    const auto first = std::find_if(failures.begin(), failures.end(), [](auto& s) { return !s.empty(); });
    std::ostringstream msg;
    msg << report.failed_replicates << " of " << R << " replicates failed to converge (first: replicate "
        << (first - failures.begin()) << ": " << *first << ")";
    throw Error(ErrorCode::TooManyFailures, msg.str());
  }
  if (report.records.size() < 2) {
    throw Error(ErrorCode::TooManyFailures, "fewer than two replicates completed");
  }

  const int m = static_cast<int>(report.records.size());
  Eigen::MatrixXd centered(m, d), standardized(m, d);
  for (int r = 0; r < m; ++r) {
    const auto& rec = report.records[r];
    centered.row(r) = rec.centered.transpose();
    if (rec.standardized) standardized.row(r) = rec.standardized->transpose();
    report.retried_replicates += rec.retried ? 1 : 0;
    report.ambiguous_matches += rec.ambiguous_match ? 1 : 0;
    report.identity_matches += rec.identity_match ? 1 : 0;
  }
  report.moments = empirical_moments(centered);

  const int tests = d + static_cast<int>(cfg.weights.size());
  const double alpha_each = cfg.alpha / tests;
  const double scale = std::max(1.0, centered.size() ? report.records.front().lambda.cwiseAbs().maxCoeff() : 1.0);

  if (cfg.mode == Mode::conditional) {
    for (int i = 0; i < d; ++i) {
      const std::string label = coordinate_label(i);
      if (fixed_law.sigma2[i] > 0.0) {
        test_against(report, label + " standardized", column(standardized, i), 0.0, 1.0, false, alpha_each,
                     scale);
      } else {
        test_against(report, label, column(centered, i), fixed_law.eta_tilde[i], 0.0, false, alpha_each,
                     scale);
      }
    }
    return report;
  }

  const LimitLaw& law = *report.population;
  if (law.applicability == Applicability::full_joint) {
    for (int i = 0; i < d; ++i) {
      test_against(report, coordinate_label(i), column(centered, i), law.eta[i], law.gamma(i, i), false,
                   alpha_each, scale);
    }
    for (const auto& s : cfg.weights) {
      const Eigen::VectorXd combo = centered * s;
      test_against(report, combination_label(s), std::vector<double>(combo.data(), combo.data() + m),
                   s.dot(law.eta), s.dot(law.gamma * s), false, alpha_each, scale);
    }
    for (int i = 0; i < d; ++i) {
      const double g = law.gamma(i, i);
      if (!(g > 0.0)) continue;
      const double mean_gap = std::abs(report.moments.mean[i] - law.eta[i]);
      const double mean_limit = 4.0 * std::sqrt(g / m);
      report.checks.push_back({"mean " + coordinate_label(i), mean_gap, mean_limit, mean_gap <= mean_limit,
                               "|mean - eta_i| <= 4 sqrt(Gamma_ii / m)"});
      const double var_gap = std::abs(report.moments.cov(i, i) - g);
      const double var_limit = 5.0 * g * std::sqrt(2.0 / m);
      report.checks.push_back({"variance " + coordinate_label(i), var_gap, var_limit, var_gap <= var_limit,
                               "|cov_ii - Gamma_ii| <= 5 Gamma_ii sqrt(2 / m)"});
    }
    if (d >= 2) {
      const double rate = static_cast<double>(report.identity_matches) / m;
      report.checks.push_back({"identity matching", rate, 0.99, rate >= 0.99,
                               "identity matching in >= 99% of replicates"});
    }
  } else {
    // No joint law: per-coordinate normality against the fitted normal only.
    for (int i = 0; i < d; ++i) {
      test_against(report, coordinate_label(i), column(centered, i), report.moments.mean[i],
                   report.moments.cov(i, i), true, alpha_each, scale);
    }
    for (const auto& s : cfg.weights) {
      const Eigen::VectorXd combo = centered * s;
      test_against(report, combination_label(s), std::vector<double>(combo.data(), combo.data() + m),
                   report.moments.mean.dot(s), s.dot(report.moments.cov * s), true, alpha_each, scale);
    }
  }
  return report;
}

}  // namespace speclab
