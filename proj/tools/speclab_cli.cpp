// speclab: sample SBM / GRDPG graphs, compute edge eigenvalues, evaluate their
// limiting normal laws and check them by Monte Carlo.
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime, 4 experiment checks failed.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "speclab/experiment.hpp"
#include "speclab/io.hpp"
#include "speclab/limits.hpp"
#include "speclab/rng.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectral.hpp"

namespace fs = std::filesystem;
using namespace speclab;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3, kChecksFailed = 4 };

Eigen::VectorXd parse_weights(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad weight vector `" + text + "`");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int default_threads() {
  if (const char* env = std::getenv("SPECLAB_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring SPECLAB_THREADS=" << env << "\n";
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
}

struct Options {
  std::string model;
  std::string out = ".";
  std::uint64_t seed = 1;
  int n = 0;
  bool hollow = false;

  std::string graph;
  int d = 0;
  double tol = 1e-10;
  int max_iter = 0;
  bool vectors = false;

  std::string latents;

  int replicates = 0;
  std::string mode = "population";
  std::vector<std::string> weights;
  bool diagnostics = false;
  int threads = 0;
  double alpha = 0.01;
};

int cmd_sample(const Options& o) {
  const auto model = io::load_model(o.model);
  ensure_dir(o.out);
  const LatentSample sample = sample_latents(model.mixture, o.n, replicate_seed(o.seed, 0, SeedPurpose::latents));
  const AdjacencyGraph graph =
      sample_adjacency(sample, replicate_seed(o.seed, 0, SeedPurpose::adjacency), o.hollow);
  io::write_latent_csv(fs::path(o.out) / "latents.csv", sample);
  io::write_edge_list(fs::path(o.out) / "graph.edges", graph);
  std::cout << "wrote " << (fs::path(o.out) / "latents.csv").string() << " and "
            << (fs::path(o.out) / "graph.edges").string() << " (" << graph.edge_count() << " edges)\n";
  return kOk;
}

int cmd_spectrum(const Options& o) {
  const AdjacencyGraph graph = io::read_edge_list(o.graph);
  ensure_dir(o.out);
  LanczosOptions solver;
  solver.tol = o.tol;
  solver.max_iter = o.max_iter;
  const SpectralResult result = top_eigenpairs_sparse(graph, o.d, solver);
  io::write_spectrum_csv(fs::path(o.out) / "spectrum.csv", result);
  if (o.vectors) io::write_vectors_csv(fs::path(o.out) / "vectors.csv", result);
  for (int k = 0; k < result.size(); ++k) {
    std::cout << "lambda_" << (k + 1) << " = " << result.values[k] << " (residual " << result.residuals[k]
              << ")\n";
  }
  return kOk;
}

int cmd_limits(const Options& o) {
  const auto model = io::load_model(o.model);
  ensure_dir(o.out);
  const PopulationMoments mom = population_moments(model.mixture);
  int status = kOk;
  if (mom.all_simple()) {
    LimitLaw law{eta(mom, model.mixture), gamma(mom, model.mixture), Applicability::full_joint};
    io::write_json(fs::path(o.out) / "limit_law.json", io::to_json(law));
    std::cout << io::to_json(law).dump() << "\n";
  } else {
    try {
      eta(mom, model.mixture);
    } catch (const Error& e) {
      std::cerr << e.what() << "\n"
                << "pass --latents <file> for the conditional law, or run `experiment --mode conditional`\n";
    }
    status = kValidation;
  }
  if (!o.latents.empty()) {
    const LatentSample sample = io::read_latent_csv(o.latents, model.mixture.signature());
    const ConditionalLaw law = conditional_law(sample, eigenpairs_of_P(sample));
    io::write_json(fs::path(o.out) / "conditional_law.json", io::to_json(law));
    std::cout << io::to_json(law).dump() << "\n";
    status = kOk;
  }
  return status;
}

int cmd_experiment(const Options& o) {
  const auto model = io::load_model(o.model);
  ensure_dir(o.out);
  ExperimentConfig cfg{model.mixture};
  cfg.n = o.n;
  cfg.replicates = o.replicates;
  cfg.master_seed = o.seed;
  cfg.mode = o.mode == "conditional" ? Mode::conditional : Mode::population;
  if (o.d > 0) cfg.d_override = o.d;
  cfg.solver.tol = o.tol;
  cfg.solver.max_iter = o.max_iter;
  for (const auto& w : o.weights) cfg.weights.push_back(parse_weights(w));
  cfg.diagnostics = o.diagnostics;
  cfg.hollow = o.hollow;
  cfg.threads = o.threads > 0 ? o.threads : default_threads();
  cfg.alpha = o.alpha;

  const auto start = std::chrono::steady_clock::now();
  const ExperimentReport report = run_experiment(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path out(o.out);
  io::write_json(out / "summary.json", io::to_json(report));
  io::write_replicates_csv(out / "replicates.csv", report);
  io::write_histogram_csv(out / "histogram.csv", report, cfg.weights);
  io::write_json(out / "runtime.json", {{"seconds", seconds}, {"threads", cfg.threads}});

  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (threshold " << c.threshold
              << ")\n";
  }
  std::cout << report.records.size() << " replicates in " << seconds << " s\n";
  return report.all_passed() ? kOk : kChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-eigenvalue fluctuations of stochastic blockmodel and GRDPG graphs"};
  app.require_subcommand(1);
  Options o;

  auto* sample = app.add_subcommand("sample", "Draw latent positions and one adjacency matrix");
  sample->add_option("--model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  sample->add_option("--n", o.n, "Vertex count")->required()->check(CLI::PositiveNumber);
  sample->add_option("--seed", o.seed, "Master seed");
  sample->add_option("--out", o.out, "Output directory");
  sample->add_flag("--hollow", o.hollow, "Drop self-loops");

  auto* spectrum = app.add_subcommand("spectrum", "Top-d eigenpairs (by modulus) of a graph file");
  spectrum->add_option("--graph", o.graph, "Edge-list file")->required()->check(CLI::ExistingFile);
  spectrum->add_option("--d", o.d, "Number of eigenpairs")->required()->check(CLI::PositiveNumber);
  spectrum->add_option("--tol", o.tol, "Relative residual tolerance");
  spectrum->add_option("--max-iter", o.max_iter, "Lanczos iteration cap (0 = 10 d + 200)");
  spectrum->add_option("--out", o.out, "Output directory");
  spectrum->add_flag("--vectors", o.vectors, "Also write eigenvectors");

  auto* limits = app.add_subcommand("limits", "Limiting laws of the edge eigenvalues");
  limits->add_option("--model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  limits->add_option("--latents", o.latents, "Latent CSV for the conditional law")->check(CLI::ExistingFile);
  limits->add_option("--out", o.out, "Output directory");

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo check of the limiting laws");
  experiment->add_option("--model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  experiment->add_option("--n", o.n, "Vertex count")->required()->check(CLI::PositiveNumber);
  experiment->add_option("--replicates", o.replicates, "Number of graphs")->required();
  experiment->add_option("--seed", o.seed, "Master seed");
  experiment->add_option("--mode", o.mode, "population or conditional")
      ->check(CLI::IsMember({"population", "conditional"}));
  experiment->add_option("--d", o.d, "Track only the leading d eigenvalues");
  experiment->add_option("--weights", o.weights, "Comma-separated weight vector s; repeatable");
  experiment->add_flag("--diagnostics", o.diagnostics, "Record the two-quadratic-form decomposition");
  experiment->add_flag("--hollow", o.hollow, "Drop self-loops");
  experiment->add_option("--threads", o.threads, "Worker threads (default SPECLAB_THREADS or all cores)");
  experiment->add_option("--tol", o.tol, "Lanczos relative residual tolerance");
  experiment->add_option("--max-iter", o.max_iter, "Lanczos iteration cap (0 = 10 d + 200)");
  experiment->add_option("--alpha", o.alpha, "Family-wise KS level, split over tested coordinates");
  experiment->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sample) return cmd_sample(o);
    if (*spectrum) return cmd_spectrum(o);
    if (*limits) return cmd_limits(o);
    if (*experiment) return cmd_experiment(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
