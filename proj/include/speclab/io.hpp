#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "speclab/experiment.hpp"
#include "speclab/limits.hpp"
#include "speclab/model.hpp"
#include "speclab/sampling.hpp"
#include "speclab/spectral.hpp"

namespace speclab::io {

/// A model file: either {"B": [[...]], "pi": [...]} or
/// {"atoms": [{"nu": [...], "weight": w}, ...], "p": p, "q": q}.
struct ModelFile {
  std::optional<BlockModelParams> sbm;
  LatentMixture mixture;
};

ModelFile parse_model(const nlohmann::json& doc);
ModelFile load_model(const std::filesystem::path& path);

/// Header `n <n> loops <0|1>` followed by one `i j` line per edge with i <= j.
void write_edge_list(const std::filesystem::path& path, const AdjacencyGraph& graph);
AdjacencyGraph read_edge_list(const std::filesystem::path& path);

/// CSV with columns tau,x_1,...,x_d. The signature is not stored.
void write_latent_csv(const std::filesystem::path& path, const LatentSample& sample);
LatentSample read_latent_csv(const std::filesystem::path& path, const Signature& signature);

/// index,value,residual with a 1-based index.
void write_spectrum_csv(const std::filesystem::path& path, const SpectralResult& result);
void write_vectors_csv(const std::filesystem::path& path, const SpectralResult& result);

nlohmann::json to_json(const LimitLaw& law);
nlohmann::json to_json(const ConditionalLaw& law);
nlohmann::json to_json(const ExperimentReport& report);

/// replicate,i,lambda_hat,lambda,centered[,standardized][,term1,term2,residual]
void write_replicates_csv(const std::filesystem::path& path, const ExperimentReport& report);
/// One row per replicate and one column per tested coordinate, for plotting.
void write_histogram_csv(const std::filesystem::path& path, const ExperimentReport& report,
                         const std::vector<Eigen::VectorXd>& weights);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace speclab::io
