#include "speclab/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace speclab::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Eigen::VectorXd to_vector(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array()) throw Error(ErrorCode::Parse, std::string(what) + " must be an array of numbers");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(ErrorCode::Parse, std::string(what) + " holds a non-number");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

nlohmann::json from_vector(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

nlohmann::json from_matrix(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(from_vector(m.row(r).transpose()));
  return rows;
}

}  // namespace

ModelFile parse_model(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "model document must be a JSON object");
  if (doc.contains("B")) {
    const auto& rows = doc.at("B");
    if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::Parse, "B must be a non-empty array");
    if (!doc.contains("pi")) throw Error(ErrorCode::Parse, "SBM model needs \"pi\"");
    BlockModelParams params;
    const auto K = static_cast<Eigen::Index>(rows.size());
    params.B.resize(K, K);
    for (Eigen::Index i = 0; i < K; ++i) {
      const Eigen::VectorXd row = to_vector(rows[i], "B row");
      if (row.size() != K) throw Error(ErrorCode::Parse, "B must be square");
      params.B.row(i) = row.transpose();
    }
    params.pi = to_vector(doc.at("pi"), "pi");
    params = validate_block_model(params);
    return ModelFile{params, sbm_to_grdpg(params)};
  }
  if (doc.contains("atoms")) {
    if (!doc.contains("p") || !doc.contains("q") || !doc.at("p").is_number_integer() ||
        !doc.at("q").is_number_integer()) {
      throw Error(ErrorCode::Parse, "mixture model needs integer \"p\" and \"q\"");
    }
    const auto& list = doc.at("atoms");
    if (!list.is_array()) throw Error(ErrorCode::Parse, "atoms must be an array");
    std::vector<Atom> atoms;
    for (const auto& entry : list) {
      if (!entry.is_object() || !entry.contains("nu") || !entry.contains("weight") ||
          !entry.at("weight").is_number()) {
        throw Error(ErrorCode::Parse, "each atom needs \"nu\" and numeric \"weight\"");
      }
      atoms.push_back({to_vector(entry.at("nu"), "nu"), entry.at("weight").get<double>()});
    }
    Signature sig{doc.at("p").get<int>(), doc.at("q").get<int>()};
    return ModelFile{std::nullopt, LatentMixture(std::move(atoms), sig)};
  }
  throw Error(ErrorCode::Parse, "model must contain either \"B\"/\"pi\" or \"atoms\"/\"p\"/\"q\"");
}

ModelFile load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return parse_model(doc);
}

void write_edge_list(const std::filesystem::path& path, const AdjacencyGraph& graph) {
  auto out = open_out(path);
  out << "n " << graph.n() << " loops " << (graph.loops_allowed() ? 1 : 0) << '\n';
  for (auto [i, j] : graph.edge_list()) out << i << ' ' << j << '\n';
  finish(out, path);
}

AdjacencyGraph read_edge_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, path.string() + ": empty edge list");
  std::istringstream header(line);
  std::string n_tag, loops_tag;
  int n = -1, loops = -1;
  if (!(header >> n_tag >> n >> loops_tag >> loops) || n_tag != "n" || loops_tag != "loops" || n < 0 ||
      (loops != 0 && loops != 1)) {
    throw Error(ErrorCode::Parse, path.string() + ": header must read `n <n> loops <0|1>`");
  }
  std::vector<std::pair<int, int>> edges;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    int i = -1, j = -1;
    std::string rest;
    if (!(row >> i >> j) || (row >> rest) || i > j) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected `i j` with 0 <= i <= j");
    }
    edges.emplace_back(i, j);
  }
  try {
    return AdjacencyGraph::from_edges(n, edges, loops == 1);
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_latent_csv(const std::filesystem::path& path, const LatentSample& sample) {
  auto out = open_out(path);
  out << "tau";
  for (int c = 0; c < sample.dim(); ++c) out << ",x_" << (c + 1);
  out << '\n';
  for (int i = 0; i < sample.n(); ++i) {
    out << sample.tau[i];
    for (int c = 0; c < sample.dim(); ++c) out << ',' << fmt(sample.X(i, c));
    out << '\n';
  }
  finish(out, path);
}

LatentSample read_latent_csv(const std::filesystem::path& path, const Signature& signature) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, path.string() + ": empty latent file");
  const int d = signature.dim();
  const auto columns = std::count(line.begin(), line.end(), ',');
  if (line.rfind("tau", 0) != 0 || columns != d) {
    throw Error(ErrorCode::Parse, path.string() + ": header must be tau,x_1..x_" + std::to_string(d));
  }
  std::vector<std::uint32_t> tau;
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != d + 1) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    }
    try {
      const long label = std::stol(cells[0]);
      if (label < 0) throw std::invalid_argument("negative label");
      tau.push_back(static_cast<std::uint32_t>(label));
      for (int c = 1; c <= d; ++c) values.push_back(std::stod(cells[c]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  LatentSample sample;
  sample.signature = signature;
  sample.tau = std::move(tau);
  const auto n = static_cast<Eigen::Index>(sample.tau.size());
  sample.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, d);
  return sample;
}

void write_spectrum_csv(const std::filesystem::path& path, const SpectralResult& result) {
  auto out = open_out(path);
  out << "index,value,residual\n";
  for (int k = 0; k < result.size(); ++k) {
    out << (k + 1) << ',' << fmt(result.values[k]) << ',' << fmt(result.residuals[k]) << '\n';
  }
  finish(out, path);
}

void write_vectors_csv(const std::filesystem::path& path, const SpectralResult& result) {
  auto out = open_out(path);
  for (int k = 0; k < result.size(); ++k) out << (k ? "," : "") << "v_" << (k + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < result.vectors.rows(); ++r) {
    for (int k = 0; k < result.size(); ++k) out << (k ? "," : "") << fmt(result.vectors(r, k));
    out << '\n';
  }
  finish(out, path);
}

nlohmann::json to_json(const LimitLaw& law) {
  return {{"eta", from_vector(law.eta)}, {"Gamma", from_matrix(law.gamma)}};
}

nlohmann::json to_json(const ConditionalLaw& law) {
  return {{"eta_tilde", from_vector(law.eta_tilde)},
          {"sigma2", from_vector(law.sigma2)},
          {"sigma2_matrix_form", from_vector(law.sigma2_matrix_form)}};
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json doc;
  doc["mode"] = std::string(to_string(report.mode));
  doc["n"] = report.n;
  doc["d"] = report.d;
  doc["replicates"] = report.replicates;
  doc["master_seed"] = report.master_seed;
  doc["completed_replicates"] = report.records.size();
  doc["failed_replicates"] = report.failed_replicates;
  doc["retried_replicates"] = report.retried_replicates;
  doc["identity_matches"] = report.identity_matches;
  doc["ambiguous_matches"] = report.ambiguous_matches;
  doc["matching_rule"] =
      "minimum total |lambda_hat - lambda| over sign-consistent permutations; identity when ambiguous";
  doc["empirical"] = {{"mean", from_vector(report.moments.mean)}, {"cov", from_matrix(report.moments.cov)}};
  if (report.population) {
    const auto& law = *report.population;
    if (law.applicability == Applicability::full_joint) {
      doc["theory"] = to_json(law);
      doc["theory"]["applicability"] = "full_joint";
    } else {
      doc["theory"] = {{"applicability", "inapplicable"}};
    }
  }
  if (report.conditional) {
    doc["theory"] = to_json(*report.conditional);
    doc["theory"]["lambda"] = from_vector(report.fixed_lambda);
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : report.tests) {
    tests.push_back({{"label", t.label},
                     {"reference_mean", t.reference_mean},
                     {"reference_variance", t.reference_variance},
                     {"fitted", t.fitted},
                     {"ks_statistic", t.ks.statistic},
                     {"p_value", t.ks.p_value}});
  }
  doc["tests"] = tests;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"passed", c.passed},
                      {"rule", c.rule}});
  }
  doc["checks"] = checks;
  doc["all_passed"] = report.all_passed();
  return doc;
}

void write_replicates_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  auto out = open_out(path);
  const bool standardized = report.mode == Mode::conditional;
  const bool diagnostics = !report.records.empty() && report.records.front().diagnostics.has_value();
  out << "replicate,i,lambda_hat,lambda,centered";
  if (standardized) out << ",standardized";
  if (diagnostics) out << ",term1,term2,residual";
  out << '\n';
  for (const auto& rec : report.records) {
    for (int i = 0; i < report.d; ++i) {
      out << rec.replicate << ',' << (i + 1) << ',' << fmt(rec.lambda_hat[i]) << ',' << fmt(rec.lambda[i])
          << ',' << fmt(rec.centered[i]);
      if (standardized) out << ',' << fmt((*rec.standardized)[i]);
      if (diagnostics) {
        const auto& t = (*rec.diagnostics)[i];
        out << ',' << fmt(t.term1) << ',' << fmt(t.term2) << ',' << fmt(t.residual);
      }
      out << '\n';
    }
  }
  finish(out, path);
}

void write_histogram_csv(const std::filesystem::path& path, const ExperimentReport& report,
                         const std::vector<Eigen::VectorXd>& weights) {
  auto out = open_out(path);
  const bool standardized = report.mode == Mode::conditional;
  std::vector<std::string> header;
  for (int i = 0; i < report.d; ++i) header.push_back("centered_" + std::to_string(i + 1));
  if (standardized) {
    for (int i = 0; i < report.d; ++i) header.push_back("standardized_" + std::to_string(i + 1));
  }
  for (std::size_t k = 0; k < weights.size(); ++k) header.push_back("combo_" + std::to_string(k + 1));
  for (std::size_t h = 0; h < header.size(); ++h) out << (h ? "," : "") << header[h];
  out << '\n';
  for (const auto& rec : report.records) {
    std::vector<double> row(rec.centered.data(), rec.centered.data() + rec.centered.size());
    if (standardized) row.insert(row.end(), rec.standardized->data(), rec.standardized->data() + report.d);
    for (const auto& s : weights) row.push_back(s.dot(rec.centered));
    for (std::size_t h = 0; h < row.size(); ++h) out << (h ? "," : "") << fmt(row[h]);
    out << '\n';
  }
  finish(out, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

}  // namespace speclab::io
