#pragma once

// On-disk formats: metrics/panel CSV, logs JSONL, ground truth, vocabulary,
// windows, binary checkpoints, graph and ranking exports, configuration.

#include "mmrca/fusion.hpp"
#include "mmrca/log_encoder.hpp"
#include "mmrca/log_ingest.hpp"
#include "mmrca/pipeline.hpp"
#include "mmrca/rca.hpp"
#include "mmrca/simgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mmrca::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Writes `path.partial` and renames it into place, so an interrupted write
// leaves only the .partial file behind.
void write_file(const fs::path& path, const std::string& content);
void write_binary(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// ---- metric and log panels (CSV: timestamp,entity,metric_name,value) ----

// Rows ordered by metric, entity, timestamp; the KPI appears once with
// metric_name "kpi".
std::string panels_to_csv(const std::vector<ModalityPanel>& panels, const std::vector<std::string>& metric_names);

struct PanelSet {
    std::vector<ModalityPanel> panels;
    std::vector<std::string> metric_names;
};
// Inverse of panels_to_csv. Entities keep first-appearance order; every
// (metric, entity, timestamp) cell must be present exactly once.
PanelSet panels_from_csv(const std::string& csv);

// ---- logs ----

std::string logs_to_jsonl(const std::vector<simgen::LogRecord>& logs);
// `entity` may be an index or one of `entity_names`. Missing keys stay empty
// so parse_templates can report the record index.
std::vector<logs::RawRecord> logs_from_jsonl(const std::string& text, const std::vector<std::string>& entity_names);

// ---- ground truth ----

Json ground_truth_to_json(const simgen::IncidentDataset& data);
struct GroundTruth {
    simgen::ScenarioSpec spec;
    std::vector<std::string> entity_names;
    std::string kpi_name;
    std::string root_cause_name;
};
GroundTruth ground_truth_from_json(const Json& j);

// ---- vocabulary and windows ----

Json vocabulary_to_json(const std::vector<logs::LogTemplate>& vocabulary);
std::vector<logs::LogTemplate> vocabulary_from_json(const Json& j);
std::string windows_to_jsonl(const std::vector<logs::LogSequenceWindow>& windows);
std::vector<logs::LogSequenceWindow> windows_from_jsonl(const std::string& text);

// ---- binary checkpoints: magic, count, then (name, rows, cols, data) ----

using NamedMatrices = std::vector<std::pair<std::string, Eigen::MatrixXd>>;
std::string matrices_to_bytes(const NamedMatrices& mats);
NamedMatrices matrices_from_bytes(const std::string& bytes);

NamedMatrices encoder_checkpoint(const encoder::LogEncoder& enc, const encoder::ReducedSeries& reduced);
Json encoder_manifest(const encoder::LogEncoder& enc, const encoder::ReducedSeries& reduced,
                      const std::vector<logs::LogTemplate>& vocabulary, int truncated_tokens);
// Rebuilds an encoder from a checkpoint and its manifest; PCA direction and
// mean are returned through `reduced` when non-null.
encoder::LogEncoder encoder_from_checkpoint(const NamedMatrices& mats, const Json& manifest,
                                            encoder::ReducedSeries* reduced = nullptr);

NamedMatrices structure_checkpoint(const causal::LearnedStructure& s);

// ---- graphs, rankings, reports ----

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

// Entity names, A^M, A^L, attention and the final per-term losses.
Json adjacency_to_json(const causal::LearnedStructure& s);
struct AdjacencyExport {
    std::vector<std::string> node_names;
    Eigen::MatrixXd a_metric;
    Eigen::MatrixXd a_log;
    causal::AttentionWeights attention;
    bool converged = false;
    causal::LossBreakdown final_losses;
};
AdjacencyExport adjacency_from_json(const Json& j);
Json adjacency_to_json(const AdjacencyExport& a);

Json fused_to_json(const fusion::FusedCausalGraph& g);
fusion::FusedCausalGraph fused_from_json(const Json& j);

Json ranking_to_json(const rca::RankedRootCauses& r, const std::string& incident_id);
struct RankingFile {
    std::string incident_id;
    std::vector<std::string> entities;  // ranked
    std::vector<double> scores;
    bool converged = false;
    int iterations = 0;
};
RankingFile ranking_from_json(const Json& j);

struct MetricsReport {
    int n_cases = 0;
    std::vector<int> k_values;
    std::vector<double> precision;  // PR@K per k
    std::vector<double> map;        // MAP@K per k
    double mrr = 0.0;
};
Json report_to_json(const MetricsReport& r);
std::string report_to_table(const MetricsReport& r);

// ---- configuration ----

Json config_to_json(const pipeline::PipelineConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
pipeline::PipelineConfig config_from_json(const Json& j);
// Hash of the canonical JSON form.
std::string config_hash(const pipeline::PipelineConfig& c);

Json parse_json(const std::string& text, const std::string& what);

}  // namespace mmrca::io
