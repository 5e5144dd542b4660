#pragma once

// End-to-end stages: logs -> log panel, attention, structure learning, fusion,
// localisation. Everything here is in memory; persistence lives in io.hpp.

#include "mmrca/causal_learner.hpp"
#include "mmrca/fusion.hpp"
#include "mmrca/log_encoder.hpp"
#include "mmrca/log_ingest.hpp"
#include "mmrca/rca.hpp"
#include "mmrca/simgen.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmrca::pipeline {

// Error raised by a pipeline stage; what() starts with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& cause)
        : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct SimulationConfig {
    int n_entities = 6;
    simgen::FaultType fault_type = simgen::FaultType::both;
    int horizon = 200;
    double noise_std = 0.05;
    double edge_prob = 0.4;
    // Explicit DAG rows (entities only); empty means a random DAG.
    std::vector<std::vector<int>> dag;
    // Used with an explicit DAG; -1 picks entity 0.
    int root_cause = -1;
    std::vector<int> kpi_parents;
    std::vector<std::string> metric_kinds = {"cpu", "memory"};
};

struct FusionConfig {
    int tau = -1;  // -1: the learner's lag order
    int k = 3;
    fusion::CorrelationMode mode = fusion::CorrelationMode::normalized;
};

struct PipelineConfig {
    std::string data_dir = "data";
    std::string out_dir = "out";
    std::string incident_id = "incident";
    std::uint64_t seed = 7;
    SimulationConfig simulation;
    int window_size = 1;
    // Metric kind fed to the learner; empty selects the first panel.
    std::string metric_name;
    std::vector<std::string> golden_signals;  // empty: built-in list
    encoder::EncoderConfig encoder;
    causal::LearnerConfig learner;
    FusionConfig fusion;
    rca::RwrConfig rca;
    // Fused edges at or below this weight are dropped before the walk.
    double edge_prune = 0.1;
    std::vector<int> eval_k = {1, 3, 5};
};

// Throws std::invalid_argument when any sub-config is invalid.
void validate(const PipelineConfig& config);

// Seeds every component from config.seed (encoder, learner, simulation).
PipelineConfig seeded(PipelineConfig config);

simgen::ScenarioSpec scenario_from_config(const PipelineConfig& config);

// Window means of each row; trailing partial windows are dropped.
ModalityPanel aggregate_panel(const ModalityPanel& panel, int window_size);

// The metric panel named by config.metric_name (or the first one).
ModalityPanel select_metric_panel(const std::vector<ModalityPanel>& panels, const std::vector<std::string>& names,
                                  const std::string& metric_name);

struct LogStage {
    logs::ParsedLogs parsed;
    std::vector<logs::LogSequenceWindow> windows;
    encoder::LogEncoder encoder;
    encoder::ReducedSeries reduced;
    int truncated_tokens = 0;
};

std::vector<logs::LogSequenceWindow> build_windows(const logs::ParsedLogs& parsed, int n_entities, int n_windows,
                                                   const PipelineConfig& config);

// Parse, window, label, train the encoder and reduce to a log panel aligned
// with `kpi` (one value per window).
LogStage run_log_stage(const logs::ParsedLogs& parsed, int n_entities, const Eigen::RowVectorXd& kpi,
                       const std::vector<std::string>& entity_names, const std::string& kpi_name,
                       const PipelineConfig& config);

struct Analysis {
    fusion::ModalityScore score_log;
    fusion::ModalityScore score_metric;
    causal::AttentionWeights attention;
    causal::LearnedStructure structure;
    fusion::FusedCausalGraph fused;
    rca::RankedRootCauses ranking;
};

causal::AttentionWeights attention_for(const ModalityPanel& metric_panel, const ModalityPanel& log_panel,
                                       const PipelineConfig& config, fusion::ModalityScore* score_log = nullptr,
                                       fusion::ModalityScore* score_metric = nullptr);

// Prunes weak fused edges and runs the walk from the KPI.
rca::RankedRootCauses localize(const fusion::FusedCausalGraph& graph, const PipelineConfig& config);

// Attention, fit, fuse and localise on aligned panels.
Analysis analyze(const ModalityPanel& metric_panel, const ModalityPanel& log_panel, const PipelineConfig& config);

struct IncidentRun {
    ModalityPanel metric_panel;
    LogStage logs;
    Analysis analysis;
};

// Full in-memory run on a generated incident.
IncidentRun run_incident(const simgen::IncidentDataset& data, const PipelineConfig& config);

// 1-based rank of `entity` in the ranking, 0 if absent.
int rank_of(const rca::RankedRootCauses& ranking, int entity);

}  // namespace mmrca::pipeline
