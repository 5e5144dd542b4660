#pragma once

// Synthetic incident generator with planted root causes.
//
// Metrics follow a lag-1 linear structural process along a known DAG over
// entities plus a KPI sink; a fault shocks the root-cause entity at a fixed
// onset and the effect propagates into the KPI. Logs are rendered from a
// small template catalogue, with golden-signal messages emitted near the
// root cause for log-visible faults.

#include "mmrca/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mmrca::simgen {

// Fault signatures follow the classic taxonomy: some faults only show up in
// logs (query/login failures), some only in metrics (load spikes), some in both
// (disk exhaustion).
enum class FaultType { none, metric_only, log_only, both };

std::string_view to_string(FaultType f);
FaultType fault_type_from_string(std::string_view s);

struct ScenarioSpec {
    int n_entities = 0;
    // Binary n_entities x n_entities matrix; entry (i, j) = 1 means i -> j.
    Eigen::MatrixXi ground_truth_dag;
    int root_cause = 0;
    FaultType fault_type = FaultType::both;
    int horizon = 200;
    double noise_std = 0.05;
    std::uint64_t seed = 0;
    // Entities feeding the KPI directly; empty means "every DAG sink".
    std::vector<int> kpi_parents;
    // The learner's lag order; the horizon must be at least four times this.
    int lag_order = 3;
    std::vector<std::string> metric_kinds = {"cpu", "memory"};
};

struct LogRecord {
    std::int64_t timestamp = 0;
    int entity = 0;
    std::string message;

    bool operator==(const LogRecord&) const = default;
};

struct IncidentDataset {
    // One panel per metric kind, KPI appended as the last row.
    std::vector<ModalityPanel> metric_panels;
    std::vector<std::string> metric_names;
    std::vector<LogRecord> raw_logs;
    ScenarioSpec ground_truth;
    // (n_entities+1)^2 edge weights; (i, j) is the weight of i -> j, KPI last.
    Eigen::MatrixXd edge_weights;
    int fault_onset = 0;
    double shock_magnitude = 0.0;
    std::vector<std::string> entity_names;
    std::string kpi_name = "kpi";
};

// Throws std::invalid_argument for a cyclic DAG, a root cause without a path to
// the KPI, a horizon below 4x the lag order, or any malformed field.
void validate(const ScenarioSpec& spec);

IncidentDataset generate_incident(const ScenarioSpec& spec);

// Random DAG (edge probability `edge_prob` along a random order) with a root
// cause drawn uniformly among entities.
ScenarioSpec random_scenario(int n_entities, FaultType fault, int horizon, double noise_std, std::uint64_t seed,
                             double edge_prob = 0.4);

// 0 -> 1 -> ... -> n-1 -> KPI with the root at entity 0.
ScenarioSpec chain_scenario(int n_entities, FaultType fault, int horizon, double noise_std, std::uint64_t seed);

bool is_acyclic(const Eigen::MatrixXi& dag);
// Kahn's algorithm; empty result for cyclic input.
std::vector<int> topological_order(const Eigen::MatrixXi& dag);
// KPI parents resolved (explicit list, or every sink).
std::vector<int> resolved_kpi_parents(const ScenarioSpec& spec);

std::vector<std::string> default_entity_names(int n);

// Template catalogue. Placeholders: {int} {float} {ip} {port} {uuid} {hex}.
const std::vector<std::string>& normal_templates();
const std::vector<std::string>& fault_templates(FaultType f);
// Fills placeholders with values drawn from `rng`.
std::string render(std::string_view tmpl, std::mt19937_64& rng);

}  // namespace mmrca::simgen
