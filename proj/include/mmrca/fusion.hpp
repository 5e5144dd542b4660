#pragma once

// KPI-aware modality attention and causal graph fusion.

#include "mmrca/causal_learner.hpp"
#include "mmrca/panel.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mmrca::fusion {

enum class Modality { metric, log };
enum class CorrelationMode { normalized, raw };

struct ModalityScore {
    Eigen::VectorXd scores;  // one per entity, KPI excluded
    Modality modality = Modality::metric;
    int max_lag = 0;
};

// s_i = max over p in [0, tau] of corr(x_i(t+p), y(t)) on the overlap.
// Zero-variance overlaps score 0. Throws if tau >= T.
ModalityScore cross_correlation_scores(const ModalityPanel& panel, int tau, Modality modality = Modality::metric,
                                       CorrelationMode mode = CorrelationMode::normalized);

// Softmax over the two modalities' top-k score sums.
causal::AttentionWeights modality_attention(const ModalityScore& log_score, const ModalityScore& metric_score, int k);

struct FusedCausalGraph {
    Eigen::MatrixXd adjacency;
    double a_log = 0.5;
    double a_metric = 0.5;
    std::vector<std::string> node_names;  // KPI last
};

FusedCausalGraph fuse(const Eigen::MatrixXd& a_log, const Eigen::MatrixXd& a_metric, causal::AttentionWeights weights,
                      std::vector<std::string> node_names);
FusedCausalGraph fuse(const causal::LearnedStructure& structure, causal::AttentionWeights weights,
                      std::vector<std::string> node_names);

// Graphviz export of edges with weight above `threshold`.
std::string to_dot(const FusedCausalGraph& graph, double threshold = 0.3);

}  // namespace mmrca::fusion
