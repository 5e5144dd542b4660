#pragma once

// Root cause localisation by random walk with restart on the reversed
// causal graph: the walker moves from effects toward their causes and keeps
// restarting at the KPI.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mmrca::rca {

struct RwrConfig {
    double beta = 0.1;      // probability mass kept as a self-transition
    double restart = 0.15;  // c
    double tol = 1e-10;     // L1 change between iterates
    int max_iter = 10000;
};

// P(i, j) = (1 - beta) * A(j, i) / sum_k A(k, i), plus beta on the diagonal.
// Nodes without incoming weight become absorbing self-loops.
// Throws on negative entries.
Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& adjacency, double beta);

struct RwrResult {
    Eigen::VectorXd scores;
    bool converged = false;
    int iterations = 0;
    // Largest |sum(p_t) - 1| observed over the iterations.
    double max_mass_drift = 0.0;
};

// p <- (1 - c) P^T p + c p0, starting from p0 unless `start` is given.
// Throws if P is not row-stochastic, p0 is not a distribution, or c is outside (0, 1].
RwrResult rwr(const Eigen::MatrixXd& transition, const Eigen::VectorXd& p0, double restart, double tol, int max_iter,
              const Eigen::VectorXd* start = nullptr);

struct RankedEntity {
    std::string entity;
    int index = 0;
    double score = 0.0;
};

struct RankedRootCauses {
    std::vector<RankedEntity> ranking;
    Eigen::VectorXd scores;  // all nodes, KPI included
    bool converged = false;
    int iterations = 0;
};

// Drops the KPI (last node), sorts by score descending with ascending-index
// tie-break and keeps the first k.
RankedRootCauses rank_root_causes(const Eigen::VectorXd& scores, const std::vector<std::string>& node_names, int k);

// Transition matrix, RWR from the KPI indicator, and ranking of every entity.
RankedRootCauses localize(const Eigen::MatrixXd& adjacency, const std::vector<std::string>& node_names,
                          const RwrConfig& config);

}  // namespace mmrca::rca
