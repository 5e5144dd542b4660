#pragma once

// Contrastive multi-modal causal structure learning.
//
// Each modality v has a learnable adjacency A^v (sigmoid of free weights, zero
// diagonal; A(i, j) is the strength of i -> j), a modality-invariant encoder
// E_c, a modality-specific encoder E_s, an entity MLP, an edge head and a VAR
// decoder. Encoders and decoders are two-layer GraphSAGE-style message passing
// networks over the lag windows. The objective couples both modalities through
// the attention-weighted shared representation R_c.

#include "mmrca/autodiff.hpp"
#include "mmrca/optim.hpp"
#include "mmrca/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mmrca::causal {

// p-lagged windows of a panel. history is node-major: row i holds m blocks of
// p values, block t = values(i, t .. t+p-1). target(i, t) = values(i, t+p).
struct LaggedBatch {
    Eigen::MatrixXd history;  // n x (m*p)
    Eigen::MatrixXd target;   // n x m
    int n = 0;
    int m = 0;
    int p = 0;

    double history_at(int node, int t, int lag) const { return history(node, t * p + lag); }
    // (n*m) x p with row i*m + t holding the lag window of node i at step t.
    Eigen::MatrixXd history_rows() const;
    // (n*m) x 1 targets in the same row order.
    Eigen::MatrixXd target_rows() const {
        Eigen::MatrixXd t = target.transpose();
        return Eigen::Map<const Eigen::MatrixXd>(t.data(), static_cast<Eigen::Index>(n) * m, 1);
    }
};

// Throws std::invalid_argument naming T and p when T <= p.
LaggedBatch build_lagged(const ModalityPanel& panel, int p);
LaggedBatch build_lagged(const Eigen::MatrixXd& values, int p);

enum class NodeLossForm { info_nce, cosine_ratio };

struct LearnerConfig {
    int p = 3;
    int d1 = 16;
    int d2 = 16;
    double lambda_var = 50.0;
    double lambda_orth = 1.0;
    double lambda_node = 20.0;
    double lambda_edge = 20.0;
    double lambda_sparse = 0.1;
    double lr = 1e-2;
    int epochs = 1500;
    std::uint64_t seed = 0;
    // Multiplier on h(A): start * growth^(epoch / interval).
    double acyclicity_start = 1.0;
    double acyclicity_growth = 2.0;
    int acyclicity_interval = 75;
    double temperature = 0.5;
    NodeLossForm node_loss_form = NodeLossForm::info_nce;
    // Initial free weight for every off-diagonal adjacency entry.
    double adjacency_init = -3.0;
    double acyclicity_tolerance = 1e-3;
    // Decoupled weight decay on every network weight (not on A). It removes
    // the scale ambiguity between A and the neighbour weights.
    double weight_decay = 0.25;
    // z-score each panel row before fitting.
    bool standardize = true;
};

void validate(const LearnerConfig& config);
double acyclicity_multiplier(const LearnerConfig& config, int epoch);

// Parameter indices for one modality inside a StructureModel's ParameterSet.
struct SageLayer {
    std::size_t weight = 0;  // (2*in) x out
    std::size_t bias = 0;    // 1 x out
};

struct ModalityParams {
    std::size_t adjacency = 0;  // n x n free weights
    SageLayer enc_c[2];
    SageLayer enc_s[2];
    std::size_t mlp_w1 = 0, mlp_b1 = 0, mlp_w2 = 0, mlp_b2 = 0;
    std::size_t edge_w = 0, edge_b = 0;  // (2*d2) x 1 and 1 x 1
    SageLayer dec[2];
};

class StructureModel {
public:
    StructureModel(int n_nodes, LearnerConfig config);

    int n_nodes() const { return n_; }
    const LearnerConfig& config() const { return config_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    const ModalityParams& metric() const { return metric_; }
    const ModalityParams& log() const { return log_; }

    Eigen::MatrixXd adjacency_metric() const;
    Eigen::MatrixXd adjacency_log() const;

private:
    ModalityParams make_modality(const std::string& prefix, std::mt19937_64& rng);

    int n_ = 0;
    LearnerConfig config_;
    ParameterSet params_;
    ModalityParams metric_, log_;
};

// ---- differentiable building blocks (operate on tape variables) ----

// sigmoid(free) with an exact zero diagonal.
ad::Var adjacency(ad::Var free_weights);
Eigen::MatrixXd adjacency_value(const Eigen::MatrixXd& free_weights);

// Representations use rows indexed i*m + t (node i, effective timestep t).
struct Encoded {
    ad::Var rc;  // (n*m) x d1
    ad::Var rs;  // (n*m) x d1
    ad::Var h;   // n x d2
};

// One message-passing layer, applied per timestep:
// [x_j, sum_i A(i, j) x_i] -> linear -> (tanh if `activate`).
ad::Var sage_layer(ad::Var rows, ad::Var adj, ad::Var weight, ad::Var bias, bool activate);

// `history` is LaggedBatch::history_rows() on the tape.
Encoded encode(ad::Var history, ad::Var adj, const std::vector<ad::Var>& bound, const ModalityParams& mp, int n, int m,
               int p);

// Decoder output for a combined representation: (n*m) x 1 predictions.
ad::Var decode(ad::Var combined, ad::Var adj, const std::vector<ad::Var>& bound, const ModalityParams& mp, int n, int m);

ad::Var loss_var(ad::Var target, ad::Var prediction);
ad::Var loss_node(ad::Var h_metric, ad::Var h_log, double temperature, NodeLossForm form = NodeLossForm::info_nce);
ad::Var loss_orth(ad::Var rc, ad::Var rs, int n, int m);
// Squared error between the edge head and A over ordered pairs i != j.
ad::Var loss_edge(ad::Var h, ad::Var adj, ad::Var edge_w, ad::Var edge_b);
ad::Var acyclicity(ad::Var adj);

// ---- plain-value versions of the losses ----
double loss_var(const Eigen::MatrixXd& target, const Eigen::MatrixXd& prediction);
double loss_node(const Eigen::MatrixXd& h_metric, const Eigen::MatrixXd& h_log, double temperature,
                 NodeLossForm form = NodeLossForm::info_nce);
double loss_orth(const Eigen::MatrixXd& rc, const Eigen::MatrixXd& rs, int n, int m);
double loss_edge(const Eigen::MatrixXd& edge_prob, const Eigen::MatrixXd& adj);
double acyclicity(const Eigen::MatrixXd& adj);

struct LossBreakdown {
    double var = 0.0;
    double orth = 0.0;
    double node = 0.0;
    double edge = 0.0;
    double sparsity = 0.0;       // ||A^M||_1 + ||A^L||_1
    double h_metric = 0.0;
    double h_log = 0.0;
    double multiplier = 1.0;     // acyclicity multiplier for this evaluation
    double total = 0.0;          // weighted sum
};

struct AttentionWeights {
    double a_log = 0.5;
    double a_metric = 0.5;
};

// Weighted objective on a tape. `breakdown` receives the unweighted terms.
ad::Var total_objective(ad::Tape& tape, const std::vector<ad::Var>& bound, const StructureModel& model,
                        const LaggedBatch& metric, const LaggedBatch& log, AttentionWeights attention,
                        double acyclicity_weight, LossBreakdown* breakdown = nullptr);

// Combines pre-computed terms with the configured lambdas.
double combine_terms(const LearnerConfig& config, const LossBreakdown& terms);

struct LearnedStructure {
    Eigen::MatrixXd a_metric;
    Eigen::MatrixXd a_log;
    ParameterSet parameters;
    LearnerConfig config;
    AttentionWeights attention;
    std::vector<LossBreakdown> loss_history;
    bool converged = false;
    std::vector<std::string> node_names;
};

// Full-batch Adam on the total objective. Returns a structure flagged
// non-converged (not an exception) if h(A) stays above tolerance; throws
// std::runtime_error on a non-finite objective.
LearnedStructure fit(const ModalityPanel& metric_panel, const ModalityPanel& log_panel, AttentionWeights attention,
                     const LearnerConfig& config);

// Edge-level difference count; a reversed edge counts once.
int structural_hamming_distance(const Eigen::MatrixXi& learned, const Eigen::MatrixXi& truth);
Eigen::MatrixXi threshold(const Eigen::MatrixXd& adj, double cutoff);

}  // namespace mmrca::causal
