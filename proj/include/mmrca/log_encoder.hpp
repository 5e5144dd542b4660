#pragma once

// Regression-trained transformer over template/frequency token sequences.
//
// Each window becomes [CLS, tpl_1, bucket(f_1), tpl_2, bucket(f_2), ...]. A
// bidirectional encoder reads the sequence and a sigmoid head on the final CLS
// state predicts the window's anomaly label. The CLS state is the window
// embedding; a global first principal component turns embeddings into one
// scalar series per entity.

#include "mmrca/autodiff.hpp"
#include "mmrca/log_ingest.hpp"
#include "mmrca/optim.hpp"
#include "mmrca/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mmrca::encoder {

inline constexpr int kPadToken = 0;
inline constexpr int kClsToken = 1;
inline constexpr int kEmptyToken = 2;
inline constexpr int kReservedTokens = 3;

struct EncoderConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int max_len = 128;
    double lr = 2e-3;
    int epochs = 20;
    int batch_size = 32;
    int freq_buckets = 16;
    std::uint64_t seed = 0;
};

// Throws std::invalid_argument on non-positive sizes or d_model % n_heads != 0.
void validate(const EncoderConfig& config);

struct TokenSequence {
    std::vector<int> tokens;
    int max_len = 0;
    int truncated = 0;  // tokens dropped to honour max_len
};

int frequency_bucket(int frequency, int freq_buckets);
int bucket_token(int bucket);
int template_token(int template_id, int freq_buckets);
int vocabulary_size(int n_templates, int freq_buckets);

TokenSequence tokenize(const logs::LogSequenceWindow& window, const EncoderConfig& config);

class LogEncoder {
public:
    LogEncoder(EncoderConfig config, int n_templates);

    const EncoderConfig& config() const { return config_; }
    int n_templates() const { return n_templates_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    const std::vector<double>& loss_history() const { return loss_history_; }
    std::vector<double>& loss_history() { return loss_history_; }

    struct Output {
        ad::Var cls;    // 1 x d_model
        ad::Var score;  // 1 x 1, in (0, 1)
    };
    // Forward pass for one sequence using parameters bound on the same tape.
    Output forward(ad::Tape& tape, const std::vector<ad::Var>& bound, std::span<const int> tokens) const;

    // Mean squared error between predicted scores and labels.
    ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& bound, std::span<const TokenSequence> seqs,
                 std::span<const double> labels) const;

    double predict(const TokenSequence& seq) const;
    Eigen::RowVectorXd embed(const TokenSequence& seq) const;

private:
    EncoderConfig config_;
    int n_templates_ = 0;
    ParameterSet params_;
    std::vector<double> loss_history_;

    struct LayerIndex {
        std::size_t ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<LayerIndex> layers_;
};

// Trains with minibatch Adam on mean squared error. Identical token sequences
// are merged (their labels averaged) since they receive identical predictions.
// Throws std::runtime_error naming the epoch if the loss becomes non-finite.
LogEncoder train_log_encoder(const std::vector<logs::LogSequenceWindow>& windows, int n_templates,
                             const EncoderConfig& config);

double mean_squared_error(const LogEncoder& encoder, const std::vector<logs::LogSequenceWindow>& windows);

// Row i is the CLS state for window i.
Eigen::MatrixXd embed_windows(const LogEncoder& encoder, const std::vector<logs::LogSequenceWindow>& windows);

struct WindowKey {
    int entity = 0;
    int window_index = 0;
};

struct ReducedSeries {
    ModalityPanel panel;
    Eigen::VectorXd direction;   // unit norm
    Eigen::RowVectorXd mean;     // embedding mean removed before projection
    double explained_variance = 0.0;
    bool degenerate = false;
};

// Projects embeddings onto their first principal component (1/N covariance)
// and assembles an (n_entities+1) x T panel with the KPI as the last row.
// Sign: projections correlate non-negatively with `labels`.
ReducedSeries reduce_to_series(const Eigen::MatrixXd& embeddings, std::span<const WindowKey> keys,
                               std::span<const double> labels, int n_entities, const Eigen::RowVectorXd& kpi,
                               std::vector<std::string> entity_names = {}, std::string kpi_name = "kpi");

}  // namespace mmrca::encoder
