#include "mmrca/causal_learner.hpp"

#include "mmrca/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace mmrca::causal {

LaggedBatch build_lagged(const Eigen::MatrixXd& values, int p) {
    const auto t = static_cast<int>(values.cols());
    if (p < 1) throw std::invalid_argument("lag order p must be at least 1");
    if (t <= p) {
        throw std::invalid_argument("series length T=" + std::to_string(t) + " must exceed lag order p=" +
                                    std::to_string(p));
    }
    LaggedBatch b;
    b.n = static_cast<int>(values.rows());
    b.p = p;
    b.m = t - p;
    b.history.resize(b.n, static_cast<Eigen::Index>(b.m) * p);
    b.target.resize(b.n, b.m);
    for (int i = 0; i < b.n; ++i) {
        for (int s = 0; s < b.m; ++s) {
            for (int k = 0; k < p; ++k) b.history(i, s * p + k) = values(i, s + k);
            b.target(i, s) = values(i, s + p);
        }
    }
    return b;
}

LaggedBatch build_lagged(const ModalityPanel& panel, int p) { return build_lagged(panel.values, p); }

void validate(const LearnerConfig& c) {
    if (c.p < 1) throw std::invalid_argument("lag order p must be at least 1");
    if (c.d1 < 1 || c.d2 < 1) throw std::invalid_argument("hidden dimensions must be positive");
    for (double l : {c.lambda_var, c.lambda_orth, c.lambda_node, c.lambda_edge, c.lambda_sparse}) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("every lambda must be a non-negative number");
    }
    if (!(c.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (c.epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (!(c.acyclicity_start > 0.0) || !(c.acyclicity_growth >= 1.0) || c.acyclicity_interval < 1) {
        throw std::invalid_argument("acyclicity schedule must start positive and never decrease");
    }
    if (!(c.weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
    if (!(c.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

double acyclicity_multiplier(const LearnerConfig& config, int epoch) {
    return config.acyclicity_start * std::pow(config.acyclicity_growth, epoch / config.acyclicity_interval);
}

Eigen::MatrixXd adjacency_value(const Eigen::MatrixXd& free_weights) {
    Eigen::MatrixXd a = (1.0 + (-free_weights.array()).exp()).inverse();
    a.diagonal().setZero();
    return a;
}

ad::Var adjacency(ad::Var free_weights) {
    const auto n = free_weights.rows();
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(n, n);
    mask.diagonal().setZero();
    return ad::mul(ad::sigmoid(free_weights), free_weights.tape->constant(std::move(mask)));
}

StructureModel::StructureModel(int n_nodes, LearnerConfig config) : n_(n_nodes), config_(config) {
    validate(config_);
    if (n_nodes < 2) throw std::invalid_argument("structure model needs at least two nodes");
    std::mt19937_64 rng(config_.seed);
    metric_ = make_modality("metric.", rng);
    log_ = make_modality("log.", rng);
}

ModalityParams StructureModel::make_modality(const std::string& prefix, std::mt19937_64& rng) {
    const int p = config_.p;
    const int d1 = config_.d1;
    const int d2 = config_.d2;
    ModalityParams mp;
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    Eigen::MatrixXd free(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) free(i, j) = config_.adjacency_init + jitter(rng);
    }
    mp.adjacency = params_.add(prefix + "adjacency", free);
    auto layer = [&](const std::string& name, int in, int out) {
        SageLayer l;
        l.weight = params_.add(prefix + name + ".w", glorot(2 * in, out, rng));
        l.bias = params_.add(prefix + name + ".b", Eigen::MatrixXd::Zero(1, out));
        return l;
    };
    mp.enc_c[0] = layer("enc_c0", p, d1);
    mp.enc_c[1] = layer("enc_c1", d1, d1);
    mp.enc_s[0] = layer("enc_s0", p, d1);
    mp.enc_s[1] = layer("enc_s1", d1, d1);
    mp.mlp_w1 = params_.add(prefix + "mlp.w1", glorot(d1, d2, rng));
    mp.mlp_b1 = params_.add(prefix + "mlp.b1", Eigen::MatrixXd::Zero(1, d2));
    mp.mlp_w2 = params_.add(prefix + "mlp.w2", glorot(d2, d2, rng));
    mp.mlp_b2 = params_.add(prefix + "mlp.b2", Eigen::MatrixXd::Zero(1, d2));
    mp.edge_w = params_.add(prefix + "edge.w", glorot(2 * d2, 1, rng));
    mp.edge_b = params_.add(prefix + "edge.b", Eigen::MatrixXd::Zero(1, 1));
    mp.dec[0] = layer("dec0", d1, d1);
    mp.dec[1] = layer("dec1", d1, 1);
    return mp;
}

Eigen::MatrixXd StructureModel::adjacency_metric() const { return adjacency_value(params_[metric_.adjacency].value); }

Eigen::MatrixXd StructureModel::adjacency_log() const { return adjacency_value(params_[log_.adjacency].value); }

Eigen::MatrixXd LaggedBatch::history_rows() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n) * m, p);
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < m; ++t) out.row(static_cast<Eigen::Index>(i) * m + t) = history.block(i, t * p, 1, p);
    }
    return out;
}

ad::Var sage_layer(ad::Var rows, ad::Var adj, ad::Var weight, ad::Var bias, bool activate) {
    const auto in = rows.cols();
    if (weight.rows() != 2 * in) throw std::invalid_argument("sage_layer: weight must have 2*in rows");
    // [x_j, sum_i A(i, j) x_i] W  ==  x_j W_self + sum_i A(i, j) (x_i W_neigh)
    ad::Var self = ad::matmul(rows, ad::slice_rows(weight, 0, in));
    ad::Var neigh = ad::aggregate_nodes(adj, ad::matmul(rows, ad::slice_rows(weight, in, in)));
    ad::Var z = ad::add_row(ad::add(self, neigh), bias);
    return activate ? ad::tanh(z) : z;
}

Encoded encode(ad::Var history, ad::Var adj, const std::vector<ad::Var>& bound, const ModalityParams& mp, int n, int m,
               int p) {
    if (history.rows() != static_cast<Eigen::Index>(n) * m || history.cols() != p || adj.rows() != n) {
        throw std::invalid_argument("encode: history must be (n*m) x p rows with an n x n adjacency");
    }
    auto run = [&](const SageLayer (&layers)[2]) {
        ad::Var h1 = sage_layer(history, adj, bound[layers[0].weight], bound[layers[0].bias], true);
        return sage_layer(h1, adj, bound[layers[1].weight], bound[layers[1].bias], true);
    };
    ad::Var rc = run(mp.enc_c);
    ad::Var rs = run(mp.enc_s);

    // Mean over the m timesteps, then a one-hidden-layer perceptron.
    Eigen::MatrixXd pool = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n) * m);
    for (int i = 0; i < n; ++i) pool.block(i, static_cast<Eigen::Index>(i) * m, 1, m).setConstant(1.0 / m);
    ad::Var pooled = ad::matmul(history.tape->constant(std::move(pool)), rc);
    ad::Var hidden = ad::tanh(ad::add_row(ad::matmul(pooled, bound[mp.mlp_w1]), bound[mp.mlp_b1]));
    ad::Var h = ad::add_row(ad::matmul(hidden, bound[mp.mlp_w2]), bound[mp.mlp_b2]);
    return {rc, rs, h};
}

ad::Var decode(ad::Var combined, ad::Var adj, const std::vector<ad::Var>& bound, const ModalityParams& mp, int n, int m) {
    if (combined.rows() != static_cast<Eigen::Index>(n) * m) {
        throw std::invalid_argument("decode: representation must have n*m rows");
    }
    ad::Var h1 = sage_layer(combined, adj, bound[mp.dec[0].weight], bound[mp.dec[0].bias], true);
    ad::Var out = sage_layer(h1, adj, bound[mp.dec[1].weight], bound[mp.dec[1].bias], false);
    return out;
}

ad::Var loss_var(ad::Var target, ad::Var prediction) { return ad::sum_squares(ad::sub(target, prediction)); }

ad::Var loss_node(ad::Var h_metric, ad::Var h_log, double temperature, NodeLossForm form) {
    if (h_metric.rows() != h_log.rows() || h_metric.cols() != h_log.cols()) {
        throw std::invalid_argument("loss_node: representation shapes differ");
    }
    auto& tape = *h_metric.tape;
    const auto n = h_metric.rows();
    ad::Var cos = ad::matmul(ad::normalize_rows(h_metric), ad::transpose(ad::normalize_rows(h_log)));
    ad::Var eye = tape.constant(Eigen::MatrixXd::Identity(n, n));
    if (form == NodeLossForm::cosine_ratio) {
        ad::Var ratio = ad::div(ad::row_sums(ad::mul(cos, eye)), ad::row_sums(cos));
        return ad::scale(ad::sum(ratio), -1.0 / static_cast<double>(n));
    }
    ad::Var logits = ad::scale(cos, 1.0 / temperature);
    ad::Var positive = ad::row_sums(ad::mul(logits, eye));
    ad::Var lse = ad::logsumexp_rows(logits);
    return ad::scale(ad::sum(ad::sub(lse, positive)), 1.0 / static_cast<double>(n));
}

ad::Var loss_orth(ad::Var rc, ad::Var rs, int n, int m) {
    if (rc.rows() != rs.rows() || rc.cols() != rs.cols() || rc.rows() != static_cast<Eigen::Index>(n) * m) {
        throw std::invalid_argument("loss_orth: representations must both be (n*m) x d1");
    }
    std::vector<ad::Var> terms;
    terms.reserve(n);
    for (int i = 0; i < n; ++i) {
        ad::Var rs_i = ad::slice_rows(rs, static_cast<Eigen::Index>(i) * m, m);
        ad::Var rc_i = ad::slice_rows(rc, static_cast<Eigen::Index>(i) * m, m);
        terms.push_back(ad::sum_squares(ad::matmul(ad::transpose(rs_i), rc_i)));
    }
    return ad::sum(ad::concat_cols(terms));
}

ad::Var loss_edge(ad::Var h, ad::Var adj, ad::Var edge_w, ad::Var edge_b) {
    auto& tape = *h.tape;
    const auto n = h.rows();
    const auto d2 = h.cols();
    if (edge_w.rows() != 2 * d2 || edge_w.cols() != 1) throw std::invalid_argument("loss_edge: edge head must be (2*d2) x 1");
    // G([H_i, H_j]) = sigmoid(H_i . w_src + H_j . w_dst + b)
    ad::Var src = ad::matmul(h, ad::slice_rows(edge_w, 0, d2));
    ad::Var dst = ad::matmul(h, ad::slice_rows(edge_w, d2, d2));
    ad::Var ones_row = tape.constant(Eigen::MatrixXd::Ones(1, n));
    ad::Var ones_col = tape.constant(Eigen::MatrixXd::Ones(n, 1));
    ad::Var logits = ad::add(ad::matmul(src, ones_row), ad::matmul(ones_col, ad::transpose(dst)));
    logits = ad::add(logits, ad::matmul(ones_col, ad::matmul(edge_b, ones_row)));
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(n, n);
    mask.diagonal().setZero();
    ad::Var diff = ad::mul(ad::sub(ad::sigmoid(logits), adj), tape.constant(std::move(mask)));
    return ad::sum_squares(diff);
}

ad::Var acyclicity(ad::Var adj) {
    return ad::add_scalar(ad::trace_expm(ad::mul(adj, adj)), -static_cast<double>(adj.rows()));
}

double loss_var(const Eigen::MatrixXd& target, const Eigen::MatrixXd& prediction) {
    if (target.rows() != prediction.rows() || target.cols() != prediction.cols()) {
        throw std::invalid_argument("loss_var: shape mismatch");
    }
    return (target - prediction).squaredNorm();
}

double loss_node(const Eigen::MatrixXd& h_metric, const Eigen::MatrixXd& h_log, double temperature, NodeLossForm form) {
    ad::Tape tape;
    return loss_node(tape.constant(h_metric), tape.constant(h_log), temperature, form).scalar();
}

double loss_orth(const Eigen::MatrixXd& rc, const Eigen::MatrixXd& rs, int n, int m) {
    ad::Tape tape;
    return loss_orth(tape.constant(rc), tape.constant(rs), n, m).scalar();
}

double loss_edge(const Eigen::MatrixXd& edge_prob, const Eigen::MatrixXd& adj) {
    if (edge_prob.rows() != adj.rows() || edge_prob.cols() != adj.cols()) throw std::invalid_argument("loss_edge: shape mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < adj.rows(); ++i) {
        for (Eigen::Index j = 0; j < adj.cols(); ++j) {
            if (i == j) continue;
            const double d = edge_prob(i, j) - adj(i, j);
            s += d * d;
        }
    }
    return s;
}

double acyclicity(const Eigen::MatrixXd& adj) {
    if (adj.rows() != adj.cols()) throw std::invalid_argument("acyclicity: matrix must be square");
    return expm(adj.cwiseProduct(adj)).trace() - static_cast<double>(adj.rows());
}

double combine_terms(const LearnerConfig& c, const LossBreakdown& t) {
    return c.lambda_var * t.var + c.lambda_orth * t.orth + c.lambda_node * t.node + c.lambda_edge * t.edge +
           c.lambda_sparse * t.sparsity + t.multiplier * (t.h_metric + t.h_log);
}

ad::Var total_objective(ad::Tape& tape, const std::vector<ad::Var>& bound, const StructureModel& model,
                        const LaggedBatch& metric, const LaggedBatch& log, AttentionWeights attention,
                        double acyclicity_weight, LossBreakdown* breakdown) {
    const auto& cfg = model.config();
    const int n = model.n_nodes();
    if (metric.n != n || log.n != n || metric.m != log.m || metric.p != cfg.p || log.p != cfg.p) {
        throw std::invalid_argument("total_objective: batches disagree with the model shape");
    }
    const int m = metric.m;
    const auto& mm = model.metric();
    const auto& ml = model.log();

    ad::Var a_m = adjacency(bound[mm.adjacency]);
    ad::Var a_l = adjacency(bound[ml.adjacency]);
    Encoded enc_m = encode(tape.constant(metric.history_rows()), a_m, bound, mm, n, m, cfg.p);
    Encoded enc_l = encode(tape.constant(log.history_rows()), a_l, bound, ml, n, m, cfg.p);

    ad::Var rc = ad::add(ad::scale(enc_l.rc, attention.a_log), ad::scale(enc_m.rc, attention.a_metric));
    ad::Var pred_m = decode(ad::add(rc, enc_m.rs), a_m, bound, mm, n, m);
    ad::Var pred_l = decode(ad::add(rc, enc_l.rs), a_l, bound, ml, n, m);

    ad::Var var = ad::add(loss_var(tape.constant(metric.target_rows()), pred_m),
                          loss_var(tape.constant(log.target_rows()), pred_l));
    ad::Var orth = ad::add(loss_orth(enc_m.rc, enc_m.rs, n, m), loss_orth(enc_l.rc, enc_l.rs, n, m));
    ad::Var node = loss_node(enc_m.h, enc_l.h, cfg.temperature, cfg.node_loss_form);
    ad::Var edge = ad::add(loss_edge(enc_m.h, a_m, bound[mm.edge_w], bound[mm.edge_b]),
                           loss_edge(enc_l.h, a_l, bound[ml.edge_w], bound[ml.edge_b]));
    ad::Var sparsity = ad::add(ad::sum(ad::abs(a_m)), ad::sum(ad::abs(a_l)));
    ad::Var h_m = acyclicity(a_m);
    ad::Var h_l = acyclicity(a_l);

    ad::Var total = ad::scale(var, cfg.lambda_var);
    total = ad::add(total, ad::scale(orth, cfg.lambda_orth));
    total = ad::add(total, ad::scale(node, cfg.lambda_node));
    total = ad::add(total, ad::scale(edge, cfg.lambda_edge));
    total = ad::add(total, ad::scale(sparsity, cfg.lambda_sparse));
    total = ad::add(total, ad::scale(ad::add(h_m, h_l), acyclicity_weight));

    if (breakdown) {
        breakdown->var = var.scalar();
        breakdown->orth = orth.scalar();
        breakdown->node = node.scalar();
        breakdown->edge = edge.scalar();
        breakdown->sparsity = sparsity.scalar();
        breakdown->h_metric = h_m.scalar();
        breakdown->h_log = h_l.scalar();
        breakdown->multiplier = acyclicity_weight;
        breakdown->total = total.scalar();
    }
    return total;
}

LearnedStructure fit(const ModalityPanel& metric_panel, const ModalityPanel& log_panel, AttentionWeights attention,
                     const LearnerConfig& config) {
    validate(config);
    validate_panel(metric_panel, 2 * config.p);
    validate_panel(log_panel, 2 * config.p);
    if (metric_panel.values.rows() != log_panel.values.rows() || metric_panel.values.cols() != log_panel.values.cols()) {
        throw std::invalid_argument("metric and log panels must share n and T");
    }
    if (attention.a_log < 0.0 || attention.a_metric < 0.0 || std::abs(attention.a_log + attention.a_metric - 1.0) > 1e-9) {
        throw std::invalid_argument("attention weights must be non-negative and sum to 1");
    }
    const ModalityPanel mp = config.standardize ? standardize_rows(metric_panel) : metric_panel;
    const ModalityPanel lp = config.standardize ? standardize_rows(log_panel) : log_panel;
    const auto metric = build_lagged(mp, config.p);
    const auto log = build_lagged(lp, config.p);

    StructureModel model(static_cast<int>(mp.values.rows()), config);
    Adam adam(config.lr);
    if (config.weight_decay > 0.0) {
        std::vector<double> decay(model.parameters().size(), config.weight_decay);
        decay[model.metric().adjacency] = 0.0;
        decay[model.log().adjacency] = 0.0;
        adam.set_decay(std::move(decay));
    }
    LearnedStructure out;
    out.config = config;
    out.attention = attention;
    out.node_names = metric_panel.node_names();
    out.loss_history.reserve(config.epochs);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        ad::Tape tape;
        auto bound = model.parameters().bind(tape);
        LossBreakdown terms;
        ad::Var total = total_objective(tape, bound, model, metric, log, attention, acyclicity_multiplier(config, epoch), &terms);
        if (!std::isfinite(terms.total)) {
            throw std::runtime_error("structure learning objective became non-finite at epoch " + std::to_string(epoch));
        }
        out.loss_history.push_back(terms);
        tape.backward(total);
        adam.step(model.parameters(), ParameterSet::grads(tape, bound));
    }

    out.a_metric = model.adjacency_metric();
    out.a_log = model.adjacency_log();
    out.parameters = model.parameters();
    out.converged = acyclicity(out.a_metric) <= config.acyclicity_tolerance &&
                    acyclicity(out.a_log) <= config.acyclicity_tolerance;
    return out;
}

Eigen::MatrixXi threshold(const Eigen::MatrixXd& adj, double cutoff) {
    return (adj.array() > cutoff).cast<int>().matrix();
}

int structural_hamming_distance(const Eigen::MatrixXi& learned, const Eigen::MatrixXi& truth) {
    if (learned.rows() != truth.rows() || learned.cols() != truth.cols() || learned.rows() != learned.cols()) {
        throw std::invalid_argument("structural_hamming_distance: shape mismatch");
    }
    int d = 0;
    const auto n = learned.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const bool same = (learned(i, j) != 0) == (truth(i, j) != 0) && (learned(j, i) != 0) == (truth(j, i) != 0);
            if (!same) ++d;
        }
    }
    return d;
}

}  // namespace mmrca::causal
