#include "mmrca/log_encoder.hpp"

#include "mmrca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mmrca::encoder {

void validate(const EncoderConfig& c) {
    if (c.d_model <= 0 || c.n_layers <= 0 || c.n_heads <= 0 || c.max_len <= 0 || c.epochs <= 0 ||
        c.batch_size <= 0 || c.freq_buckets <= 1 || !(c.lr > 0)) {
        throw std::invalid_argument("encoder config values must be positive (freq_buckets >= 2)");
    }
    if (c.d_model % c.n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
    if (c.max_len < 3) throw std::invalid_argument("max_len must hold CLS plus one template/frequency pair");
}

int frequency_bucket(int frequency, int freq_buckets) {
    if (frequency <= 0) return 0;
    int log2f = 0;
    while ((frequency >> (log2f + 1)) > 0) ++log2f;
    return std::min(freq_buckets - 1, log2f + 1);
}

int bucket_token(int bucket) { return kReservedTokens + bucket; }

int template_token(int template_id, int freq_buckets) { return kReservedTokens + freq_buckets + template_id; }

int vocabulary_size(int n_templates, int freq_buckets) { return kReservedTokens + freq_buckets + n_templates; }

TokenSequence tokenize(const logs::LogSequenceWindow& window, const EncoderConfig& config) {
    TokenSequence seq;
    seq.max_len = config.max_len;
    std::vector<int> full{kClsToken};
    if (window.is_empty_window()) {
        full.push_back(kEmptyToken);
        full.push_back(bucket_token(0));
    } else {
        for (std::size_t k = 0; k < window.templates.size(); ++k) {
            full.push_back(template_token(window.templates[k], config.freq_buckets));
            full.push_back(bucket_token(frequency_bucket(window.frequencies[k], config.freq_buckets)));
        }
    }
    // Truncate on pair boundaries so a template never loses its frequency.
    std::size_t keep = full.size();
    if (keep > static_cast<std::size_t>(config.max_len)) {
        keep = 1 + ((static_cast<std::size_t>(config.max_len) - 1) / 2) * 2;
    }
    seq.truncated = static_cast<int>(full.size() - keep);
    full.resize(keep);
    seq.tokens = std::move(full);
    return seq;
}

LogEncoder::LogEncoder(EncoderConfig config, int n_templates) : config_(config), n_templates_(n_templates) {
    validate(config_);
    if (n_templates < 0) throw std::invalid_argument("n_templates must be non-negative");
    std::mt19937_64 rng(config_.seed);
    std::normal_distribution<double> emb(0.0, 0.1);
    const int d = config_.d_model;
    const int ff = 2 * d;
    const int vocab = vocabulary_size(n_templates, config_.freq_buckets);

    auto normal_matrix = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) m(i, j) = emb(rng);
        }
        return m;
    };
    tok_emb_ = params_.add("tok_emb", normal_matrix(vocab, d));
    pos_emb_ = params_.add("pos_emb", normal_matrix(config_.max_len, d));
    for (int l = 0; l < config_.n_layers; ++l) {
        const auto p = "layer" + std::to_string(l) + ".";
        LayerIndex li{};
        li.ln1_g = params_.add(p + "ln1_g", Eigen::MatrixXd::Ones(1, d));
        li.ln1_b = params_.add(p + "ln1_b", Eigen::MatrixXd::Zero(1, d));
        li.wq = params_.add(p + "wq", glorot(d, d, rng));
        li.wk = params_.add(p + "wk", glorot(d, d, rng));
        li.wv = params_.add(p + "wv", glorot(d, d, rng));
        li.wo = params_.add(p + "wo", glorot(d, d, rng));
        li.bo = params_.add(p + "bo", Eigen::MatrixXd::Zero(1, d));
        li.ln2_g = params_.add(p + "ln2_g", Eigen::MatrixXd::Ones(1, d));
        li.ln2_b = params_.add(p + "ln2_b", Eigen::MatrixXd::Zero(1, d));
        li.w1 = params_.add(p + "w1", glorot(d, ff, rng));
        li.b1 = params_.add(p + "b1", Eigen::MatrixXd::Zero(1, ff));
        li.w2 = params_.add(p + "w2", glorot(ff, d, rng));
        li.b2 = params_.add(p + "b2", Eigen::MatrixXd::Zero(1, d));
        layers_.push_back(li);
    }
    lnf_g_ = params_.add("lnf_g", Eigen::MatrixXd::Ones(1, d));
    lnf_b_ = params_.add("lnf_b", Eigen::MatrixXd::Zero(1, d));
    head_w_ = params_.add("head_w", glorot(d, 1, rng));
    head_b_ = params_.add("head_b", Eigen::MatrixXd::Zero(1, 1));
}

LogEncoder::Output LogEncoder::forward(ad::Tape& /*tape*/, const std::vector<ad::Var>& p, std::span<const int> tokens) const {
    const auto len = static_cast<Eigen::Index>(tokens.size());
    if (len == 0 || len > config_.max_len) throw std::invalid_argument("token sequence length out of range");
    const int d = config_.d_model;
    const int dh = d / config_.n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    ad::Var x = ad::add(ad::gather_rows(p[tok_emb_], tokens), ad::slice_rows(p[pos_emb_], 0, len));
    for (const auto& li : layers_) {
        ad::Var h = ad::layer_norm_rows(x, p[li.ln1_g], p[li.ln1_b]);
        ad::Var q = ad::matmul(h, p[li.wq]);
        ad::Var k = ad::matmul(h, p[li.wk]);
        ad::Var v = ad::matmul(h, p[li.wv]);
        std::vector<ad::Var> heads;
        heads.reserve(config_.n_heads);
        for (int hd = 0; hd < config_.n_heads; ++hd) {
            ad::Var qh = ad::slice_cols(q, hd * dh, dh);
            ad::Var kh = ad::slice_cols(k, hd * dh, dh);
            ad::Var vh = ad::slice_cols(v, hd * dh, dh);
            ad::Var att = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
            heads.push_back(ad::matmul(att, vh));
        }
        ad::Var o = ad::add_row(ad::matmul(ad::concat_cols(heads), p[li.wo]), p[li.bo]);
        x = ad::add(x, o);
        ad::Var h2 = ad::layer_norm_rows(x, p[li.ln2_g], p[li.ln2_b]);
        ad::Var f = ad::gelu(ad::add_row(ad::matmul(h2, p[li.w1]), p[li.b1]));
        f = ad::add_row(ad::matmul(f, p[li.w2]), p[li.b2]);
        x = ad::add(x, f);
    }
    ad::Var fin = ad::layer_norm_rows(x, p[lnf_g_], p[lnf_b_]);
    ad::Var cls = ad::slice_rows(fin, 0, 1);
    ad::Var score = ad::sigmoid(ad::add(ad::matmul(cls, p[head_w_]), p[head_b_]));
    return {cls, score};
}

ad::Var LogEncoder::loss(ad::Tape& tape, const std::vector<ad::Var>& bound, std::span<const TokenSequence> seqs,
                         std::span<const double> labels) const {
    if (seqs.size() != labels.size() || seqs.empty()) throw std::invalid_argument("loss: need one label per sequence");
    std::vector<ad::Var> terms;
    terms.reserve(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        auto out = forward(tape, bound, seqs[i].tokens);
        Eigen::MatrixXd y(1, 1);
        y(0, 0) = labels[i];
        terms.push_back(ad::sub(out.score, tape.constant(y)));
    }
    ad::Var residuals = ad::concat_cols(terms);
    return ad::scale(ad::sum_squares(residuals), 1.0 / static_cast<double>(seqs.size()));
}

namespace {

std::vector<ad::Var> bind_constants(ad::Tape& tape, const ParameterSet& params) {
    std::vector<ad::Var> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(tape.constant(p.value));
    return out;
}

struct UniqueSequence {
    TokenSequence seq;
    double label_sum = 0.0;
    double label_sq_sum = 0.0;
    int count = 0;
};

std::vector<UniqueSequence> group_sequences(const std::vector<logs::LogSequenceWindow>& windows,
                                            const EncoderConfig& config) {
    std::map<std::vector<int>, std::size_t> index;
    std::vector<UniqueSequence> groups;
    for (const auto& w : windows) {
        auto seq = tokenize(w, config);
        auto [it, inserted] = index.try_emplace(seq.tokens, groups.size());
        if (inserted) groups.push_back({std::move(seq), 0.0, 0.0, 0});
        auto& g = groups[it->second];
        g.label_sum += w.label;
        g.label_sq_sum += w.label * w.label;
        ++g.count;
    }
    return groups;
}

}  // namespace

double LogEncoder::predict(const TokenSequence& seq) const {
    ad::Tape tape;
    auto bound = bind_constants(tape, params_);
    return forward(tape, bound, seq.tokens).score.scalar();
}

Eigen::RowVectorXd LogEncoder::embed(const TokenSequence& seq) const {
    ad::Tape tape;
    auto bound = bind_constants(tape, params_);
    return forward(tape, bound, seq.tokens).cls.value().row(0);
}

LogEncoder train_log_encoder(const std::vector<logs::LogSequenceWindow>& windows, int n_templates,
                             const EncoderConfig& config) {
    if (windows.empty()) throw std::invalid_argument("train_log_encoder: no windows");
    for (const auto& w : windows) {
        if (!(w.label >= 0.0 && w.label <= 1.0)) throw std::invalid_argument("window label outside [0, 1]");
    }
    LogEncoder enc(config, n_templates);
    auto groups = group_sequences(windows, config);
    const double total = static_cast<double>(windows.size());
    // Within-group label variance is irreducible; it is added back so the
    // recorded loss is the true per-window mean squared error.
    double irreducible = 0.0;
    for (const auto& g : groups) irreducible += g.label_sq_sum - g.label_sum * g.label_sum / g.count;
    irreducible /= total;

    std::mt19937_64 rng(config.seed + 1);
    Adam adam(config.lr);
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            ad::Tape tape;
            auto bound = enc.parameters().bind(tape);
            std::vector<ad::Var> terms;
            double batch_weight = 0.0;
            for (auto k = start; k < stop; ++k) batch_weight += groups[order[k]].count;
            for (auto k = start; k < stop; ++k) {
                const auto& g = groups[order[k]];
                auto out = enc.forward(tape, bound, g.seq.tokens);
                Eigen::MatrixXd y(1, 1);
                y(0, 0) = g.label_sum / g.count;
                auto r = ad::sub(out.score, tape.constant(y));
                terms.push_back(ad::scale(r, std::sqrt(g.count / batch_weight)));
            }
            auto batch_loss = ad::sum_squares(ad::concat_cols(terms));
            tape.backward(batch_loss);
            epoch_loss += batch_loss.scalar() * batch_weight / total;
            adam.step(enc.parameters(), ParameterSet::grads(tape, bound));
        }
        epoch_loss += irreducible;
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("log encoder loss became non-finite at epoch " + std::to_string(epoch));
        }
        enc.loss_history().push_back(epoch_loss);
    }
    return enc;
}

double mean_squared_error(const LogEncoder& encoder, const std::vector<logs::LogSequenceWindow>& windows) {
    if (windows.empty()) return 0.0;
    auto groups = group_sequences(windows, encoder.config());
    ad::Tape tape;
    auto bound = bind_constants(tape, encoder.parameters());
    double sse = 0.0;
    for (const auto& g : groups) {
        const double s = encoder.forward(tape, bound, g.seq.tokens).score.scalar();
        sse += g.count * s * s - 2.0 * s * g.label_sum + g.label_sq_sum;
    }
    return sse / static_cast<double>(windows.size());
}

Eigen::MatrixXd embed_windows(const LogEncoder& encoder, const std::vector<logs::LogSequenceWindow>& windows) {
    const int d = encoder.config().d_model;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), d);
    std::map<std::vector<int>, Eigen::RowVectorXd> cache;
    ad::Tape tape;
    auto bound = bind_constants(tape, encoder.parameters());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        auto seq = tokenize(windows[i], encoder.config());
        auto it = cache.find(seq.tokens);
        if (it == cache.end()) {
            Eigen::RowVectorXd row = encoder.forward(tape, bound, seq.tokens).cls.value().row(0);
            it = cache.emplace(seq.tokens, std::move(row)).first;
        }
        out.row(static_cast<Eigen::Index>(i)) = it->second;
    }
    return out;
}

ReducedSeries reduce_to_series(const Eigen::MatrixXd& embeddings, std::span<const WindowKey> keys,
                               std::span<const double> labels, int n_entities, const Eigen::RowVectorXd& kpi,
                               std::vector<std::string> entity_names, std::string kpi_name) {
    const auto n = embeddings.rows();
    if (static_cast<std::size_t>(n) != keys.size()) throw std::invalid_argument("one key per embedding row required");
    if (!labels.empty() && labels.size() != keys.size()) throw std::invalid_argument("labels must align with embeddings");
    if (n_entities < 1) throw std::invalid_argument("n_entities must be positive");
    const auto t_windows = kpi.size();
    if (n != static_cast<Eigen::Index>(n_entities) * t_windows) {
        throw std::invalid_argument("expected one embedding per (entity, window): " + std::to_string(n_entities) + " x " +
                                    std::to_string(t_windows));
    }

    ReducedSeries out;
    out.mean = embeddings.colwise().mean();
    Eigen::MatrixXd centered = embeddings.rowwise() - out.mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    auto top = top_eigen_symmetric(cov);
    out.explained_variance = top.value;
    out.direction = top.vector.normalized();

    Eigen::VectorXd proj = centered * out.direction;
    if (top.value <= 1e-14 * std::max(1.0, cov.trace())) {
        out.degenerate = true;
        proj.setZero();
        out.explained_variance = 0.0;
    } else {
        double corr = 0.0;
        if (!labels.empty()) {
            const double lm = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
            for (Eigen::Index i = 0; i < n; ++i) corr += proj(i) * (labels[static_cast<std::size_t>(i)] - lm);
        }
        bool flip = corr < 0.0;
        if (corr == 0.0) {
            // No label signal: make the largest-magnitude loading positive.
            Eigen::Index arg = 0;
            out.direction.cwiseAbs().maxCoeff(&arg);
            flip = out.direction(arg) < 0.0;
        }
        if (flip) {
            out.direction = -out.direction;
            proj = -proj;
        }
    }

    out.panel.values = Eigen::MatrixXd::Zero(n_entities + 1, t_windows);
    std::vector<bool> filled(static_cast<std::size_t>(n_entities) * t_windows, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& k = keys[static_cast<std::size_t>(i)];
        if (k.entity < 0 || k.entity >= n_entities || k.window_index < 0 || k.window_index >= t_windows) {
            throw std::invalid_argument("window key out of range");
        }
        const auto slot = static_cast<std::size_t>(k.entity) * t_windows + k.window_index;
        if (filled[slot]) throw std::invalid_argument("duplicate (entity, window) key");
        filled[slot] = true;
        out.panel.values(k.entity, k.window_index) = proj(i);
    }
    out.panel.values.row(n_entities) = kpi;
    if (entity_names.empty()) {
        for (int e = 0; e < n_entities; ++e) entity_names.push_back("entity_" + std::to_string(e));
    }
    out.panel.entity_names = std::move(entity_names);
    out.panel.kpi_name = std::move(kpi_name);
    return out;
}

}  // namespace mmrca::encoder
