#include "mmrca/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mmrca::fusion {

namespace {

double lagged_correlation(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, int lag, CorrelationMode mode) {
    const auto len = x.size() - lag;
    const Eigen::RowVectorXd xs = x.segment(lag, len);
    const Eigen::RowVectorXd ys = y.segment(0, len);
    if (mode == CorrelationMode::raw) return xs.dot(ys);
    const Eigen::RowVectorXd xc = xs.array() - xs.mean();
    const Eigen::RowVectorXd yc = ys.array() - ys.mean();
    const double nx = xc.norm();
    const double ny = yc.norm();
    if (nx < 1e-12 || ny < 1e-12) return 0.0;
    return xc.dot(yc) / (nx * ny);
}

}  // namespace

ModalityScore cross_correlation_scores(const ModalityPanel& panel, int tau, Modality modality, CorrelationMode mode) {
    validate_panel(panel);
    const auto t = panel.values.cols();
    if (tau < 0) throw std::invalid_argument("max lag tau must be non-negative");
    if (tau >= t) {
        throw std::invalid_argument("max lag tau=" + std::to_string(tau) + " must be below T=" + std::to_string(t));
    }
    const auto ne = panel.n_entities();
    const Eigen::RowVectorXd y = panel.values.row(ne);
    ModalityScore out;
    out.modality = modality;
    out.max_lag = tau;
    out.scores.resize(ne);
    for (Eigen::Index i = 0; i < ne; ++i) {
        const Eigen::RowVectorXd x = panel.values.row(i);
        double best = -std::numeric_limits<double>::infinity();
        for (int lag = 0; lag <= tau; ++lag) best = std::max(best, lagged_correlation(x, y, lag, mode));
        out.scores(i) = best;
    }
    return out;
}

causal::AttentionWeights modality_attention(const ModalityScore& log_score, const ModalityScore& metric_score, int k) {
    auto topk_sum = [k](const Eigen::VectorXd& s) {
        if (k < 1 || k > s.size()) {
            throw std::invalid_argument("k=" + std::to_string(k) + " must lie in [1, " + std::to_string(s.size()) + "]");
        }
        std::vector<double> v(s.data(), s.data() + s.size());
        std::partial_sort(v.begin(), v.begin() + k, v.end(), std::greater<>());
        double total = 0.0;
        for (int i = 0; i < k; ++i) total += v[static_cast<std::size_t>(i)];
        return total;
    };
    const double sl = topk_sum(log_score.scores);
    const double sm = topk_sum(metric_score.scores);
    const double mx = std::max(sl, sm);
    const double el = std::exp(sl - mx);
    const double em = std::exp(sm - mx);
    return {el / (el + em), em / (el + em)};
}

FusedCausalGraph fuse(const Eigen::MatrixXd& a_log, const Eigen::MatrixXd& a_metric, causal::AttentionWeights weights,
                      std::vector<std::string> node_names) {
    if (a_log.rows() != a_metric.rows() || a_log.cols() != a_metric.cols() || a_log.rows() != a_log.cols()) {
        throw std::invalid_argument("fuse: adjacency shapes differ");
    }
    if (!node_names.empty() && static_cast<Eigen::Index>(node_names.size()) != a_log.rows()) {
        throw std::invalid_argument("fuse: node name count does not match adjacency size");
    }
    if (weights.a_log < 0 || weights.a_metric < 0 || std::abs(weights.a_log + weights.a_metric - 1.0) > 1e-9) {
        throw std::invalid_argument("fuse: weights must be non-negative and sum to 1");
    }
    FusedCausalGraph g;
    // Entries where both modalities agree are copied so the fixed point is exact.
    g.adjacency = (a_log.array() == a_metric.array())
                      .select(a_log, weights.a_log * a_log + weights.a_metric * a_metric);
    g.adjacency.diagonal().setZero();
    g.a_log = weights.a_log;
    g.a_metric = weights.a_metric;
    g.node_names = std::move(node_names);
    return g;
}

FusedCausalGraph fuse(const causal::LearnedStructure& structure, causal::AttentionWeights weights,
                      std::vector<std::string> node_names) {
    return fuse(structure.a_log, structure.a_metric, weights, std::move(node_names));
}

std::string to_dot(const FusedCausalGraph& graph, double threshold) {
    std::ostringstream os;
    os << "digraph fused {\n";
    const auto n = graph.adjacency.rows();
    auto name = [&](Eigen::Index i) {
        return i < static_cast<Eigen::Index>(graph.node_names.size()) ? graph.node_names[static_cast<std::size_t>(i)]
                                                                      : "n" + std::to_string(i);
    };
    for (Eigen::Index i = 0; i < n; ++i) os << "  \"" << name(i) << "\";\n";
    char buf[32];
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = graph.adjacency(i, j);
            if (w <= threshold) continue;
            std::snprintf(buf, sizeof buf, "%.4f", w);
            os << "  \"" << name(i) << "\" -> \"" << name(j) << "\" [weight=" << buf << ", label=\"" << buf << "\"];\n";
        }
    }
    os << "}\n";
    return os.str();
}

}  // namespace mmrca::fusion
