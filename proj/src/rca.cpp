#include "mmrca/rca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mmrca::rca {

Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& adjacency, double beta) {
    const auto n = adjacency.rows();
    if (adjacency.cols() != n) throw std::invalid_argument("transition_matrix: adjacency must be square");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("transition_matrix: beta must lie in [0, 1]");
    if (!adjacency.allFinite() || (adjacency.array() < 0.0).any()) {
        throw std::invalid_argument("transition_matrix: adjacency entries must be finite and non-negative");
    }
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    const Eigen::RowVectorXd incoming = adjacency.colwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (incoming(i) <= 0.0) {
            p(i, i) = 1.0;
            continue;
        }
        for (Eigen::Index j = 0; j < n; ++j) p(i, j) = (1.0 - beta) * adjacency(j, i) / incoming(i);
        p(i, i) += beta;
    }
    return p;
}

RwrResult rwr(const Eigen::MatrixXd& transition, const Eigen::VectorXd& p0, double restart, double tol, int max_iter,
              const Eigen::VectorXd* start) {
    const auto n = transition.rows();
    if (transition.cols() != n || p0.size() != n) throw std::invalid_argument("rwr: shape mismatch");
    if (!(restart > 0.0 && restart <= 1.0)) throw std::invalid_argument("rwr: restart probability must lie in (0, 1]");
    if (max_iter < 1) throw std::invalid_argument("rwr: max_iter must be positive");
    if ((transition.array() < 0.0).any()) throw std::invalid_argument("rwr: transition matrix has negative entries");
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = transition.row(i).sum();
        if (std::abs(s - 1.0) > 1e-9) {
            throw std::invalid_argument("rwr: transition row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
    if ((p0.array() < 0.0).any() || std::abs(p0.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("rwr: p0 must be a probability distribution");
    }

    const Eigen::MatrixXd pt = transition.transpose();
    RwrResult out;
    Eigen::VectorXd p = start ? *start : p0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd next = (1.0 - restart) * (pt * p) + restart * p0;
        out.max_mass_drift = std::max(out.max_mass_drift, std::abs(next.sum() - 1.0));
        const double delta = (next - p).lpNorm<1>();
        p = std::move(next);
        out.iterations = it;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    out.scores = std::move(p);
    return out;
}

RankedRootCauses rank_root_causes(const Eigen::VectorXd& scores, const std::vector<std::string>& node_names, int k) {
    if (k < 1) throw std::invalid_argument("rank_root_causes: k must be at least 1");
    const auto n = scores.size();
    if (n < 1) throw std::invalid_argument("rank_root_causes: empty score vector");
    if (!node_names.empty() && static_cast<Eigen::Index>(node_names.size()) != n) {
        throw std::invalid_argument("rank_root_causes: one name per node required");
    }
    std::vector<int> idx(static_cast<std::size_t>(n - 1));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return a < b;
    });
    RankedRootCauses out;
    out.scores = scores;
    const auto keep = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < keep; ++r) {
        const int i = idx[r];
        const auto name = node_names.empty() ? "entity_" + std::to_string(i) : node_names[static_cast<std::size_t>(i)];
        out.ranking.push_back({name, i, scores(i)});
    }
    return out;
}

RankedRootCauses localize(const Eigen::MatrixXd& adjacency, const std::vector<std::string>& node_names,
                          const RwrConfig& config) {
    const auto n = adjacency.rows();
    const auto p = transition_matrix(adjacency, config.beta);
    Eigen::VectorXd p0 = Eigen::VectorXd::Zero(n);
    p0(n - 1) = 1.0;
    auto walk = rwr(p, p0, config.restart, config.tol, config.max_iter);
    auto ranked = rank_root_causes(walk.scores, node_names, static_cast<int>(std::max<Eigen::Index>(1, n - 1)));
    ranked.converged = walk.converged;
    ranked.iterations = walk.iterations;
    return ranked;
}

}  // namespace mmrca::rca
