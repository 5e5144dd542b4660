#pragma once

// Independent reference implementations used as test oracles, plus a
// central-difference gradient checker.

#include "mmrca/autodiff.hpp"
#include "mmrca/optim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// exp(a) by the first `terms` terms of the power series.
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& a, int terms = 30) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd term = sum;
    for (int k = 1; k < terms; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

// Depth-first search for a directed cycle through edges with weight > 0.
inline bool has_cycle(const Eigen::MatrixXd& a) {
    const auto n = a.rows();
    std::vector<int> color(static_cast<std::size_t>(n), 0);
    std::function<bool(Eigen::Index)> visit = [&](Eigen::Index u) {
        color[u] = 1;
        for (Eigen::Index v = 0; v < n; ++v) {
            if (a(u, v) <= 0.0) continue;
            if (color[v] == 1) return true;
            if (color[v] == 0 && visit(v)) return true;
        }
        color[u] = 2;
        return false;
    };
    for (Eigen::Index u = 0; u < n; ++u) {
        if (color[u] == 0 && visit(u)) return true;
    }
    return false;
}

// Cyclic Jacobi rotations; returns eigenvalues in descending order and the
// matching eigenvectors as columns.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd s, int sweeps = 100) {
    const auto n = s.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        }
        if (off < 1e-26) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(s(p, q)) < 1e-300) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s(a, a) > s(b, b); });
    Eigen::VectorXd values(n);
    Eigen::MatrixXd vectors(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values(i) = s(idx[i], idx[i]);
        vectors.col(i) = v.col(idx[i]);
    }
    return {values, vectors};
}

// Fixed point of p = (1 - c) P^T p + c p0 by a dense solve.
inline Eigen::VectorXd rwr_solve(const Eigen::MatrixXd& p, const Eigen::VectorXd& p0, double c) {
    const auto n = p.rows();
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - (1.0 - c) * p.transpose();
    return lhs.fullPivLu().solve(c * p0);
}

// Random weighted DAG: edges only from earlier to later positions of a random
// order, weights in (0, 1].
inline Eigen::MatrixXd random_dag(int n, std::mt19937_64& rng, double density = 0.5) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int x = 0; x < n; ++x) {
        for (int y = x + 1; y < n; ++y) {
            if (u(rng) < density) a(order[x], order[y]) = 1.0 - u(rng);
        }
    }
    return a;
}

}  // namespace oracle

namespace gradcheck {

struct Report {
    double worst = 0.0;  // largest per-group relative error
    std::string worst_name;
};

// Compares analytic gradients of `objective` (built on a fresh tape from the
// bound parameters) with central differences, group by group:
// ||g_analytic - g_numeric|| / max(||g_numeric||, floor).
inline Report check(mmrca::ParameterSet& params,
                    const std::function<mmrca::ad::Var(mmrca::ad::Tape&, const std::vector<mmrca::ad::Var>&)>& objective,
                    double eps = 1e-4, double floor = 1e-6) {
    mmrca::ad::Tape tape;
    auto bound = params.bind(tape);
    auto root = objective(tape, bound);
    tape.backward(root);
    auto analytic = mmrca::ParameterSet::grads(tape, bound);

    auto eval = [&] {
        mmrca::ad::Tape t;
        auto b = params.bind(t);
        return objective(t, b).scalar();
    };
    Report rep;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i].value;
        Eigen::MatrixXd numeric(value.rows(), value.cols());
        for (Eigen::Index k = 0; k < value.size(); ++k) {
            const double orig = value.data()[k];
            value.data()[k] = orig + eps;
            const double up = eval();
            value.data()[k] = orig - eps;
            const double down = eval();
            value.data()[k] = orig;
            numeric.data()[k] = (up - down) / (2.0 * eps);
        }
        const double err = (analytic[i] - numeric).norm() / std::max(numeric.norm(), floor);
        if (err > rep.worst) {
            rep.worst = err;
            rep.worst_name = params[i].name;
        }
    }
    return rep;
}

}  // namespace gradcheck
