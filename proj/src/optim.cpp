#include "mmrca/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mmrca {

std::size_t ParameterSet::add(std::string name, Eigen::MatrixXd value) {
    params_.push_back({std::move(name), std::move(value)});
    return params_.size() - 1;
}

std::size_t ParameterSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    throw std::out_of_range("no parameter named '" + name + "'");
}

std::vector<ad::Var> ParameterSet::bind(ad::Tape& tape) const {
    std::vector<ad::Var> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(tape.leaf(p.value));
    return out;
}

std::vector<Eigen::MatrixXd> ParameterSet::grads(const ad::Tape& tape, const std::vector<ad::Var>& leaves) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(leaves.size());
    for (const auto& l : leaves) out.push_back(tape.grad(l.id));
    return out;
}

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd m(rows, cols);
    // Fill in row-major order so layouts do not depend on Eigen's storage order.
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

void Adam::step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads) {
    step(params, grads, std::vector<bool>(params.size(), true));
}

void Adam::step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads, const std::vector<bool>& mask) {
    if (grads.size() != params.size() || mask.size() != params.size()) {
        throw std::invalid_argument("Adam::step: gradient count does not match parameter count");
    }
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
            v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!mask[i]) continue;
        if (!decay_.empty() && decay_[i] > 0.0) params[i].value *= 1.0 - lr_ * decay_[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
        auto mhat = m_[i].array() / c1;
        auto vhat = v_[i].array() / c2;
        params[i].value.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
    }
}

}  // namespace mmrca
