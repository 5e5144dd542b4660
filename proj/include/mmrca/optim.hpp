#pragma once

#include "mmrca/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mmrca {

// A named trainable tensor.
struct Parameter {
    std::string name;
    Eigen::MatrixXd value;
};

// Ordered collection of parameters. Order is stable and defines checkpoint layout.
class ParameterSet {
public:
    // Returns the index of the new parameter.
    std::size_t add(std::string name, Eigen::MatrixXd value);
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::size_t find(const std::string& name) const;  // throws if absent
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    // Binds every parameter as a gradient leaf on `tape`; result is index-aligned.
    std::vector<ad::Var> bind(ad::Tape& tape) const;
    // Reads gradients for leaves produced by bind().
    static std::vector<Eigen::MatrixXd> grads(const ad::Tape& tape, const std::vector<ad::Var>& leaves);

private:
    std::vector<Parameter> params_;
};

// Xavier/Glorot uniform initialisation.
Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads);
    // Only parameters with mask[i] == true are updated; moments are kept for all.
    void step(ParameterSet& params, const std::vector<Eigen::MatrixXd>& grads, const std::vector<bool>& mask);

    void set_lr(double lr) { lr_ = lr; }
    // Decoupled weight decay per parameter (AdamW); empty disables it.
    void set_decay(std::vector<double> decay) { decay_ = std::move(decay); }
    std::int64_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
    std::vector<double> decay_;
};

}  // namespace mmrca
