#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every intermediate value together with a closure that
// propagates its gradient back to its parents. Scalars are 1x1 matrices.
// Tapes are cheap to build and are meant to be thrown away after a single
// forward/backward pass.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mmrca::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const;
};

class Tape {
public:
    Tape() { nodes_.reserve(1024); }

    // Value that does not require a gradient.
    Var constant(Matrix value);
    // Value that accumulates a gradient (a parameter or an input under test).
    Var leaf(Matrix value);

    // Seeds d(root)/d(root) = 1 and propagates to every node; root must be 1x1.
    void backward(Var root);

    const Matrix& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    // Gradient of the last backward root w.r.t. a leaf `id` (zeros if unreached).
    // Gradients of intermediate nodes are released during backward().
    Matrix grad(int id) const;
    // Adds `g` into the gradient slot of node `id` if it participates in backprop.
    void accumulate(int id, const Matrix& g);
    // Adds `g` into a sub-block of node `id`'s gradient.
    void accumulate_block(int id, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols,
                          const Matrix& g);

    using Backward = std::function<void(Tape&, const Matrix& grad_out)>;
    Var record(Matrix value, bool needs_grad, Backward backward);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        bool has_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

// Elementwise and linear algebra.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);          // Hadamard product
Var div(Var a, Var b);          // elementwise quotient
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_row(Var a, Var row);    // broadcasts a 1xC row over every row of a

// Pointwise nonlinearities.
Var tanh(Var a);
Var sigmoid(Var a);
Var gelu(Var a);                // tanh approximation
Var exp(Var a);
Var log(Var a);
Var abs(Var a);

// Reductions (all return 1x1 unless noted).
Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);
Var row_sums(Var a);            // Rx1
Var logsumexp_rows(Var a);      // Rx1

// Row-wise transforms.
Var softmax_rows(Var a);
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
Var normalize_rows(Var a, double eps = 1e-8);   // x / max(||x||, eps)

// Shape manipulation.
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var table, std::span<const int> indices);
// Message passing over rows indexed i*m + t (n nodes, m timesteps):
// out[j*m + t] = sum_i adj(i, j) * rows[i*m + t].
Var aggregate_nodes(Var adj, Var rows);

// tr(exp(a)) with gradient exp(a)^T.
Var trace_expm(Var a);

}  // namespace mmrca::ad
