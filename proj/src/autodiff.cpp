#include "mmrca/autodiff.hpp"

#include "mmrca/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mmrca::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

bool any_grad(std::initializer_list<Var> vars) {
    for (const auto& v : vars) {
        if (v.tape->needs_grad(v.id)) return true;
    }
    return false;
}

Matrix scalar_matrix(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
    const auto& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("Var::scalar on non-scalar");
    return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Matrix value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Matrix value, bool needs_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.backward = needs_grad ? std::move(backward) : nullptr;
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Matrix Tape::grad(int id) const {
    const auto& n = nodes_[id];
    if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

void Tape::accumulate_block(int id, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols,
                            const Matrix& g) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    n.grad.block(row, col, rows, cols) += g;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw std::logic_error("backward: foreign variable");
    if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward: root must be scalar");
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad.resize(0, 0);
    }
    accumulate(root.id, scalar_matrix(1.0));
    for (int i = root.id; i >= 0; --i) {
        auto& n = nodes_[i];
        if (!n.has_grad || !n.backward) continue;
        // Closures accumulate into earlier nodes only; this node's gradient is
        // not needed afterwards.
        const Matrix g = std::move(n.grad);
        n.has_grad = false;
        n.backward(*this, g);
    }
}

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    return a.tape->record(a.value() + b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g);
        t.accumulate(b.id, g);
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    return a.tape->record(a.value() - b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g);
        t.accumulate(b.id, -g);
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    return a.tape->record(a.value().cwiseProduct(b.value()), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
        if (t.needs_grad(b.id)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
    });
}

Var div(Var a, Var b) {
    require_same_shape(a, b, "div");
    return a.tape->record(a.value().cwiseQuotient(b.value()), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        const auto& bv = t.value(b.id);
        if (t.needs_grad(a.id)) t.accumulate(a.id, g.cwiseQuotient(bv));
        if (t.needs_grad(b.id)) {
            const Matrix q = t.value(a.id).cwiseQuotient(bv.cwiseProduct(bv));
            t.accumulate(b.id, -g.cwiseProduct(q));
        }
    });
}

Var scale(Var a, double s) {
    return a.tape->record(a.value() * s, any_grad({a}), [a, s](Tape& t, const Matrix& g) { t.accumulate(a.id, g * s); });
}

Var add_scalar(Var a, double s) {
    Matrix v = a.value().array() + s;
    return a.tape->record(std::move(v), any_grad({a}), [a](Tape& t, const Matrix& g) { t.accumulate(a.id, g); });
}

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    }
    return a.tape->record(a.value() * b.value(), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
        if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
    });
}

Var transpose(Var a) {
    return a.tape->record(a.value().transpose(), any_grad({a}),
                          [a](Tape& t, const Matrix& g) { t.accumulate(a.id, g.transpose()); });
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bias must be 1 x cols");
    Matrix v = a.value().rowwise() + row.value().row(0);
    return a.tape->record(std::move(v), any_grad({a, row}), [a, row](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g);
        if (t.needs_grad(row.id)) t.accumulate(row.id, g.colwise().sum());
    });
}

Var tanh(Var a) {
    // 1 - 2 / (exp(2x) + 1) uses the vectorised exp; exact at both tails.
    Matrix v = 1.0 - 2.0 / ((2.0 * a.value().array()).exp() + 1.0);
    return a.tape->record(v, any_grad({a}), [a, v](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g.array() * (1.0 - v.array().square()));
    });
}

Var sigmoid(Var a) {
    Matrix v = (1.0 + (-a.value().array()).exp()).inverse();
    return a.tape->record(v, any_grad({a}), [a, v](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g.array() * v.array() * (1.0 - v.array()));
    });
}

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

Var gelu(Var a) {
    constexpr double k = kGeluScale;
    constexpr double c = kGeluCubic;
    const auto& x = a.value();
    Matrix inner = (k * (x.array() + c * x.array().cube())).matrix();
    Matrix th = inner.array().tanh();
    Matrix v = 0.5 * x.array() * (1.0 + th.array());
    return a.tape->record(std::move(v), any_grad({a}), [a, th](Tape& t, const Matrix& g) {
        const auto& x = t.value(a.id).array();
        auto dinner = kGeluScale * (1.0 + 3.0 * kGeluCubic * x.square());
        Matrix d = 0.5 * (1.0 + th.array()) + 0.5 * x * (1.0 - th.array().square()) * dinner;
        t.accumulate(a.id, g.cwiseProduct(d));
    });
}

Var exp(Var a) {
    Matrix v = a.value().array().exp();
    return a.tape->record(v, any_grad({a}), [a, v](Tape& t, const Matrix& g) { t.accumulate(a.id, g.cwiseProduct(v)); });
}

Var log(Var a) {
    Matrix v = a.value().array().log();
    return a.tape->record(std::move(v), any_grad({a}),
                          [a](Tape& t, const Matrix& g) { t.accumulate(a.id, g.cwiseQuotient(t.value(a.id))); });
}

Var abs(Var a) {
    Matrix v = a.value().cwiseAbs();
    return a.tape->record(std::move(v), any_grad({a}), [a](Tape& t, const Matrix& g) {
        Matrix s = t.value(a.id).unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
        t.accumulate(a.id, g.cwiseProduct(s));
    });
}

Var sum(Var a) {
    const auto r = a.rows();
    const auto c = a.cols();
    return a.tape->record(scalar_matrix(a.value().sum()), any_grad({a}),
                          [a, r, c](Tape& t, const Matrix& g) { t.accumulate(a.id, Matrix::Constant(r, c, g(0, 0))); });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var sum_squares(Var a) {
    return a.tape->record(scalar_matrix(a.value().squaredNorm()), any_grad({a}),
                          [a](Tape& t, const Matrix& g) { t.accumulate(a.id, 2.0 * g(0, 0) * t.value(a.id)); });
}

Var row_sums(Var a) {
    const auto c = a.cols();
    return a.tape->record(a.value().rowwise().sum(), any_grad({a}), [a, c](Tape& t, const Matrix& g) {
        t.accumulate(a.id, g.col(0).replicate(1, c));
    });
}

Var logsumexp_rows(Var a) {
    const auto& x = a.value();
    Eigen::VectorXd mx = x.rowwise().maxCoeff();
    Matrix shifted = x.colwise() - mx;
    Matrix e = shifted.array().exp();
    Eigen::VectorXd s = e.rowwise().sum();
    Matrix v = (s.array().log() + mx.array()).matrix();
    Matrix soft = e.array().colwise() / s.array();
    return a.tape->record(std::move(v), any_grad({a}), [a, soft](Tape& t, const Matrix& g) {
        t.accumulate(a.id, soft.array().colwise() * g.col(0).array());
    });
}

Var softmax_rows(Var a) {
    const auto& x = a.value();
    Eigen::VectorXd mx = x.rowwise().maxCoeff();
    Matrix e = (x.colwise() - mx).array().exp();
    Eigen::VectorXd s = e.rowwise().sum();
    Matrix v = e.array().colwise() / s.array();
    return a.tape->record(v, any_grad({a}), [a, v](Tape& t, const Matrix& g) {
        Eigen::VectorXd dot = g.cwiseProduct(v).rowwise().sum();
        Matrix d = v.array() * (g.colwise() - dot).array();
        t.accumulate(a.id, d);
    });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
    const auto& x = a.value();
    const auto c = static_cast<double>(x.cols());
    if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols()) {
        throw std::invalid_argument("layer_norm_rows: gamma/beta must be 1 x cols");
    }
    Eigen::VectorXd mu = x.rowwise().mean();
    Matrix centered = x.colwise() - mu;
    Eigen::VectorXd var = centered.array().square().rowwise().sum() / c;
    Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
    Matrix xhat = centered.array().colwise() * inv_std.array();
    Matrix v = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return a.tape->record(std::move(v), any_grad({a, gamma, beta}),
                          [a, gamma, beta, xhat, inv_std, c](Tape& t, const Matrix& g) {
                              if (t.needs_grad(gamma.id)) t.accumulate(gamma.id, g.cwiseProduct(xhat).colwise().sum());
                              if (t.needs_grad(beta.id)) t.accumulate(beta.id, g.colwise().sum());
                              if (t.needs_grad(a.id)) {
                                  Matrix gx = g.array().rowwise() * t.value(gamma.id).row(0).array();
                                  Eigen::VectorXd m1 = gx.rowwise().mean();
                                  Eigen::VectorXd m2 = gx.cwiseProduct(xhat).rowwise().sum() / c;
                                  Matrix d = (gx.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix();
                                  d = d.array().colwise() * inv_std.array();
                                  t.accumulate(a.id, d);
                              }
                          });
}

Var normalize_rows(Var a, double eps) {
    const auto& x = a.value();
    Eigen::VectorXd norms = x.rowwise().norm();
    Eigen::VectorXd denom = norms.cwiseMax(eps);
    Matrix v = x.array().colwise() / denom.array();
    return a.tape->record(v, any_grad({a}), [a, norms, denom, eps](Tape& t, const Matrix& g) {
        // Above the floor: d(x/|x|) = g/|x| - x (x.g) / |x|^3; below it the map is x/eps.
        const auto& x = t.value(a.id);
        Matrix d(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            d.row(i) = g.row(i) / denom(i);
            if (norms(i) > eps) {
                const double xg = x.row(i).dot(g.row(i));
                d.row(i) -= x.row(i) * (xg / (norms(i) * norms(i) * norms(i)));
            }
        }
        t.accumulate(a.id, d);
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const auto r = parts[0].rows();
    Eigen::Index total = 0;
    bool grad = false;
    for (const auto& p : parts) {
        if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
        total += p.cols();
        grad = grad || p.tape->needs_grad(p.id);
    }
    Matrix v(r, total);
    Eigen::Index off = 0;
    std::vector<std::pair<int, Eigen::Index>> layout;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        layout.emplace_back(p.id, p.cols());
        off += p.cols();
    }
    return parts[0].tape->record(std::move(v), grad, [layout](Tape& t, const Matrix& g) {
        Eigen::Index off = 0;
        for (const auto& [id, cols] : layout) {
            t.accumulate(id, g.middleCols(off, cols));
            off += cols;
        }
    });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows out of range");
    const auto c = a.cols();
    return a.tape->record(a.value().middleRows(start, count), any_grad({a}), [a, start, count, c](Tape& t, const Matrix& g) {
        t.accumulate_block(a.id, start, 0, count, c, g);
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols out of range");
    const auto r = a.rows();
    return a.tape->record(a.value().middleCols(start, count), any_grad({a}), [a, start, count, r](Tape& t, const Matrix& g) {
        t.accumulate_block(a.id, 0, start, r, count, g);
    });
}

Var gather_rows(Var table, std::span<const int> indices) {
    const auto& tv = table.value();
    Matrix v(static_cast<Eigen::Index>(indices.size()), tv.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0 || indices[k] >= tv.rows()) throw std::out_of_range("gather_rows: index out of range");
        v.row(static_cast<Eigen::Index>(k)) = tv.row(indices[k]);
    }
    std::vector<int> idx(indices.begin(), indices.end());
    const auto r = tv.rows();
    const auto c = tv.cols();
    return table.tape->record(std::move(v), any_grad({table}), [table, idx, r, c](Tape& t, const Matrix& g) {
        Matrix d = Matrix::Zero(r, c);
        for (std::size_t k = 0; k < idx.size(); ++k) d.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
        t.accumulate(table.id, d);
    });
}

Var aggregate_nodes(Var adj, Var rows) {
    const auto n = adj.rows();
    if (adj.cols() != n || n == 0 || rows.rows() % n != 0) {
        throw std::invalid_argument("aggregate_nodes: rows must hold a whole number of timesteps per node");
    }
    const auto m = rows.rows() / n;
    const auto d = rows.cols();
    // Column c of a rows matrix is an m x n matrix in column-major order.
    const Matrix& z = rows.value();
    const Matrix& a = adj.value();
    Matrix out(n * m, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        Eigen::Map<const Matrix> zc(z.col(c).data(), m, n);
        Eigen::Map<Matrix> oc(out.col(c).data(), m, n);
        oc.noalias() = zc * a;
    }
    return adj.tape->record(std::move(out), any_grad({adj, rows}), [adj, rows, n, m, d](Tape& t, const Matrix& g) {
        const Matrix& z = t.value(rows.id);
        const Matrix& a = t.value(adj.id);
        if (t.needs_grad(rows.id)) {
            Matrix gz(n * m, d);
            for (Eigen::Index c = 0; c < d; ++c) {
                Eigen::Map<const Matrix> gc(g.col(c).data(), m, n);
                Eigen::Map<Matrix> out(gz.col(c).data(), m, n);
                out.noalias() = gc * a.transpose();
            }
            t.accumulate(rows.id, gz);
        }
        if (t.needs_grad(adj.id)) {
            Matrix ga = Matrix::Zero(n, n);
            for (Eigen::Index c = 0; c < d; ++c) {
                Eigen::Map<const Matrix> zc(z.col(c).data(), m, n);
                Eigen::Map<const Matrix> gc(g.col(c).data(), m, n);
                ga.noalias() += zc.transpose() * gc;
            }
            t.accumulate(adj.id, ga);
        }
    });
}

Var trace_expm(Var a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("trace_expm: matrix must be square");
    Matrix e = mmrca::expm(a.value());
    const double tr = e.trace();
    return a.tape->record(scalar_matrix(tr), any_grad({a}),
                          [a, e](Tape& t, const Matrix& g) { t.accumulate(a.id, g(0, 0) * e.transpose()); });
}

}  // namespace mmrca::ad
