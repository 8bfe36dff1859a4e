#include "divfuse/autodiff.hpp"

#include <cmath>

namespace divfuse {

int ParamStore::add(const std::string& name, Matrix init, int lr_group) {
    if (find(name) >= 0) throw ConfigError("duplicate parameter name '" + name + "'");
    values.push_back(std::move(init));
    names.push_back(name);
    group.push_back(lr_group);
    return static_cast<int>(values.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += static_cast<std::size_t>(v.size());
    return n;
}

GradStore zero_grads_like(const ParamStore& params) {
    GradStore g;
    g.reserve(params.values.size());
    for (const auto& v : params.values) g.push_back(Matrix::Zero(v.rows(), v.cols()));
    return g;
}

const Matrix& Tape::val_of(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::param) return params_->values[static_cast<std::size_t>(n.param_id)];
    return n.val;
}

const Matrix& Tape::value(int node) const {
    check(node);
    return val_of(node);
}

Matrix& Tape::grad_of(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) {
        const Matrix& v = val_of(i);
        n.grad = Matrix::Zero(v.rows(), v.cols());
    }
    return n.grad;
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check(int i) const {
    if (i < 0 || i >= static_cast<int>(nodes_.size())) {
        throw ShapeError("tape: invalid node index " + std::to_string(i));
    }
}

int Tape::constant(Matrix v) {
    Node n;
    n.op = Op::constant;
    n.val = std::move(v);
    return push(std::move(n));
}

int Tape::param(int id) {
    if (params_ == nullptr) throw ConfigError("tape has no parameter store bound");
    if (id < 0 || id >= static_cast<int>(params_->values.size())) {
        throw ConfigError("tape: invalid parameter id " + std::to_string(id));
    }
    if (param_nodes_.size() < params_->values.size()) {
        param_nodes_.resize(params_->values.size(), -1);
    }
    int& cached = param_nodes_[static_cast<std::size_t>(id)];
    if (cached >= 0) return cached;
    Node n;
    n.op = Op::param;
    n.param_id = id;
    cached = push(std::move(n));
    return cached;
}

int Tape::matmul(int a, int b, bool trans_a, bool trans_b) {
    check(a);
    check(b);
    if (trans_a && trans_b) throw ShapeError("matmul: double transpose unsupported");
    const Matrix& A = val_of(a);
    const Matrix& B = val_of(b);
    const auto inner_a = trans_a ? A.rows() : A.cols();
    const auto inner_b = trans_b ? B.cols() : B.rows();
    if (inner_a != inner_b) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(inner_a) + " vs " +
                         std::to_string(inner_b));
    }
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    if (trans_a) {
        n.val.noalias() = A.transpose() * B;
    } else if (trans_b) {
        n.val.noalias() = A * B.transpose();
    } else {
        n.val.noalias() = A * B;
    }
    return push(std::move(n));
}

namespace {

void require_same_shape(const Matrix& x, const Matrix& y, const char* op) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw ShapeError(std::string(op) + ": shape " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + " vs " + std::to_string(y.rows()) + "x" +
                         std::to_string(y.cols()));
    }
}

}  // namespace

int Tape::add(int a, int b) {
    check(a);
    check(b);
    require_same_shape(val_of(a), val_of(b), "add");
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.val = val_of(a) + val_of(b);
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    check(a);
    check(b);
    require_same_shape(val_of(a), val_of(b), "sub");
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.val = val_of(a) - val_of(b);
    return push(std::move(n));
}

int Tape::sigmoid(int a) {
    check(a);
    Node n;
    n.op = Op::sigmoid;
    n.a = a;
    n.val = val_of(a).unaryExpr([](double x) { return divfuse::sigmoid(x); });
    return push(std::move(n));
}

int Tape::tanh(int a) {
    check(a);
    Node n;
    n.op = Op::tanh_fn;
    n.a = a;
    n.val = val_of(a).array().tanh().matrix();
    return push(std::move(n));
}

int Tape::abs(int a) {
    check(a);
    Node n;
    n.op = Op::abs_fn;
    n.a = a;
    n.val = val_of(a).array().abs().matrix();
    return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
    check(a);
    check(b);
    require_same_shape(val_of(a), val_of(b), "hadamard");
    Node n;
    n.op = Op::hadamard;
    n.a = a;
    n.b = b;
    n.val = val_of(a).cwiseProduct(val_of(b));
    return push(std::move(n));
}

int Tape::row(int a, int r) {
    check(a);
    const Matrix& A = val_of(a);
    if (r < 0 || r >= A.rows()) throw ShapeError("row: index out of range");
    Node n;
    n.op = Op::row;
    n.a = a;
    n.i0 = r;
    n.val = A.row(r).transpose();
    return push(std::move(n));
}

int Tape::segment(int a, int offset, int len) {
    check(a);
    const Matrix& A = val_of(a);
    if (A.cols() != 1) throw ShapeError("segment: input must be a column vector");
    if (offset < 0 || len < 1 || offset + len > A.rows()) {
        throw ShapeError("segment: range out of bounds");
    }
    Node n;
    n.op = Op::segment;
    n.a = a;
    n.i0 = offset;
    n.i1 = len;
    n.val = A.block(offset, 0, len, 1);
    return push(std::move(n));
}

int Tape::concat(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Eigen::Index total = 0;
    for (int p : parts) {
        check(p);
        if (val_of(p).cols() != 1) throw ShapeError("concat: inputs must be column vectors");
        total += val_of(p).rows();
    }
    Node n;
    n.op = Op::concat;
    n.kids = parts;
    n.val.resize(total, 1);
    Eigen::Index at = 0;
    for (int p : parts) {
        const Matrix& v = val_of(p);
        n.val.block(at, 0, v.rows(), 1) = v;
        at += v.rows();
    }
    return push(std::move(n));
}

int Tape::stack_rows(const std::vector<int>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no inputs");
    const Eigen::Index width = val_of(rows[0]).rows();
    for (int r : rows) {
        check(r);
        if (val_of(r).cols() != 1 || val_of(r).rows() != width) {
            throw ShapeError("stack_rows: inputs must be column vectors of equal length");
        }
    }
    Node n;
    n.op = Op::stack_rows;
    n.kids = rows;
    n.val.resize(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t t = 0; t < rows.size(); ++t) {
        n.val.row(static_cast<Eigen::Index>(t)) = val_of(rows[t]).transpose();
    }
    return push(std::move(n));
}

int Tape::softmax(int a) {
    check(a);
    const Matrix& x = val_of(a);
    if (x.cols() != 1) throw ShapeError("softmax: input must be a column vector");
    Node n;
    n.op = Op::softmax;
    n.a = a;
    const double peak = x.maxCoeff();
    Matrix e = (x.array() - peak).exp().matrix();
    n.val = e / e.sum();
    return push(std::move(n));
}

int Tape::bce_with_logits(int logit, double label, double pos_weight) {
    check(logit);
    const Matrix& z = val_of(logit);
    if (z.rows() != 1 || z.cols() != 1) throw ShapeError("bce_with_logits: logit must be scalar");
    if (pos_weight <= 0.0) throw ConfigError("bce_with_logits: pos_weight must be > 0");
    Node n;
    n.op = Op::bce;
    n.a = logit;
    n.s0 = label;
    n.s1 = pos_weight;
    const double zv = z(0, 0);
    const double loss = (1.0 - label) * zv + (1.0 + (pos_weight - 1.0) * label) * softplus(-zv);
    n.val = Matrix::Constant(1, 1, loss);
    return push(std::move(n));
}

void Tape::backward(int node) {
    check(node);
    const Matrix& out = val_of(node);
    if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward: output must be scalar");
    grad_of(node)(0, 0) = 1.0;

    for (int i = node; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0) continue;  // never reached from the output
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::constant:
            case Op::param:
                break;
            case Op::matmul: {
                const Matrix& A = val_of(n.a);
                const Matrix& B = val_of(n.b);
                if (n.trans_a) {  // C = A^T B
                    grad_of(n.a).noalias() += B * g.transpose();
                    grad_of(n.b).noalias() += A * g;
                } else if (n.trans_b) {  // C = A B^T
                    grad_of(n.a).noalias() += g * B;
                    grad_of(n.b).noalias() += g.transpose() * A;
                } else {  // C = A B
                    grad_of(n.a).noalias() += g * B.transpose();
                    grad_of(n.b).noalias() += A.transpose() * g;
                }
                break;
            }
            case Op::add:
                grad_of(n.a) += g;
                grad_of(n.b) += g;
                break;
            case Op::sub:
                grad_of(n.a) += g;
                grad_of(n.b) -= g;
                break;
            case Op::sigmoid: {
                const Matrix& y = n.val;
                grad_of(n.a).array() += g.array() * y.array() * (1.0 - y.array());
                break;
            }
            case Op::tanh_fn: {
                const Matrix& y = n.val;
                grad_of(n.a).array() += g.array() * (1.0 - y.array().square());
                break;
            }
            case Op::abs_fn: {
                const Matrix& x = val_of(n.a);
                grad_of(n.a).array() +=
                    g.array() * x.unaryExpr([](double v) {
                                     return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                                 }).array();
                break;
            }
            case Op::hadamard:
                grad_of(n.a).array() += g.array() * val_of(n.b).array();
                grad_of(n.b).array() += g.array() * val_of(n.a).array();
                break;
            case Op::row:
                grad_of(n.a).row(n.i0) += g.transpose();
                break;
            case Op::segment:
                grad_of(n.a).block(n.i0, 0, n.i1, 1) += g;
                break;
            case Op::concat: {
                Eigen::Index at = 0;
                for (int p : n.kids) {
                    const Eigen::Index len = val_of(p).rows();
                    grad_of(p) += g.block(at, 0, len, 1);
                    at += len;
                }
                break;
            }
            case Op::stack_rows: {
                for (std::size_t t = 0; t < n.kids.size(); ++t) {
                    grad_of(n.kids[t]) += g.row(static_cast<Eigen::Index>(t)).transpose();
                }
                break;
            }
            case Op::softmax: {
                const Matrix& y = n.val;
                const double dot = (g.array() * y.array()).sum();
                grad_of(n.a).array() += y.array() * (g.array() - dot);
                break;
            }
            case Op::bce: {
                const double z = val_of(n.a)(0, 0);
                const double y = n.s0;
                const double w = n.s1;
                const double dz = divfuse::sigmoid(z) * (1.0 - y + w * y) - w * y;
                grad_of(n.a)(0, 0) += g(0, 0) * dz;
                break;
            }
        }
    }
}

void Tape::add_param_grads(GradStore& grads) const {
    if (params_ == nullptr) return;
    if (grads.size() != params_->values.size()) {
        throw ShapeError("add_param_grads: grad store size mismatch");
    }
    for (std::size_t id = 0; id < param_nodes_.size(); ++id) {
        const int node = param_nodes_[id];
        if (node < 0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        if (n.grad.size() == 0) continue;
        grads[id] += n.grad;
    }
}

}  // namespace divfuse
