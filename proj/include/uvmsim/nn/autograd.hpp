#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "uvmsim/errors.hpp"

namespace uvmsim::nn {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape node. Graphs are built dynamically per forward pass;
// backward() walks the DAG once in reverse topological order.
class Node {
public:
    Mat value;
    Mat grad;  // lazily allocated, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    explicit Node(Mat v, bool rg = false) : value(std::move(v)), requires_grad(rg) {}

    Mat& ensure_grad() {
        if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
        return grad;
    }
    void zero_grad() {
        if (grad.size() != 0) grad.setZero();
    }
};

using Var = std::shared_ptr<Node>;

inline Var constant(Mat v) { return std::make_shared<Node>(std::move(v)); }
inline Var constant_scalar(double v) { return constant(Mat::Constant(1, 1, v)); }
inline Var parameter(Mat v) { return std::make_shared<Node>(std::move(v), true); }

namespace detail {

inline Var make_op(Mat value, std::initializer_list<Var> parents) {
    auto out = std::make_shared<Node>(std::move(value));
    for (const auto& p : parents) {
        out->parents.push_back(p);
        out->requires_grad = out->requires_grad || p->requires_grad;
    }
    return out;
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value + b->value, {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad;
        if (b->requires_grad) b->ensure_grad() += self->grad;
    };
    return out;
}

inline Var sub(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value - b->value, {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad;
        if (b->requires_grad) b->ensure_grad() -= self->grad;
    };
    return out;
}

// Hadamard product; also used to square a vector for norms.
inline Var mul(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value.cwiseProduct(b->value), {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad.cwiseProduct(b->value);
        if (b->requires_grad) b->ensure_grad() += self->grad.cwiseProduct(a->value);
    };
    return out;
}

inline Var matmul(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value * b->value, {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad * b->value.transpose();
        if (b->requires_grad) b->ensure_grad() += a->value.transpose() * self->grad;
    };
    return out;
}

// a * b^T without materializing a transpose node (attention scores).
inline Var matmul_nt(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value * b->value.transpose(), {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad * b->value;
        if (b->requires_grad) b->ensure_grad() += self->grad.transpose() * a->value;
    };
    return out;
}

// Broadcast a 1 x n bias over every row of a.
inline Var add_rowwise(const Var& a, const Var& bias) {
    Mat v = a->value;
    v.rowwise() += Eigen::RowVectorXd(bias->value.row(0));
    auto out = detail::make_op(std::move(v), {a, bias});
    Node* self = out.get();
    out->backward_fn = [self, a, bias] {
        if (a->requires_grad) a->ensure_grad() += self->grad;
        if (bias->requires_grad) bias->ensure_grad() += self->grad.colwise().sum();
    };
    return out;
}

inline Var scale(const Var& a, double c) {
    auto out = detail::make_op(a->value * c, {a});
    Node* self = out.get();
    out->backward_fn = [self, a, c] {
        if (a->requires_grad) a->ensure_grad() += self->grad * c;
    };
    return out;
}

// Multiply a matrix by a learnable 1x1 scalar.
inline Var scale_by(const Var& a, const Var& s) {
    auto out = detail::make_op(a->value * s->value(0, 0), {a, s});
    Node* self = out.get();
    out->backward_fn = [self, a, s] {
        if (a->requires_grad) a->ensure_grad() += self->grad * s->value(0, 0);
        if (s->requires_grad) {
            s->ensure_grad()(0, 0) += self->grad.cwiseProduct(a->value).sum();
        }
    };
    return out;
}

// Exact GELU: x * Phi(x); smooth, so finite-difference checks stay honest.
inline Var gelu(const Var& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    Mat v = a->value.unaryExpr([&](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
    auto out = detail::make_op(std::move(v), {a});
    Node* self = out.get();
    out->backward_fn = [self, a] {
        if (!a->requires_grad) return;
        Mat d = a->value.unaryExpr([&](double x) {
            const double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            return phi + x * pdf;
        });
        a->ensure_grad() += self->grad.cwiseProduct(d);
    };
    return out;
}

inline Var softmax_rows(const Var& a) {
    Mat v = a->value;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mx = v.row(r).maxCoeff();
        v.row(r) = (v.row(r).array() - mx).exp();
        v.row(r) /= v.row(r).sum();
    }
    auto out = detail::make_op(std::move(v), {a});
    Node* self = out.get();
    out->backward_fn = [self, a] {
        if (!a->requires_grad) return;
        Mat& g = a->ensure_grad();
        for (Eigen::Index r = 0; r < self->value.rows(); ++r) {
            const auto p = self->value.row(r);
            const auto go = self->grad.row(r);
            const double dot = go.cwiseProduct(p).sum();
            g.row(r) += p.cwiseProduct((go.array() - dot).matrix());
        }
    };
    return out;
}

// Row-wise layer normalization with learnable 1 x d gain/shift.
inline Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5) {
    const Eigen::Index n = a->value.cols();
    Mat xhat(a->value.rows(), n);
    Eigen::VectorXd inv_sigma(a->value.rows());
    for (Eigen::Index r = 0; r < a->value.rows(); ++r) {
        const double mean = a->value.row(r).mean();
        const double var = (a->value.row(r).array() - mean).square().sum() / n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma(r) = is;
        xhat.row(r) = (a->value.row(r).array() - mean) * is;
    }
    Mat v = xhat;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        v.row(r) = v.row(r).cwiseProduct(gamma->value.row(0)) + beta->value.row(0);
    }
    auto out = detail::make_op(std::move(v), {a, gamma, beta});
    Node* self = out.get();
    out->backward_fn = [self, a, gamma, beta, xhat, inv_sigma, n] {
        for (Eigen::Index r = 0; r < self->grad.rows(); ++r) {
            const auto go = self->grad.row(r);
            if (gamma->requires_grad) gamma->ensure_grad().row(0) += go.cwiseProduct(xhat.row(r));
            if (beta->requires_grad) beta->ensure_grad().row(0) += go;
            if (a->requires_grad) {
                const Eigen::RowVectorXd g = go.cwiseProduct(gamma->value.row(0));
                const double mean_g = g.mean();
                const double mean_gx = g.cwiseProduct(xhat.row(r)).mean();
                a->ensure_grad().row(r) +=
                    inv_sigma(r) *
                    (g.array() - mean_g - xhat.row(r).array() * mean_gx).matrix();
            }
        }
    };
    return out;
}

inline Var concat_cols(const Var& a, const Var& b) {
    Mat v(a->value.rows(), a->value.cols() + b->value.cols());
    v << a->value, b->value;
    auto out = detail::make_op(std::move(v), {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad.leftCols(a->value.cols());
        if (b->requires_grad) b->ensure_grad() += self->grad.rightCols(b->value.cols());
    };
    return out;
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    auto out = detail::make_op(a->value.middleCols(start, count), {a});
    Node* self = out.get();
    out->backward_fn = [self, a, start, count] {
        if (a->requires_grad) a->ensure_grad().middleCols(start, count) += self->grad;
    };
    return out;
}

// Embedding lookup: gathers table rows; backward scatter-adds.
inline Var gather_rows(const Var& table, std::vector<Eigen::Index> indices) {
    Mat v(static_cast<Eigen::Index>(indices.size()), table->value.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) v.row(i) = table->value.row(indices[i]);
    auto out = detail::make_op(std::move(v), {table});
    Node* self = out.get();
    out->backward_fn = [self, table, indices = std::move(indices)] {
        if (!table->requires_grad) return;
        Mat& g = table->ensure_grad();
        for (std::size_t i = 0; i < indices.size(); ++i) g.row(indices[i]) += self->grad.row(i);
    };
    return out;
}

inline Var pick_row(const Var& a, Eigen::Index r) {
    auto out = detail::make_op(a->value.row(r), {a});
    Node* self = out.get();
    out->backward_fn = [self, a, r] {
        if (a->requires_grad) a->ensure_grad().row(r) += self->grad.row(0);
    };
    return out;
}

inline Var pick(const Var& a, Eigen::Index r, Eigen::Index c) {
    auto out = detail::make_op(Mat::Constant(1, 1, a->value(r, c)), {a});
    Node* self = out.get();
    out->backward_fn = [self, a, r, c] {
        if (a->requires_grad) a->ensure_grad()(r, c) += self->grad(0, 0);
    };
    return out;
}

inline Var sum_all(const Var& a) {
    auto out = detail::make_op(Mat::Constant(1, 1, a->value.sum()), {a});
    Node* self = out.get();
    out->backward_fn = [self, a] {
        if (a->requires_grad) {
            a->ensure_grad().array() += self->grad(0, 0);
        }
    };
    return out;
}

// Elementwise natural log, floored away from zero so -log p stays finite.
inline Var logv(const Var& a, double floor = 1e-12) {
    Mat v = a->value.unaryExpr([&](double x) { return std::log(x < floor ? floor : x); });
    auto out = detail::make_op(std::move(v), {a});
    Node* self = out.get();
    out->backward_fn = [self, a, floor] {
        if (!a->requires_grad) return;
        Mat d = a->value.unaryExpr([&](double x) { return 1.0 / (x < floor ? floor : x); });
        a->ensure_grad() += self->grad.cwiseProduct(d);
    };
    return out;
}

inline Var sqrtv(const Var& a) {
    Mat v = a->value.cwiseSqrt();
    auto out = detail::make_op(std::move(v), {a});
    Node* self = out.get();
    out->backward_fn = [self, a] {
        if (!a->requires_grad) return;
        a->ensure_grad() +=
            self->grad.cwiseQuotient((self->value.array() * 2.0).matrix());
    };
    return out;
}

inline Var divv(const Var& a, const Var& b) {
    auto out = detail::make_op(a->value.cwiseQuotient(b->value), {a, b});
    Node* self = out.get();
    out->backward_fn = [self, a, b] {
        if (a->requires_grad) a->ensure_grad() += self->grad.cwiseQuotient(b->value);
        if (b->requires_grad) {
            b->ensure_grad() -= self->grad.cwiseProduct(self->value).cwiseQuotient(b->value);
        }
    };
    return out;
}

// Hard clamp; gradient passes through strictly inside the interval.
inline Var clampv(const Var& a, double lo, double hi) {
    Mat v = a->value.cwiseMax(lo).cwiseMin(hi);
    auto out = detail::make_op(std::move(v), {a});
    Node* self = out.get();
    out->backward_fn = [self, a, lo, hi] {
        if (!a->requires_grad) return;
        Mat& g = a->ensure_grad();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                const double x = a->value(r, c);
                if (x > lo && x < hi) g(r, c) += self->grad(r, c);
            }
        }
    };
    return out;
}

// Scalar cosine distance 1 - cos(a, b) over row vectors. Zero-norm inputs
// yield a constant 0 (the caller may log the degenerate case).
inline Var cosine_distance(const Var& a, const Var& b, double eps = 1e-12) {
    const double na = a->value.norm();
    const double nb = b->value.norm();
    if (na < eps || nb < eps) return constant_scalar(0.0);
    auto dot = sum_all(mul(a, b));
    auto norm_a = sqrtv(sum_all(mul(a, a)));
    auto norm_b = sqrtv(sum_all(mul(b, b)));
    auto cos = divv(dot, mul(norm_a, norm_b));
    return sub(constant_scalar(1.0), cos);
}

// Reverse accumulation from a 1x1 root.
inline void backward(const Var& root) {
    if (root->value.size() != 1) throw TrainingError("backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad()(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && node->grad.size() != 0) node->backward_fn();
    }
}

// Plain SGD with momentum; velocity buffers grow with their parameters when a
// vocabulary extension resizes a tensor in place.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void zero_grad(std::span<const Var> params) const {
        for (const auto& p : params) p->zero_grad();
    }

    void step(std::span<const Var> params) {
        for (const auto& p : params) {
            if (p->grad.size() == 0) continue;
            Mat& vel = velocity_[p.get()];
            if (vel.rows() != p->value.rows() || vel.cols() != p->value.cols()) {
                Mat grown = Mat::Zero(p->value.rows(), p->value.cols());
                if (vel.size() != 0) {
                    grown.topLeftCorner(std::min(vel.rows(), grown.rows()),
                                        std::min(vel.cols(), grown.cols())) =
                        vel.topLeftCorner(std::min(vel.rows(), grown.rows()),
                                          std::min(vel.cols(), grown.cols()));
                }
                vel = std::move(grown);
            }
            vel = momentum_ * vel - lr_ * p->grad;
            p->value += vel;
        }
    }

    double learning_rate() const { return lr_; }

private:
    double lr_;
    double momentum_;
    std::unordered_map<Node*, Mat> velocity_;
};

}  // namespace uvmsim::nn
