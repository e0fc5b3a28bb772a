#include "ghostrec/nn/tape.hpp"

#include <algorithm>
#include <memory>
#include <string>
#include <utility>

#include "ghostrec/common/error.hpp"

namespace ghostrec::nn {

template <class T>
typename Tape<T>::Var Tape<T>::push(std::string op, Matrix<T> value, bool requires_grad, Backward backward) {
    if (replayed_) throw TapeError("cannot record '" + op + "' on a tape that was already replayed");
    ensure_finite(value, op);
    nodes_.push_back(Node{std::move(value), Matrix<T>(), requires_grad, std::move(op), std::move(backward)});
    return Var{nodes_.size() - 1};
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
    if (v.id >= nodes_.size()) throw TapeError("variable does not belong to this tape");
    return nodes_[v.id];
}

template <class T>
void Tape<T>::accumulate(std::size_t id, const Matrix<T>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

template <class T>
typename Tape<T>::Var Tape<T>::constant(Matrix<T> value) {
    return push("constant", std::move(value), false, nullptr);
}

template <class T>
typename Tape<T>::Var Tape<T>::variable(Matrix<T> value) {
    return push("variable", std::move(value), true, nullptr);
}

template <class T>
typename Tape<T>::Var Tape<T>::dense(Var x, DenseParams<T>& p, ParamGrad track) {
    Matrix<T> y = dense_forward(node(x).value, p);
    const bool params = track == ParamGrad::Accumulate;
    const bool req = params || needs(x);
    DenseParams<T>* pp = &p;
    const std::size_t xi = x.id;
    return push("dense", std::move(y), req, [pp, xi, params](Tape& t, std::size_t self) {
        const Matrix<T>& dy = t.nodes_[self].grad;
        if (params) {
            pp->weight.grad.noalias() += dy.transpose() * t.nodes_[xi].value;
            pp->bias.grad.row(0) += dy.colwise().sum();
        }
        if (t.nodes_[xi].requires_grad) {
            Matrix<T> dx(dy.rows(), pp->weight.value.cols());
            dx.noalias() = dy * pp->weight.value;
            t.accumulate(xi, dx);
        }
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::activation(Var x, Activation act) {
    Matrix<T> y = nn::activation(node(x).value, act);
    if (act.kind == Activation::Kind::LeakyRelu) {
        const Matrix<T>& v = node(x).value;
        for (Eigen::Index i = 0; i < v.size(); ++i) note_branch(v.data()[i] > T(0));
    }
    const std::size_t xi = x.id;
    return push("activation", std::move(y), needs(x), [xi, act](Tape& t, std::size_t self) {
        const Node& n = t.nodes_[self];
        Matrix<T> local = activation_grad(t.nodes_[xi].value, n.value, act);
        t.accumulate(xi, (n.grad.array() * local.array()).matrix());
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::softmax(Var x) {
    Matrix<T> y = nn::softmax(node(x).value);
    const std::size_t xi = x.id;
    return push("softmax", std::move(y), needs(x), [xi](Tape& t, std::size_t self) {
        const Node& n = t.nodes_[self];
        const Eigen::Matrix<T, Eigen::Dynamic, 1> inner = (n.grad.array() * n.value.array()).rowwise().sum();
        Matrix<T> dx = n.value.array() * (n.grad.array().colwise() - inner.array());
        t.accumulate(xi, dx);
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::batchnorm(Var x, BatchNormParams<T>& p, BatchNormMode mode, ParamGrad track,
                                         bool update_running) {
    const bool params = track == ParamGrad::Accumulate;
    const bool req = params || needs(x);
    BatchNormParams<T>* pp = &p;
    const std::size_t xi = x.id;

    if (mode == BatchNormMode::Infer) {
        Matrix<T> y = batchnorm_infer(node(x).value, p);
        return push("batchnorm", std::move(y), req, [pp, xi, params](Tape& t, std::size_t self) {
            const Matrix<T>& dy = t.nodes_[self].grad;
            const RowVector<T> inv_std = (pp->running_var.row(0).array() + pp->epsilon).rsqrt().matrix();
            if (params) {
                Matrix<T> xhat = (t.nodes_[xi].value.rowwise() - pp->running_mean.row(0)).array().rowwise() *
                                 inv_std.array();
                pp->gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
                pp->beta.grad.row(0) += dy.colwise().sum();
            }
            if (t.nodes_[xi].requires_grad) {
                const RowVector<T> scale = (pp->gamma.value.row(0).array() * inv_std.array()).matrix();
                t.accumulate(xi, (dy.array().rowwise() * scale.array()).matrix());
            }
        });
    }

    auto cache = std::make_shared<BatchNormCache<T>>();
    Matrix<T> y = batchnorm_forward(node(x).value, p, mode, update_running, cache.get());
    return push("batchnorm", std::move(y), req, [pp, xi, params, cache](Tape& t, std::size_t self) {
        const Matrix<T>& dy = t.nodes_[self].grad;
        const Matrix<T>& xhat = cache->normalized;
        const RowVector<T> dy_sum = dy.colwise().sum();
        const RowVector<T> dy_xhat_sum = (dy.array() * xhat.array()).colwise().sum().matrix();
        if (params) {
            pp->gamma.grad.row(0) += dy_xhat_sum;
            pp->beta.grad.row(0) += dy_sum;
        }
        if (t.nodes_[xi].requires_grad) {
            const T b = static_cast<T>(dy.rows());
            const RowVector<T> k = (pp->gamma.value.row(0).array() * cache->inv_std.array() / b).matrix();
            // dx = gamma * inv_std / b * (b * dy - sum(dy) - xhat * sum(dy * xhat))
            Matrix<T> inner = (b * dy.array()).rowwise() - dy_sum.array();
            inner.array() -= xhat.array().rowwise() * dy_xhat_sum.array();
            t.accumulate(xi, (inner.array().rowwise() * k.array()).matrix());
        }
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::concat(Var left, Var right) {
    const Matrix<T>& a = node(left).value;
    const Matrix<T>& b = node(right).value;
    if (a.rows() != b.rows())
        throw DimensionError("concat: row counts differ (" + std::to_string(a.rows()) + " vs " +
                             std::to_string(b.rows()) + ")");
    Matrix<T> y(a.rows(), a.cols() + b.cols());
    y << a, b;
    const std::size_t li = left.id, ri = right.id;
    const Eigen::Index split = a.cols();
    return push("concat", std::move(y), needs(left) || needs(right), [li, ri, split](Tape& t, std::size_t self) {
        const Matrix<T>& dy = t.nodes_[self].grad;
        if (t.nodes_[li].requires_grad) t.accumulate(li, dy.leftCols(split));
        if (t.nodes_[ri].requires_grad) t.accumulate(ri, dy.rightCols(dy.cols() - split));
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::bce(Var pred, std::span<const T> targets) {
    const Matrix<T>& p = node(pred).value;
    const auto loss = bce_loss<T>(std::span<const T>(p.data(), static_cast<std::size_t>(p.size())), targets);
    for (Eigen::Index i = 0; i < p.size(); ++i) note_clamp(p.data()[i]);
    std::vector<T> tgt(targets.begin(), targets.end());
    const std::size_t pi = pred.id;
    Matrix<T> out(1, 1);
    out(0, 0) = static_cast<T>(loss);
    return push("bce", std::move(out), needs(pred), [pi, tgt = std::move(tgt)](Tape& t, std::size_t self) {
        const T seed = t.nodes_[self].grad(0, 0);
        const Matrix<T>& p = t.nodes_[pi].value;
        const T lo = static_cast<T>(kLossClamp), hi = T(1) - lo;
        const T n = static_cast<T>(p.size());
        Matrix<T> dp(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const T v = p.data()[i];
            const T y = tgt[static_cast<std::size_t>(i)];
            dp.data()[i] = (v <= lo || v >= hi) ? T(0) : seed * (-y / v + (T(1) - y) / (T(1) - v)) / n;
        }
        t.accumulate(pi, dp);
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::cce(Var probs, std::span<const int> labels) {
    const auto loss = cce_loss<T>(node(probs).value, labels);
    for (std::size_t i = 0; i < labels.size(); ++i) note_clamp(node(probs).value(static_cast<Eigen::Index>(i), labels[i]));
    std::vector<int> lab(labels.begin(), labels.end());
    const std::size_t pi = probs.id;
    Matrix<T> out(1, 1);
    out(0, 0) = static_cast<T>(loss);
    return push("cce", std::move(out), needs(probs), [pi, lab = std::move(lab)](Tape& t, std::size_t self) {
        const T seed = t.nodes_[self].grad(0, 0);
        const Matrix<T>& p = t.nodes_[pi].value;
        const T lo = static_cast<T>(kLossClamp), hi = T(1) - lo;
        const T n = static_cast<T>(lab.size());
        Matrix<T> dp = Matrix<T>::Zero(p.rows(), p.cols());
        for (std::size_t i = 0; i < lab.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const T v = p(r, lab[i]);
            if (v > lo && v < hi) dp(r, lab[i]) = -seed / (n * v);
        }
        t.accumulate(pi, dp);
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::sum(Var x) {
    Matrix<T> out(1, 1);
    out(0, 0) = node(x).value.sum();
    const std::size_t xi = x.id;
    return push("sum", std::move(out), needs(x), [xi](Tape& t, std::size_t self) {
        const T seed = t.nodes_[self].grad(0, 0);
        const Matrix<T>& v = t.nodes_[xi].value;
        t.accumulate(xi, Matrix<T>::Constant(v.rows(), v.cols(), seed));
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::dot(Var x, const Matrix<T>& weights) {
    const Matrix<T>& v = node(x).value;
    check_shape(weights.rows(), weights.cols(), v.rows(), v.cols(), "dot");
    Matrix<T> out(1, 1);
    out(0, 0) = (v.array() * weights.array()).sum();
    const std::size_t xi = x.id;
    return push("dot", std::move(out), needs(x), [xi, weights](Tape& t, std::size_t self) {
        t.accumulate(xi, t.nodes_[self].grad(0, 0) * weights);
    });
}

template <class T>
typename Tape<T>::Var Tape<T>::combine(Var a, T wa, Var b, T wb) {
    const Matrix<T>& va = node(a).value;
    const Matrix<T>& vb = node(b).value;
    check_shape(va.rows(), va.cols(), 1, 1, "combine");
    check_shape(vb.rows(), vb.cols(), 1, 1, "combine");
    Matrix<T> out(1, 1);
    out(0, 0) = wa * va(0, 0) + wb * vb(0, 0);
    const std::size_t ai = a.id, bi = b.id;
    return push("combine", std::move(out), needs(a) || needs(b), [ai, bi, wa, wb](Tape& t, std::size_t self) {
        const T g = t.nodes_[self].grad(0, 0);
        Matrix<T> m(1, 1);
        m(0, 0) = wa * g;
        t.accumulate(ai, m);
        m(0, 0) = wb * g;
        t.accumulate(bi, m);
    });
}

template <class T>
const Matrix<T>& Tape<T>::value(Var v) const {
    return node(v).value;
}

template <class T>
const Matrix<T>& Tape<T>::grad(Var v) const {
    return node(v).grad;
}

template <class T>
T Tape<T>::scalar(Var v) const {
    const Matrix<T>& m = node(v).value;
    check_shape(m.rows(), m.cols(), 1, 1, "scalar");
    return m(0, 0);
}

template <class T>
void Tape<T>::backward(Var loss, T seed) {
    if (nodes_.empty()) throw TapeError("backward called before any forward op was recorded");
    if (replayed_) throw TapeError("tape was already replayed; record a new forward pass");
    if (loss.id >= nodes_.size()) throw TapeError("loss variable does not belong to this tape");
    const Node& root = nodes_[loss.id];
    if (root.value.rows() != 1 || root.value.cols() != 1)
        throw TapeError("backward needs a scalar (1x1) loss node, got " + std::to_string(root.value.rows()) + "x" +
                        std::to_string(root.value.cols()));
    replayed_ = true;
    visits_.clear();
    visits_.reserve(nodes_.size());
    if (!root.requires_grad) {
        // Nothing upstream is differentiable; still account for every node.
        for (std::size_t i = nodes_.size(); i-- > 0;) visits_.push_back(i);
        return;
    }
    nodes_[loss.id].grad = Matrix<T>::Constant(1, 1, seed);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        visits_.push_back(i);
        Node& n = nodes_[i];
        if (i > loss.id || !n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
        n.backward(*this, i);
    }
}

template <class T>
void Tape<T>::note_branch(bool taken) {
    signature_ = (signature_ ^ (taken ? 0x9e3779b97f4a7c15ull : 0x85ebca6bull)) * 0x100000001b3ull;
}

template <class T>
void Tape<T>::note_clamp(T v) {
    const T lo = static_cast<T>(kLossClamp);
    note_branch(v <= lo);
    note_branch(v >= T(1) - lo);
}

template <class T>
void Tape<T>::clear() {
    signature_ = kSignatureSeed;
    nodes_.clear();
    visits_.clear();
    replayed_ = false;
}

template class Tape<float>;
template class Tape<double>;
template class Tape<long double>;

}  // namespace ghostrec::nn
