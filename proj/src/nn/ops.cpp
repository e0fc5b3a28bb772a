#include "ghostrec/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ghostrec/common/error.hpp"

namespace ghostrec::nn {

template <class T>
Matrix<T> dense_forward(const Matrix<T>& x, const DenseParams<T>& p) {
    if (x.cols() != p.weight.value.cols())
        throw DimensionError("dense_forward: input has " + std::to_string(x.cols()) +
                             " columns, layer expects " + std::to_string(p.weight.value.cols()));
    Matrix<T> y(x.rows(), p.weight.value.rows());
    y.noalias() = x * p.weight.value.transpose();
    y.rowwise() += p.bias.value.row(0);
    return y;
}

namespace {

template <class T>
T sigmoid_scalar(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

}  // namespace

template <class T>
Matrix<T> activation(const Matrix<T>& x, Activation act) {
    switch (act.kind) {
        case Activation::Kind::LeakyRelu: {
            const T a = static_cast<T>(act.alpha);
            return x.unaryExpr([a](T v) { return v > T(0) ? v : a * v; });
        }
        case Activation::Kind::Sigmoid:
            return x.unaryExpr([](T v) { return sigmoid_scalar(v); });
        case Activation::Kind::Tanh:
            return x.array().tanh().matrix();
    }
    return x;
}

template <class T>
Matrix<T> activation_grad(const Matrix<T>& x, const Matrix<T>& y, Activation act) {
    switch (act.kind) {
        case Activation::Kind::LeakyRelu: {
            const T a = static_cast<T>(act.alpha);
            return x.unaryExpr([a](T v) { return v > T(0) ? T(1) : a; });
        }
        case Activation::Kind::Sigmoid:
            return (y.array() * (T(1) - y.array())).matrix();
        case Activation::Kind::Tanh:
            return (T(1) - y.array().square()).matrix();
    }
    return Matrix<T>::Ones(x.rows(), x.cols());
}

template <class T>
Matrix<T> softmax(const Matrix<T>& x) {
    Matrix<T> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T m = x.row(r).maxCoeff();
        auto e = (x.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

template <class T>
Matrix<T> batchnorm_infer(const Matrix<T>& x, const BatchNormParams<T>& p) {
    if (x.cols() != p.features())
        throw DimensionError("batchnorm: feature dimension " + std::to_string(x.cols()) + " != " +
                             std::to_string(p.features()));
    const RowVector<T> inv_std = (p.running_var.row(0).array() + p.epsilon).rsqrt().matrix();
    const RowVector<T> scale = (p.gamma.value.row(0).array() * inv_std.array()).matrix();
    const RowVector<T> shift =
        (p.beta.value.row(0).array() - p.running_mean.row(0).array() * scale.array()).matrix();
    Matrix<T> y = x.array().rowwise() * scale.array();
    y.rowwise() += shift;
    return y;
}

template <class T>
Matrix<T> batchnorm_forward(const Matrix<T>& x, BatchNormParams<T>& p, BatchNormMode mode, bool update_running,
                            BatchNormCache<T>* cache) {
    if (mode == BatchNormMode::Infer) return batchnorm_infer(x, p);
    if (x.cols() != p.features())
        throw DimensionError("batchnorm: feature dimension " + std::to_string(x.cols()) + " != " +
                             std::to_string(p.features()));
    const Eigen::Index b = x.rows();
    if (b < 2) throw DegenerateError("batchnorm: training mode needs a batch of at least 2 rows");

    const RowVector<T> mean = x.colwise().mean();
    Matrix<T> centered = x.rowwise() - mean;
    const RowVector<T> var = centered.array().square().colwise().sum().matrix() / static_cast<T>(b);
    const RowVector<T> inv_std = (var.array() + p.epsilon).rsqrt().matrix();
    Matrix<T> xhat = centered.array().rowwise() * inv_std.array();
    Matrix<T> y = xhat.array().rowwise() * p.gamma.value.row(0).array();
    y.rowwise() += p.beta.value.row(0);

    if (update_running) {
        const T mom = p.momentum;
        const T unbiased = static_cast<T>(b) / static_cast<T>(b - 1);
        p.running_mean = (mom * p.running_mean.array() + (T(1) - mom) * mean.array()).matrix();
        p.running_var = (mom * p.running_var.array() + (T(1) - mom) * unbiased * var.array()).matrix();
    }
    if (cache) {
        cache->normalized = std::move(xhat);
        cache->inv_std = inv_std;
    }
    return y;
}

template <class T>
LossAcc<T> bce_loss(std::span<const T> pred, std::span<const T> target) {
    if (pred.size() != target.size())
        throw DimensionError("bce_loss: " + std::to_string(pred.size()) + " predictions, " +
                             std::to_string(target.size()) + " targets");
    if (pred.empty()) throw DimensionError("bce_loss: empty batch");
    const T lo = static_cast<T>(kLossClamp);
    const T hi = T(1) - lo;
    using A = LossAcc<T>;
    A total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const A p = std::clamp(pred[i], lo, hi);
        const A t = target[i];
        total -= t * std::log(p) + (A(1) - t) * std::log(A(1) - p);
    }
    return total / static_cast<A>(pred.size());
}

template <class T>
LossAcc<T> cce_loss(const Matrix<T>& probs, std::span<const int> labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size())
        throw DimensionError("cce_loss: " + std::to_string(probs.rows()) + " rows, " +
                             std::to_string(labels.size()) + " labels");
    if (labels.empty()) throw DimensionError("cce_loss: empty batch");
    const T lo = static_cast<T>(kLossClamp);
    const T hi = T(1) - lo;
    using A = LossAcc<T>;
    A total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= probs.cols())
            throw LabelError("cce_loss: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(probs.cols()) + ")");
        total -= std::log(static_cast<A>(std::clamp(probs(static_cast<Eigen::Index>(i), y), lo, hi)));
    }
    return total / static_cast<A>(labels.size());
}

#define GHOSTREC_INSTANTIATE(T)                                                                        \
    template Matrix<T> dense_forward(const Matrix<T>&, const DenseParams<T>&);                         \
    template Matrix<T> activation(const Matrix<T>&, Activation);                                       \
    template Matrix<T> activation_grad(const Matrix<T>&, const Matrix<T>&, Activation);                \
    template Matrix<T> softmax(const Matrix<T>&);                                                      \
    template Matrix<T> batchnorm_forward(const Matrix<T>&, BatchNormParams<T>&, BatchNormMode, bool,   \
                                         BatchNormCache<T>*);                                          \
    template Matrix<T> batchnorm_infer(const Matrix<T>&, const BatchNormParams<T>&);                   \
    template LossAcc<T> bce_loss(std::span<const T>, std::span<const T>);                              \
    template LossAcc<T> cce_loss(const Matrix<T>&, std::span<const int>);
GHOSTREC_INSTANTIATE(float)
GHOSTREC_INSTANTIATE(double)
GHOSTREC_INSTANTIATE(long double)
#undef GHOSTREC_INSTANTIATE

}  // namespace ghostrec::nn
