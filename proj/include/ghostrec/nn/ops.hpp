#pragma once

#include <span>
#include <type_traits>

#include "ghostrec/nn/layers.hpp"
#include "ghostrec/nn/matrix.hpp"

namespace ghostrec::nn {

inline constexpr double kLossClamp = 1e-7;

struct Activation {
    enum class Kind { LeakyRelu, Sigmoid, Tanh };
    Kind kind = Kind::LeakyRelu;
    double alpha = 0.2;

    static Activation leaky_relu(double alpha = 0.2) { return {Kind::LeakyRelu, alpha}; }
    static Activation sigmoid() { return {Kind::Sigmoid, 0.0}; }
    static Activation tanh() { return {Kind::Tanh, 0.0}; }
};

enum class BatchNormMode { Train, Infer };

// y = x W^T + bias. Throws DimensionError when x.cols() != W.cols().
template <class T>
Matrix<T> dense_forward(const Matrix<T>& x, const DenseParams<T>& p);

template <class T>
Matrix<T> activation(const Matrix<T>& x, Activation act);

// Derivative of the activation expressed through its input x and output y.
template <class T>
Matrix<T> activation_grad(const Matrix<T>& x, const Matrix<T>& y, Activation act);

// Row-wise softmax with max subtraction.
template <class T>
Matrix<T> softmax(const Matrix<T>& x);

// Per-batch quantities kept for the backward pass of a training-mode
// normalisation.
template <class T>
struct BatchNormCache {
    Matrix<T> normalized;  // x_hat
    RowVector<T> inv_std;
};

// Train mode normalises with batch statistics and, when update_running is
// set, folds them into the running estimates with the layer momentum.
// Infer mode uses the running estimates. Train mode needs >= 2 rows.
template <class T>
Matrix<T> batchnorm_forward(const Matrix<T>& x, BatchNormParams<T>& p, BatchNormMode mode,
                            bool update_running = true, BatchNormCache<T>* cache = nullptr);

// Inference-only variant that leaves the parameters untouched.
template <class T>
Matrix<T> batchnorm_infer(const Matrix<T>& x, const BatchNormParams<T>& p);

// Losses accumulate in double, or in T when T is wider.
template <class T>
using LossAcc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

// Mean binary cross entropy; predictions are clamped to [1e-7, 1 - 1e-7].
template <class T>
LossAcc<T> bce_loss(std::span<const T> pred, std::span<const T> target);

// Mean categorical cross entropy over rows of probabilities; labels index
// columns. Probabilities are clamped like bce_loss.
template <class T>
LossAcc<T> cce_loss(const Matrix<T>& probs, std::span<const int> labels);

}  // namespace ghostrec::nn
