#pragma once

#include <vector>

#include "ghostrec/common/rng.hpp"
#include "ghostrec/nn/matrix.hpp"

namespace ghostrec::nn {

// A trainable tensor together with its accumulated gradient.
template <class T>
struct Param {
    Matrix<T> value;
    Matrix<T> grad;

    Param() = default;
    explicit Param(Matrix<T> v) : value(std::move(v)), grad(Matrix<T>::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Fully connected layer: weight is out x in, bias is 1 x out.
template <class T>
struct DenseParams {
    Param<T> weight;
    Param<T> bias;

    Eigen::Index in() const { return weight.value.cols(); }
    Eigen::Index out() const { return weight.value.rows(); }
};

template <class T>
struct BatchNormParams {
    Param<T> gamma;  // 1 x d
    Param<T> beta;   // 1 x d
    Matrix<T> running_mean;  // 1 x d
    Matrix<T> running_var;   // 1 x d
    T momentum = T(0.9);
    T epsilon = T(1e-5);

    Eigen::Index features() const { return gamma.value.cols(); }
};

// Zero-mean Gaussian weights (default std 0.02), zero bias.
template <class T>
DenseParams<T> make_dense(Eigen::Index in, Eigen::Index out, Rng& rng, double weight_std = 0.02);

// gamma = 1, beta = 0, running mean 0, running variance 1.
template <class T>
BatchNormParams<T> make_batchnorm(Eigen::Index features, double momentum = 0.9, double epsilon = 1e-5);

template <class T>
void collect(DenseParams<T>& p, std::vector<Param<T>*>& out) {
    out.push_back(&p.weight);
    out.push_back(&p.bias);
}

template <class T>
void collect(BatchNormParams<T>& p, std::vector<Param<T>*>& out) {
    out.push_back(&p.gamma);
    out.push_back(&p.beta);
}

}  // namespace ghostrec::nn
