#include "ghostrec/nn/layers.hpp"

namespace ghostrec::nn {

template <class T>
DenseParams<T> make_dense(Eigen::Index in, Eigen::Index out, Rng& rng, double weight_std) {
    Matrix<T> w(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) w(r, c) = static_cast<T>(rng.normal() * weight_std);
    DenseParams<T> p;
    p.weight = Param<T>(std::move(w));
    p.bias = Param<T>(Matrix<T>::Zero(1, out));
    return p;
}

template <class T>
BatchNormParams<T> make_batchnorm(Eigen::Index features, double momentum, double epsilon) {
    BatchNormParams<T> p;
    p.gamma = Param<T>(Matrix<T>::Ones(1, features));
    p.beta = Param<T>(Matrix<T>::Zero(1, features));
    p.running_mean = Matrix<T>::Zero(1, features);
    p.running_var = Matrix<T>::Ones(1, features);
    p.momentum = static_cast<T>(momentum);
    p.epsilon = static_cast<T>(epsilon);
    return p;
}

template DenseParams<float> make_dense<float>(Eigen::Index, Eigen::Index, Rng&, double);
template DenseParams<double> make_dense<double>(Eigen::Index, Eigen::Index, Rng&, double);
template BatchNormParams<float> make_batchnorm<float>(Eigen::Index, double, double);
template BatchNormParams<double> make_batchnorm<double>(Eigen::Index, double, double);
template DenseParams<long double> make_dense<long double>(Eigen::Index, Eigen::Index, Rng&, double);
template BatchNormParams<long double> make_batchnorm<long double>(Eigen::Index, double, double);

}  // namespace ghostrec::nn
