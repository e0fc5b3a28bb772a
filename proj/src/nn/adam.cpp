#include "ghostrec/nn/adam.hpp"

#include <cmath>
#include <string>

#include "ghostrec/common/error.hpp"

namespace ghostrec::nn {

template <class T>
AdamState<T> make_adam_state(std::span<Param<T>* const> params, AdamHyper hyper) {
    AdamState<T> s;
    s.hyper = hyper;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Param<T>* p : params) {
        s.m.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        s.v.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
    return s;
}

template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                             std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Param<T>& p = *params[i];
        check_shape(p.grad.rows(), p.grad.cols(), p.value.rows(), p.value.cols(), "adam_step gradient");
        check_shape(state.m[i].rows(), state.m[i].cols(), p.value.rows(), p.value.cols(), "adam_step moment");
        check_shape(state.v[i].rows(), state.v[i].cols(), p.value.rows(), p.value.cols(), "adam_step moment");
    }

    ++state.step;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(h.beta1);
    const T b2 = static_cast<T>(h.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(h.beta1, t));
    const T corr2 = static_cast<T>(1.0 - std::pow(h.beta2, t));
    const T lr = static_cast<T>(h.lr);
    const T eps = static_cast<T>(h.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Param<T>& p = *params[i];
        if (p.grad.isZero(T(0))) continue;
        auto& m = state.m[i];
        auto& v = state.v[i];
        m = b1 * m.array() + (T(1) - b1) * p.grad.array();
        v = b2 * v.array() + (T(1) - b2) * p.grad.array().square();
        p.value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
    }
}

template AdamState<float> make_adam_state(std::span<Param<float>* const>, AdamHyper);
template AdamState<double> make_adam_state(std::span<Param<double>* const>, AdamHyper);
template void adam_step(std::span<Param<float>* const>, AdamState<float>&);
template void adam_step(std::span<Param<double>* const>, AdamState<double>&);

}  // namespace ghostrec::nn
