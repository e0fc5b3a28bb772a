#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ghostrec/nn/layers.hpp"

namespace ghostrec::nn {

struct AdamHyper {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<Matrix<T>> m;
    std::vector<Matrix<T>> v;
    std::uint64_t step = 0;
    AdamHyper hyper;
};

// Zero moments shaped like params.
template <class T>
AdamState<T> make_adam_state(std::span<Param<T>* const> params, AdamHyper hyper = {});

// One bias-corrected Adam update using each Param::grad. A tensor whose
// gradient is identically zero keeps its value and moments; the step count
// advances regardless. Throws DimensionError on moment/parameter mismatch.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& state);

}  // namespace ghostrec::nn
