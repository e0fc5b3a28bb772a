#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "ghostrec/nn/tape.hpp"

namespace ghostrec::nn {

struct GradCheckOptions {
    double eps = 1e-5;
    // Coordinates probed per parameter tensor; 0 probes every coordinate.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    // Coordinates whose +-eps stencil changed a LeakyReLU sign or a loss
    // clamp; the function is not differentiable across them, so they are
    // replaced by another coordinate of the same tensor.
    std::size_t kinks_skipped = 0;
    std::string worst;  // "param[i] index c analytic fd"
};

// Records a forward pass on the given tape and returns its scalar loss.
// The builder must be a pure function of the parameter values: batch-norm
// layers run with update_running = false.
using LossBuilder = std::function<Tape<double>::Var(Tape<double>&)>;
using ExtendedLossBuilder = std::function<Tape<long double>::Var(Tape<long double>&)>;

// Compares reverse-mode gradients against central differences,
//   rel = |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, 1e-12),
// and returns the maximum over the probed coordinates.
GradCheckReport grad_check(const LossBuilder& build, std::span<Param<double>* const> params,
                           const GradCheckOptions& options = {});

// Same, but the differences are taken on an extended-precision mirror of the
// model: reference_params[i] holds params[i] widened to long double and
// reference builds the same loss from them. Used where double rounding of
// the loss is comparable to eps * |gradient|.
GradCheckReport grad_check(const LossBuilder& build, std::span<Param<double>* const> params,
                           const ExtendedLossBuilder& reference, std::span<Param<long double>* const> reference_params,
                           const GradCheckOptions& options = {});

}  // namespace ghostrec::nn
