#pragma once

#include <cstdint>

#include "ghostrec/gan/model.hpp"
#include "ghostrec/nn/grad_check.hpp"

namespace ghostrec::gan {

struct NetworkGradCheck {
    nn::GradCheckReport report;
    std::size_t tensors = 0;
    // Train-mode discriminator checks leave out the dense biases that feed a
    // batch-norm layer (their gradient is zero by construction); this is the
    // largest analytic gradient magnitude seen on them.
    double max_excluded_grad = 0.0;
};

// Freshly initialised 64-bit networks, random noise, labels and real
// arrays in [-1, 1]. Analytic gradients come from the 64-bit model; the
// central differences are taken on a long double copy of it. The generator is checked through the generator loss
// with D frozen in train mode; the discriminator through the pooled
// discriminator loss on a real and a generated batch.
NetworkGradCheck grad_check_generator(const ModelConfig& model, int batch, std::uint64_t seed,
                                      const nn::GradCheckOptions& options);
NetworkGradCheck grad_check_discriminator(const ModelConfig& model, int batch, std::uint64_t seed,
                                          nn::BatchNormMode mode, const nn::GradCheckOptions& options);

}  // namespace ghostrec::gan
