#pragma once

#include <span>

#include "ghostrec/gan/model.hpp"

namespace ghostrec::gan {

// l_s: source (real/fake) cross entropy, l_c: class cross entropy. total is
// the quantity gradient descent minimizes.
struct LossBreakdown {
    double l_s = 0.0;
    double l_c = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

// Means over the pooled real and fake samples: realness targets 1 for real
// and 0 for fake, class targets are the conditioning labels for both.
// total = l_s + l_c.
template <class T>
LossBreakdown discriminator_loss(const DiscriminatorOutput<T>& real, std::span<const int> real_labels,
                                 const DiscriminatorOutput<T>& fake, std::span<const int> fake_labels);

// AcGan: l_s = bce(fake -> 1), total = l_s + l_c.
// Contrast: l_s = bce(fake -> 0), total = l_s - l_c.
template <class T>
LossBreakdown generator_loss(const DiscriminatorOutput<T>& fake, std::span<const int> labels, Objective objective);

template <class T>
struct LossVars {
    typename nn::Tape<T>::Var l_s;
    typename nn::Tape<T>::Var l_c;
    typename nn::Tape<T>::Var total;
};

template <class T>
LossVars<T> discriminator_loss_on_tape(nn::Tape<T>& tape, const DiscriminatorVars<T>& real,
                                       std::span<const int> real_labels, const DiscriminatorVars<T>& fake,
                                       std::span<const int> fake_labels);

// Loss for one discriminator step on a single-source batch (all real or all
// fake): bce(realness -> target) + cce.
template <class T>
LossVars<T> discriminator_step_loss_on_tape(nn::Tape<T>& tape, const DiscriminatorVars<T>& out,
                                            std::span<const int> labels, bool real);

template <class T>
LossVars<T> generator_loss_on_tape(nn::Tape<T>& tape, const DiscriminatorVars<T>& fake, std::span<const int> labels,
                                   Objective objective);

template <class T>
LossBreakdown breakdown(const nn::Tape<T>& tape, const LossVars<T>& v) {
    return {static_cast<double>(tape.scalar(v.l_s)), static_cast<double>(tape.scalar(v.l_c)),
            static_cast<double>(tape.scalar(v.total))};
}

}  // namespace ghostrec::gan
