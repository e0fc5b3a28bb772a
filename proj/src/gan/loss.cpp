#include "ghostrec/gan/loss.hpp"

#include <vector>

#include "ghostrec/common/error.hpp"

namespace ghostrec::gan {

using nn::Tape;

namespace {

template <class T>
std::vector<T> filled(std::size_t n, T v) {
    return std::vector<T>(n, v);
}

void require_batch(std::size_t rows, std::size_t labels, const char* what) {
    if (rows == 0) throw DimensionError(std::string(what) + ": empty batch");
    if (rows != labels) throw DimensionError(std::string(what) + ": batch and label count differ");
}

}  // namespace

template <class T>
LossBreakdown discriminator_loss(const DiscriminatorOutput<T>& real, std::span<const int> real_labels,
                                 const DiscriminatorOutput<T>& fake, std::span<const int> fake_labels) {
    const auto nr = static_cast<std::size_t>(real.realness.rows());
    const auto nf = static_cast<std::size_t>(fake.realness.rows());
    require_batch(nr, real_labels.size(), "discriminator_loss (real)");
    require_batch(nf, fake_labels.size(), "discriminator_loss (fake)");
    const double wr = static_cast<double>(nr) / static_cast<double>(nr + nf);
    const double wf = 1.0 - wr;
    auto ones = filled<T>(nr, T(1));
    auto zeros = filled<T>(nf, T(0));
    const double ls = wr * nn::bce_loss<T>({real.realness.data(), nr}, ones) +
                      wf * nn::bce_loss<T>({fake.realness.data(), nf}, zeros);
    const double lc = wr * nn::cce_loss(real.class_probs, real_labels) + wf * nn::cce_loss(fake.class_probs, fake_labels);
    return {ls, lc, ls + lc};
}

template <class T>
LossBreakdown generator_loss(const DiscriminatorOutput<T>& fake, std::span<const int> labels, Objective objective) {
    const auto n = static_cast<std::size_t>(fake.realness.rows());
    require_batch(n, labels.size(), "generator_loss");
    const T target = objective == Objective::AcGan ? T(1) : T(0);
    auto tgt = filled<T>(n, target);
    const double ls = nn::bce_loss<T>({fake.realness.data(), n}, tgt);
    const double lc = nn::cce_loss(fake.class_probs, labels);
    return {ls, lc, objective == Objective::AcGan ? ls + lc : ls - lc};
}

template <class T>
LossVars<T> discriminator_loss_on_tape(Tape<T>& tape, const DiscriminatorVars<T>& real,
                                       std::span<const int> real_labels, const DiscriminatorVars<T>& fake,
                                       std::span<const int> fake_labels) {
    const auto nr = static_cast<std::size_t>(tape.value(real.realness).rows());
    const auto nf = static_cast<std::size_t>(tape.value(fake.realness).rows());
    require_batch(nr, real_labels.size(), "discriminator_loss (real)");
    require_batch(nf, fake_labels.size(), "discriminator_loss (fake)");
    const T wr = static_cast<T>(static_cast<double>(nr) / static_cast<double>(nr + nf));
    const T wf = T(1) - wr;
    auto ones = filled<T>(nr, T(1));
    auto zeros = filled<T>(nf, T(0));
    auto ls = tape.combine(tape.bce(real.realness, ones), wr, tape.bce(fake.realness, zeros), wf);
    auto lc = tape.combine(tape.cce(real.class_probs, real_labels), wr, tape.cce(fake.class_probs, fake_labels), wf);
    return {ls, lc, tape.combine(ls, T(1), lc, T(1))};
}

template <class T>
LossVars<T> discriminator_step_loss_on_tape(Tape<T>& tape, const DiscriminatorVars<T>& out,
                                            std::span<const int> labels, bool real) {
    const auto n = static_cast<std::size_t>(tape.value(out.realness).rows());
    require_batch(n, labels.size(), "discriminator step");
    auto tgt = filled<T>(n, real ? T(1) : T(0));
    auto ls = tape.bce(out.realness, tgt);
    auto lc = tape.cce(out.class_probs, labels);
    return {ls, lc, tape.combine(ls, T(1), lc, T(1))};
}

template <class T>
LossVars<T> generator_loss_on_tape(Tape<T>& tape, const DiscriminatorVars<T>& fake, std::span<const int> labels,
                                   Objective objective) {
    const auto n = static_cast<std::size_t>(tape.value(fake.realness).rows());
    require_batch(n, labels.size(), "generator_loss");
    auto tgt = filled<T>(n, objective == Objective::AcGan ? T(1) : T(0));
    auto ls = tape.bce(fake.realness, tgt);
    auto lc = tape.cce(fake.class_probs, labels);
    return {ls, lc, tape.combine(ls, T(1), lc, objective == Objective::AcGan ? T(1) : T(-1))};
}

#define GHOSTREC_GAN_LOSS(T)                                                                                          \
    template LossBreakdown discriminator_loss(const DiscriminatorOutput<T>&, std::span<const int>,                    \
                                              const DiscriminatorOutput<T>&, std::span<const int>);                   \
    template LossBreakdown generator_loss(const DiscriminatorOutput<T>&, std::span<const int>, Objective);            \
    template LossVars<T> discriminator_loss_on_tape(Tape<T>&, const DiscriminatorVars<T>&, std::span<const int>,      \
                                                    const DiscriminatorVars<T>&, std::span<const int>);               \
    template LossVars<T> discriminator_step_loss_on_tape(Tape<T>&, const DiscriminatorVars<T>&, std::span<const int>, \
                                                         bool);                                                       \
    template LossVars<T> generator_loss_on_tape(Tape<T>&, const DiscriminatorVars<T>&, std::span<const int>, Objective);

GHOSTREC_GAN_LOSS(float)
GHOSTREC_GAN_LOSS(double)
GHOSTREC_GAN_LOSS(long double)

}  // namespace ghostrec::gan
