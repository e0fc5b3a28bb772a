#include "ghostrec/gan/verify.hpp"

#include <cmath>
#include <vector>

#include "ghostrec/gan/loss.hpp"

namespace ghostrec::gan {

using nn::BatchNormMode;
using nn::ParamGrad;
using nn::Tape;
using Mat = nn::Matrix<double>;

namespace {

template <class T>
struct Nets {
    Generator<T> g;
    Discriminator<T> d;
    nn::Matrix<T> z;
    nn::Matrix<T> real;
};

struct Fixture {
    Nets<double> base;
    Nets<long double> wide;
    std::vector<int> labels;
    std::vector<int> real_labels;
};

Fixture make_fixture(const ModelConfig& model, int batch, std::uint64_t seed) {
    Rng rng(seed);
    Fixture f;
    f.base.g = make_generator<double>(model, rng);
    f.base.d = make_discriminator<double>(model, rng);
    f.base.z = Mat(batch, model.noise_dim);
    f.base.real = Mat(batch, model.input_dim());
    for (Eigen::Index k = 0; k < f.base.z.size(); ++k) f.base.z.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < f.base.real.size(); ++k) f.base.real.data()[k] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < batch; ++i) {
        f.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(model.num_classes))));
        f.real_labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(model.num_classes))));
    }
    f.wide.g = cast_generator<long double>(f.base.g);
    f.wide.d = cast_discriminator<long double>(f.base.d);
    f.wide.z = f.base.z.cast<long double>();
    f.wide.real = f.base.real.cast<long double>();
    return f;
}

template <class T>
std::vector<nn::Param<T>*> discriminator_probed(Discriminator<T>& d, BatchNormMode mode,
                                                std::vector<nn::Param<T>*>* excluded) {
    std::vector<nn::Param<T>*> probed;
    for (std::size_t i = 0; i < d.trunk.size(); ++i) {
        probed.push_back(&d.trunk[i].weight);
        if (mode == BatchNormMode::Train) {
            if (excluded) excluded->push_back(&d.trunk[i].bias);
        } else {
            probed.push_back(&d.trunk[i].bias);
        }
        nn::collect(d.norms[i], probed);
    }
    nn::collect(d.head_s, probed);
    nn::collect(d.head_c, probed);
    return probed;
}

}  // namespace

NetworkGradCheck grad_check_generator(const ModelConfig& model, int batch, std::uint64_t seed,
                                      const nn::GradCheckOptions& options) {
    auto f = make_fixture(model, batch, seed);
    auto builder = [&](auto& nets) {
        return [&](auto& t) {
            auto fake = generator_on_tape(t, nets.g, nets.z, f.labels, ParamGrad::Accumulate);
            auto out = discriminator_on_tape(t, fake, nets.d, BatchNormMode::Train, ParamGrad::Skip, false);
            return generator_loss_on_tape(t, out, f.labels, model.objective).total;
        };
    };
    auto params = f.base.g.params();
    auto wide = f.wide.g.params();
    return {nn::grad_check(builder(f.base), params, builder(f.wide), wide, options), params.size(), 0.0};
}

NetworkGradCheck grad_check_discriminator(const ModelConfig& model, int batch, std::uint64_t seed, BatchNormMode mode,
                                          const nn::GradCheckOptions& options) {
    auto f = make_fixture(model, batch, seed);
    const Mat fakes = generator_forward(f.base.g, f.base.z, f.labels);
    const nn::Matrix<long double> wide_fakes = fakes.cast<long double>();
    auto builder = [&](auto& nets, const auto& generated) {
        return [&](auto& t) {
            auto real = discriminator_on_tape(t, t.constant(nets.real), nets.d, mode, ParamGrad::Accumulate, false);
            auto fake = discriminator_on_tape(t, t.constant(generated), nets.d, mode, ParamGrad::Accumulate, false);
            return discriminator_loss_on_tape(t, real, f.real_labels, fake, f.labels).total;
        };
    };

    std::vector<nn::Param<double>*> excluded;
    auto probed = discriminator_probed(f.base.d, mode, &excluded);
    auto wide = discriminator_probed<long double>(f.wide.d, mode, nullptr);
    auto build = builder(f.base, fakes);
    NetworkGradCheck out{nn::grad_check(build, probed, builder(f.wide, wide_fakes), wide, options), probed.size(),
                         0.0};
    if (!excluded.empty()) {
        for (auto* p : excluded) p->zero_grad();
        Tape<double> t;
        t.backward(build(t));
        for (auto* p : excluded) out.max_excluded_grad = std::max(out.max_excluded_grad, p->grad.cwiseAbs().maxCoeff());
    }
    return out;
}

}  // namespace ghostrec::gan
