#include "ghostrec/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ghostrec/common/error.hpp"
#include "ghostrec/common/rng.hpp"

namespace ghostrec::nn {

namespace {

template <class T>
struct Evaluation {
    T loss;
    std::uint64_t signature;
};

template <class T, class Builder>
Evaluation<T> evaluate(const Builder& build) {
    Tape<T> tape;
    auto v = build(tape);
    return {tape.scalar(v), tape.branch_signature()};
}

template <class R, class Builder>
GradCheckReport run(const LossBuilder& build, std::span<Param<double>* const> params, const Builder& reference,
                    std::span<Param<R>* const> reference_params, const GradCheckOptions& options) {
    if (params.size() != reference_params.size())
        throw DimensionError("grad_check: reference has a different number of parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->value.rows() != reference_params[i]->value.rows() ||
            params[i]->value.cols() != reference_params[i]->value.cols())
            throw DimensionError("grad_check: reference parameter " + std::to_string(i) + " has a different shape");

    for (Param<double>* p : params) p->zero_grad();
    {
        Tape<double> tape;
        auto loss = build(tape);
        tape.backward(loss);
    }
    std::vector<Matrix<double>> analytic;
    analytic.reserve(params.size());
    for (Param<double>* p : params) analytic.push_back(p->grad);
    const std::uint64_t base = evaluate<R>(reference).signature;

    GradCheckReport report;
    Rng rng(options.seed);
    const R eps = static_cast<R>(options.eps);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param<R>& p = *reference_params[pi];
        const auto n = static_cast<std::size_t>(p.value.size());
        const std::size_t want =
            options.max_coords_per_param > 0 ? std::min(options.max_coords_per_param, n) : n;
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        std::size_t accepted = 0;
        // Lazy Fisher-Yates: position i is drawn uniformly from the rest.
        for (std::size_t i = 0; i < n && accepted < want; ++i) {
            if (want < n) std::swap(coords[i], coords[i + rng.below(n - i)]);
            const std::size_t c = coords[i];
            R& theta = p.value.data()[c];
            const R saved = theta;
            theta = saved + eps;
            const auto up = evaluate<R>(reference);
            theta = saved - eps;
            const auto down = evaluate<R>(reference);
            theta = saved;
            if (up.signature != base || down.signature != base) {
                ++report.kinks_skipped;
                continue;
            }
            ++accepted;

            const R fd = (up.loss - down.loss) / (R(2) * eps);
            const R an = analytic[pi].data()[c];
            const R rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), R(1e-12)});
            ++report.coords_checked;
            if (static_cast<double>(rel) >= report.max_rel_error) {
                report.max_rel_error = static_cast<double>(rel);
                std::ostringstream os;
                os << "param[" << pi << "] index " << c << " analytic " << static_cast<double>(an) << " fd "
                   << static_cast<double>(fd);
                report.worst = os.str();
            }
        }
    }
    for (Param<double>* p : params) p->zero_grad();
    return report;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, std::span<Param<double>* const> params,
                           const GradCheckOptions& options) {
    return run<double>(build, params, build, params, options);
}

GradCheckReport grad_check(const LossBuilder& build, std::span<Param<double>* const> params,
                           const ExtendedLossBuilder& reference, std::span<Param<long double>* const> reference_params,
                           const GradCheckOptions& options) {
    return run<long double>(build, params, reference, reference_params, options);
}

}  // namespace ghostrec::nn
