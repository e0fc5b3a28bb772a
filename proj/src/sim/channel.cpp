#include "ghostrec/sim/channel.hpp"

#include <algorithm>
#include <cmath>

#include "ghostrec/common/error.hpp"
#include "ghostrec/common/rng.hpp"

namespace ghostrec::sim {

TurbulenceField TurbulenceField::draw(int rows, int cols, double sigma, std::uint64_t seed) {
    if (rows < 1 || cols < 1) throw DimensionError("turbulence field needs positive dimensions");
    if (!(sigma >= 0.0)) throw UsageError("turbulence sigma must be non-negative");
    TurbulenceField f{rows, cols, std::vector<double>(static_cast<std::size_t>(rows * cols)), seed, sigma};
    Rng rng(seed);
    for (double& v : f.values) v = sigma * rng.normal();
    return f;
}

TurbulenceField TurbulenceField::negated() const {
    TurbulenceField f = *this;
    for (double& v : f.values) v = -v;
    return f;
}

SpeckleSequence pollute_speckles(const SpeckleSequence& seq, const TurbulenceField& field) {
    if (field.rows != seq.height() || field.cols != seq.width())
        throw DimensionError("turbulence field does not match the speckle pattern shape");
    SpeckleSequence out = seq;
    const auto n = static_cast<std::size_t>(seq.pixels_per_pattern());
    for (std::size_t i = 0; i < out.data_.size(); ++i) {
        const double v = out.data_[i] + field.values[i % n];
        out.data_[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    out.polluted_ = out.polluted_ || field.sigma > 0.0;
    return out;
}

BucketArray add_fixed_noise(const BucketArray& arr, const TurbulenceField& field) {
    if (field.rows != arr.rows || field.cols != arr.cols)
        throw DimensionError("noise field is " + std::to_string(field.rows) + "x" + std::to_string(field.cols) +
                             ", array is " + std::to_string(arr.rows) + "x" + std::to_string(arr.cols));
    BucketArray out = arr;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += field.values[i];
    out.provenance = Provenance::turbulent();
    return out;
}

BucketArray add_awgn_snr(const BucketArray& arr, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return arr;
    if (!std::isfinite(snr_db)) throw UsageError("SNR must be finite or +inf");
    double signal = 0.0;
    for (double v : arr.values) signal += v * v;
    if (signal == 0.0) throw DegenerateError("SNR is undefined for an all-zero array");

    Rng rng(seed);
    std::vector<double> noise(arr.values.size());
    double drawn = 0.0;
    for (double& n : noise) {
        n = rng.normal();
        drawn += n * n;
    }
    const double target = signal * std::pow(10.0, -snr_db / 10.0);
    const double scale = std::sqrt(target / drawn);
    BucketArray out = arr;
    for (std::size_t i = 0; i < noise.size(); ++i) out.values[i] += scale * noise[i];
    out.provenance = Provenance::awgn(snr_db);
    return out;
}

}  // namespace ghostrec::sim
