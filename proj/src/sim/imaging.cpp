#include "ghostrec/sim/imaging.hpp"

#include <cstdio>

#include "ghostrec/common/error.hpp"

namespace ghostrec::sim {

namespace {

void require_target_dims(const SpeckleSequence& seq, const TargetImage& t) {
    if (t.height != seq.height() || t.width != seq.width() ||
        t.pixels.size() != static_cast<std::size_t>(t.height * t.width))
        throw DimensionError("target is " + std::to_string(t.height) + "x" + std::to_string(t.width) +
                             ", speckles are " + std::to_string(seq.height()) + "x" + std::to_string(seq.width()));
}

}  // namespace

std::string Provenance::to_string() const {
    switch (kind) {
        case Kind::Clean:
            return "clean";
        case Kind::Turbulent:
            return "turbulent";
        case Kind::Awgn: {
            char buf[48];
            std::snprintf(buf, sizeof buf, "awgn(%gdB)", snr_db);
            return buf;
        }
    }
    return "unknown";
}

double bucket_signal(const SpecklePattern& speckle, const TargetImage& target) {
    if (speckle.height != target.height || speckle.width != target.width ||
        speckle.pixels.size() != target.pixels.size())
        throw DimensionError("bucket_signal: speckle and target dimensions differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < target.pixels.size(); ++i) sum += static_cast<double>(speckle.pixels[i]) * target.pixels[i];
    return sum;
}

std::vector<double> measure_sequence(const SpeckleSequence& seq, const TargetImage& target) {
    require_target_dims(seq, target);
    std::vector<double> out(static_cast<std::size_t>(seq.count()));
    for (int i = 0; i < seq.count(); ++i) {
        auto s = seq.pattern_pixels(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) sum += static_cast<double>(s[k]) * target.pixels[k];
        out[static_cast<std::size_t>(i)] = sum;
    }
    return out;
}

Eigen::MatrixXd measure_batch(const SpeckleSequence& seq, std::span<const TargetImage> targets) {
    const int n = seq.pixels_per_pattern();
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> speckles(
        seq.data().data(), seq.count(), n);
    Eigen::MatrixXd t(static_cast<Eigen::Index>(targets.size()), n);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        require_target_dims(seq, targets[i]);
        t.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(targets[i].pixels.data(), n);
    }
    Eigen::MatrixXd out = t * speckles.cast<double>().transpose();
    return out;
}

BucketArray fold_to_array(std::span<const double> v, int rows, int cols) {
    if (rows < 1 || cols < 1 || v.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw DimensionError("cannot fold " + std::to_string(v.size()) + " values into " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    return BucketArray{rows, cols, std::vector<double>(v.begin(), v.end()), Provenance::clean()};
}

std::vector<double> flatten(const BucketArray& arr) { return arr.values; }

namespace {

struct Moments {
    double mean_b = 0.0;
    std::vector<double> mean_i, mean_bi;
};

Moments ensemble_moments(const SpeckleSequence& seq, std::span<const double> buckets) {
    if (buckets.size() != static_cast<std::size_t>(seq.count()))
        throw DimensionError("g2: " + std::to_string(buckets.size()) + " bucket values for " +
                             std::to_string(seq.count()) + " patterns");
    if (seq.count() < 2) throw DegenerateError("g2: ensemble needs at least two patterns");
    const auto n = static_cast<std::size_t>(seq.pixels_per_pattern());
    Moments m;
    m.mean_i.assign(n, 0.0);
    m.mean_bi.assign(n, 0.0);
    for (int k = 0; k < seq.count(); ++k) {
        const double b = buckets[static_cast<std::size_t>(k)];
        auto s = seq.pattern_pixels(k);
        m.mean_b += b;
        for (std::size_t p = 0; p < n; ++p) {
            m.mean_i[p] += s[p];
            m.mean_bi[p] += b * s[p];
        }
    }
    const double inv = 1.0 / seq.count();
    m.mean_b *= inv;
    for (std::size_t p = 0; p < n; ++p) {
        m.mean_i[p] *= inv;
        m.mean_bi[p] *= inv;
    }
    return m;
}

}  // namespace

TargetImage g2_reconstruct(const SpeckleSequence& seq, std::span<const double> buckets) {
    const Moments m = ensemble_moments(seq, buckets);
    if (m.mean_b == 0.0) throw DegenerateError("g2: mean bucket signal is zero");
    TargetImage img{seq.height(), seq.width(), std::vector<double>(m.mean_i.size()), std::nullopt};
    for (std::size_t p = 0; p < m.mean_i.size(); ++p) {
        if (m.mean_i[p] == 0.0)
            throw DegenerateError("g2: reference pixel " + std::to_string(p) + " has zero ensemble mean");
        img.pixels[p] = m.mean_bi[p] / (m.mean_b * m.mean_i[p]);
    }
    return img;
}

TargetImage g2_differential(const SpeckleSequence& seq, std::span<const double> buckets) {
    const Moments m = ensemble_moments(seq, buckets);
    TargetImage img{seq.height(), seq.width(), std::vector<double>(m.mean_i.size()), std::nullopt};
    for (std::size_t p = 0; p < m.mean_i.size(); ++p) img.pixels[p] = m.mean_bi[p] - m.mean_b * m.mean_i[p];
    return img;
}

}  // namespace ghostrec::sim
