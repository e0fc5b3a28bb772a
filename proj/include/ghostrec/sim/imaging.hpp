#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ghostrec/sim/speckle.hpp"

namespace ghostrec::sim {

struct TargetImage {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;  // row-major, values in [0, 1]
    std::optional<int> label;

    double at(int r, int c) const { return pixels[static_cast<std::size_t>(r * width + c)]; }
};

struct Provenance {
    enum class Kind : std::uint8_t { Clean = 0, Turbulent = 1, Awgn = 2 };
    Kind kind = Kind::Clean;
    double snr_db = 0.0;  // Awgn only

    static Provenance clean() { return {}; }
    static Provenance turbulent() { return {Kind::Turbulent, 0.0}; }
    static Provenance awgn(double snr_db) { return {Kind::Awgn, snr_db}; }
    std::string to_string() const;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct BucketArray {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major
    Provenance provenance;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
    friend bool operator==(const BucketArray&, const BucketArray&) = default;
};

// Sum over pixels of speckle * target. Throws DimensionError on mismatch.
double bucket_signal(const SpecklePattern& speckle, const TargetImage& target);

// One bucket value per pattern, in sequence order.
std::vector<double> measure_sequence(const SpeckleSequence& seq, const TargetImage& target);

// Bucket vectors for many targets at once: row i holds measure_sequence of
// targets[i]. Same values as the single-target path up to summation order.
Eigen::MatrixXd measure_batch(const SpeckleSequence& seq, std::span<const TargetImage> targets);

// Row-major fold: array[r][c] = v[r * cols + c].
BucketArray fold_to_array(std::span<const double> v, int rows, int cols);
std::vector<double> flatten(const BucketArray& arr);

// Ensemble second-order correlation per pixel,
//   g2(x, y) = <B I(x, y)> / (<B> <I(x, y)>).
// Throws DegenerateError when <B> or any pixel mean is zero.
TargetImage g2_reconstruct(const SpeckleSequence& seq, std::span<const double> buckets);

// Covariance form <B I(x, y)> - <B><I(x, y)>; an independent route used to
// cross-check g2_reconstruct.
TargetImage g2_differential(const SpeckleSequence& seq, std::span<const double> buckets);

}  // namespace ghostrec::sim
