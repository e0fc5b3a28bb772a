#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ghostrec/sim/imaging.hpp"

namespace ghostrec::sim {

// A frozen zero-mean Gaussian perturbation. The same seed always yields the
// same field.
struct TurbulenceField {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    std::uint64_t seed = 0;
    double sigma = 0.0;

    static TurbulenceField draw(int rows, int cols, double sigma, std::uint64_t seed);
    TurbulenceField negated() const;
};

// Every pattern gets the same field added, then clamped to [0, 1].
SpeckleSequence pollute_speckles(const SpeckleSequence& seq, const TurbulenceField& field);

// Elementwise sum; provenance becomes turbulent.
BucketArray add_fixed_noise(const BucketArray& arr, const TurbulenceField& field);

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

// Adds Gaussian noise rescaled after drawing so that
// 10 log10(sum signal^2 / sum noise^2) equals snr_db for this realisation.
// snr_db = +inf returns the input unchanged. Throws DegenerateError for an
// all-zero array.
BucketArray add_awgn_snr(const BucketArray& arr, double snr_db, std::uint64_t seed);

}  // namespace ghostrec::sim
