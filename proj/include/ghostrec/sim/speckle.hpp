#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/hash.hpp"

namespace ghostrec::sim {

struct TurbulenceField;

struct SpeckleDistribution {
    enum class Kind : std::uint8_t { Bernoulli = 0, Uniform = 1 };
    Kind kind = Kind::Bernoulli;
    double p = 0.5;  // Bernoulli only

    static SpeckleDistribution bernoulli(double p = 0.5) { return {Kind::Bernoulli, p}; }
    static SpeckleDistribution uniform() { return {Kind::Uniform, 0.0}; }
    // "bernoulli", "bernoulli:0.3", "uniform". Throws UsageError.
    static SpeckleDistribution parse(const std::string& text);
    std::string to_string() const;

    friend bool operator==(const SpeckleDistribution&, const SpeckleDistribution&) = default;
};

struct SpecklePattern {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // row-major, values in [0, 1]
};

// A fixed, ordered illumination sequence. Pixel data for all patterns is
// stored contiguously, one pattern per row.
class SpeckleSequence {
public:
    SpeckleSequence() = default;

    int count() const { return count_; }
    int height() const { return height_; }
    int width() const { return width_; }
    int pixels_per_pattern() const { return height_ * width_; }
    std::uint64_t seed() const { return seed_; }
    const SpeckleDistribution& distribution() const { return distribution_; }
    // SHA-256 of the canonical GSPK encoding of the projected sequence.
    const Digest& fingerprint() const { return fingerprint_; }
    // True when the patterns were perturbed after generation; the fingerprint
    // still names the sequence that was projected.
    bool polluted() const { return polluted_; }

    std::span<const float> data() const { return data_; }
    std::span<const float> pattern_pixels(int i) const;
    SpecklePattern pattern(int i) const;

private:
    friend SpeckleSequence generate_speckles(std::uint64_t, int, int, int, const SpeckleDistribution&);
    friend SpeckleSequence decode_speckles(std::span<const std::uint8_t>, bool);
    friend SpeckleSequence make_speckle_sequence(std::vector<SpecklePattern>, const SpeckleDistribution&);
    friend SpeckleSequence pollute_speckles(const SpeckleSequence&, const TurbulenceField&);

    int count_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::uint64_t seed_ = 0;
    SpeckleDistribution distribution_;
    Digest fingerprint_{};
    bool polluted_ = false;
    std::vector<float> data_;
};

// Deterministic in all arguments. Bernoulli pixels are exactly 0 or 1;
// uniform pixels are drawn in [0, 1). Throws UsageError on count < 1 or
// dims < 1.
SpeckleSequence generate_speckles(std::uint64_t seed, int count, int height, int width,
                                  const SpeckleDistribution& distribution);

// Wraps explicit patterns (e.g. a canonical basis). The result has seed 0
// and is not regenerable; its fingerprint hashes the payload.
SpeckleSequence make_speckle_sequence(std::vector<SpecklePattern> patterns,
                                      const SpeckleDistribution& distribution = SpeckleDistribution::uniform());

// GSPK layout, little-endian:
//   "GSPK" | u16 version | u64 seed | u8 distribution tag | [f64 p, Bernoulli]
//   | u32 count | u16 height | u16 width | f32 pixels (count*height*width)
inline constexpr std::uint16_t kSpeckleFormatVersion = 1;

Bytes encode_speckles(const SpeckleSequence& seq);
// When verify is set the payload must equal a regeneration from the header.
SpeckleSequence decode_speckles(std::span<const std::uint8_t> bytes, bool verify = true);

void save_speckles(const SpeckleSequence& seq, const std::filesystem::path& path);
SpeckleSequence load_speckles(const std::filesystem::path& path, bool verify = true);

}  // namespace ghostrec::sim
