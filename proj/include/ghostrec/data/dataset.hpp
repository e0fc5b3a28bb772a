#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/hash.hpp"
#include "ghostrec/sim/channel.hpp"
#include "ghostrec/sim/imaging.hpp"
#include "ghostrec/sim/speckle.hpp"

namespace ghostrec::data {

struct LabeledTarget {
    sim::TargetImage image;
    int label = 0;
    std::string source_id;
};

// Affine map of [min, max] onto [-1, 1].
struct NormStats {
    double min = 0.0;
    double max = 1.0;

    double apply(double v) const { return 2.0 * (v - min) / (max - min) - 1.0; }
    double invert(double v) const { return (v + 1.0) * 0.5 * (max - min) + min; }
    friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Optional bucket-array channel applied during synthesis.
struct ChannelConfig {
    enum class Kind { None, Fixed, Awgn };
    Kind kind = Kind::None;
    double sigma = 0.0;   // Fixed: absolute field sd
    double snr_db = 0.0;  // Awgn
    std::uint64_t seed = 0;

    static ChannelConfig none() { return {}; }
    static ChannelConfig fixed(double sigma, std::uint64_t seed) { return {Kind::Fixed, sigma, 0.0, seed}; }
    static ChannelConfig awgn(double snr_db, std::uint64_t seed) { return {Kind::Awgn, 0.0, snr_db, seed}; }
    std::string describe() const;
};

struct Sample {
    sim::BucketArray array;
    int label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

// Bucket values are kept at single precision (rounded on creation) so that a
// save/load round trip is exact.
struct BucketDataset {
    int num_classes = 0;
    int rows = 0;
    int cols = 0;
    std::vector<Sample> samples;
    Digest speckle_fingerprint{};
    std::string noise_config = "none";
    std::optional<NormStats> norm_stats;
    bool normalized = false;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::vector<int> labels() const;
    std::vector<int> class_counts() const;
    // Throws LabelError / DimensionError when an invariant is broken.
    void validate() const;
    // Same metadata, no samples.
    BucketDataset empty_like() const;

    friend bool operator==(const BucketDataset&, const BucketDataset&) = default;
};

// Rounds to float and back.
double to_stored(double v);

// One array per target, in input order. rows x cols defaults to the square
// fold of seq.count(); a non-square count then needs explicit dims.
BucketDataset synth_dataset(std::span<const LabeledTarget> targets, const sim::SpeckleSequence& seq,
                            int num_classes, const ChannelConfig& channel = ChannelConfig::none(), int rows = 0,
                            int cols = 0);

// Channel on an existing raw dataset. Awgn draws per-sample seeds from
// channel.seed and the sample index. Throws ContractError on a normalized
// dataset.
BucketDataset apply_channel(const BucketDataset& ds, const ChannelConfig& channel);

// Global min/max over every value of every sample.
NormStats compute_norm_stats(const BucketDataset& ds);
// Computes stats on ds and maps it into [-1, 1]. Throws DegenerateError when
// min == max and DegenerateError on an empty dataset.
std::pair<BucketDataset, NormStats> normalize_dataset(const BucketDataset& ds);
// Uses the given stats; held-out values may leave [-1, 1].
BucketDataset apply_normalization(const BucketDataset& ds, const NormStats& stats);
BucketDataset denormalize(const BucketDataset& ds);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

// Disjoint and exhaustive; both halves keep the original sample order.
// Stratified splits need at least two samples in every class.
std::pair<BucketDataset, BucketDataset> split(const BucketDataset& ds, const SplitSpec& spec);

// Keeps samples whose label is listed and renumbers labels by list position.
BucketDataset select_labels(const BucketDataset& ds, std::span<const int> keep);

// Concatenates datasets with identical dims, class count, fingerprint and
// normalization state.
BucketDataset concat(const BucketDataset& a, const BucketDataset& b);

// GBDS layout, little-endian:
//   "GBDS" | u16 version | u16 num_classes | u16 rows | u16 cols
//   | u8[32] fingerprint | u8 has_stats | f64 min | f64 max | u8 normalized
//   | string32 noise_config | u32 count
//   | count x (u16 label | u8 provenance | f64 snr_db | f32[rows*cols])
//   | u32 CRC-32 of everything before it
inline constexpr std::uint16_t kDatasetFormatVersion = 1;

Bytes encode_dataset(const BucketDataset& ds);
BucketDataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const BucketDataset& ds, const std::filesystem::path& path);
BucketDataset load_dataset(const std::filesystem::path& path);

}  // namespace ghostrec::data
