#include "ghostrec/sim/speckle.hpp"

#include <algorithm>
#include <cstring>

#include "ghostrec/common/error.hpp"
#include "ghostrec/common/rng.hpp"

namespace ghostrec::sim {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'P', 'K'};

void fill_patterns(std::vector<float>& out, std::uint64_t seed, const SpeckleDistribution& dist) {
    Rng rng(seed);
    if (dist.kind == SpeckleDistribution::Kind::Bernoulli) {
        for (float& v : out) v = rng.bernoulli(dist.p) ? 1.0f : 0.0f;
    } else {
        // Round down so a draw just below 1 cannot round up to 1.0f.
        for (float& v : out) v = std::min(static_cast<float>(rng.uniform()), std::nextafter(1.0f, 0.0f));
    }
}

}  // namespace

SpeckleDistribution SpeckleDistribution::parse(const std::string& text) {
    if (text == "uniform") return uniform();
    if (text == "bernoulli") return bernoulli(0.5);
    const std::string prefix = "bernoulli:";
    if (text.rfind(prefix, 0) == 0) {
        double p = 0.0;
        try {
            std::size_t used = 0;
            p = std::stod(text.substr(prefix.size()), &used);
            if (used != text.size() - prefix.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw UsageError("invalid Bernoulli probability in '" + text + "'");
        }
        if (!(p > 0.0 && p < 1.0)) throw UsageError("Bernoulli probability must lie in (0, 1)");
        return bernoulli(p);
    }
    throw UsageError("unknown speckle distribution '" + text + "' (use uniform or bernoulli[:p])");
}

std::string SpeckleDistribution::to_string() const {
    if (kind == Kind::Uniform) return "uniform";
    char buf[64];
    std::snprintf(buf, sizeof buf, "bernoulli:%.17g", p);
    return buf;
}

std::span<const float> SpeckleSequence::pattern_pixels(int i) const {
    if (i < 0 || i >= count_) throw DimensionError("pattern index out of range");
    const auto n = static_cast<std::size_t>(pixels_per_pattern());
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

SpecklePattern SpeckleSequence::pattern(int i) const {
    auto px = pattern_pixels(i);
    return SpecklePattern{height_, width_, std::vector<float>(px.begin(), px.end())};
}

SpeckleSequence generate_speckles(std::uint64_t seed, int count, int height, int width,
                                  const SpeckleDistribution& distribution) {
    if (count < 1) throw UsageError("speckle count must be at least 1");
    if (height < 1 || width < 1) throw UsageError("speckle dimensions must be at least 1x1");
    if (height > 0xffff || width > 0xffff) throw UsageError("speckle dimensions exceed 65535");
    if (distribution.kind == SpeckleDistribution::Kind::Bernoulli && !(distribution.p > 0.0 && distribution.p < 1.0))
        throw UsageError("Bernoulli probability must lie in (0, 1)");
    SpeckleSequence seq;
    seq.count_ = count;
    seq.height_ = height;
    seq.width_ = width;
    seq.seed_ = seed;
    seq.distribution_ = distribution;
    seq.data_.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(height * width));
    fill_patterns(seq.data_, seed, distribution);
    seq.fingerprint_ = sha256(encode_speckles(seq));
    return seq;
}

SpeckleSequence make_speckle_sequence(std::vector<SpecklePattern> patterns, const SpeckleDistribution& distribution) {
    if (patterns.empty()) throw UsageError("speckle sequence needs at least one pattern");
    SpeckleSequence seq;
    seq.count_ = static_cast<int>(patterns.size());
    seq.height_ = patterns.front().height;
    seq.width_ = patterns.front().width;
    seq.distribution_ = distribution;
    for (const auto& p : patterns) {
        if (p.height != seq.height_ || p.width != seq.width_ ||
            p.pixels.size() != static_cast<std::size_t>(p.height * p.width))
            throw DimensionError("all speckle patterns must share dimensions");
        seq.data_.insert(seq.data_.end(), p.pixels.begin(), p.pixels.end());
    }
    seq.fingerprint_ = sha256(encode_speckles(seq));
    return seq;
}

Bytes encode_speckles(const SpeckleSequence& seq) {
    ByteWriter w;
    w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u16(kSpeckleFormatVersion);
    w.u64(seq.seed());
    w.u8(static_cast<std::uint8_t>(seq.distribution().kind));
    if (seq.distribution().kind == SpeckleDistribution::Kind::Bernoulli) w.f64(seq.distribution().p);
    w.u32(static_cast<std::uint32_t>(seq.count()));
    w.u16(static_cast<std::uint16_t>(seq.height()));
    w.u16(static_cast<std::uint16_t>(seq.width()));
    for (float v : seq.data()) w.f32(v);
    return w.take();
}

SpeckleSequence decode_speckles(std::span<const std::uint8_t> bytes, bool verify) {
    ByteReader r(bytes);
    auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not a speckle file (bad magic)");
    const auto version = r.u16();
    if (version != kSpeckleFormatVersion)
        throw VersionError("unsupported speckle format version " + std::to_string(version));
    SpeckleSequence seq;
    seq.seed_ = r.u64();
    const auto tag = r.u8();
    if (tag == static_cast<std::uint8_t>(SpeckleDistribution::Kind::Bernoulli))
        seq.distribution_ = SpeckleDistribution::bernoulli(r.f64());
    else if (tag == static_cast<std::uint8_t>(SpeckleDistribution::Kind::Uniform))
        seq.distribution_ = SpeckleDistribution::uniform();
    else
        throw FormatError("unknown speckle distribution tag " + std::to_string(tag));
    seq.count_ = static_cast<int>(r.u32());
    seq.height_ = r.u16();
    seq.width_ = r.u16();
    if (seq.count_ < 1 || seq.height_ < 1 || seq.width_ < 1) throw FormatError("speckle header has empty dimensions");
    const std::size_t n = static_cast<std::size_t>(seq.count_) * static_cast<std::size_t>(seq.height_ * seq.width_);
    if (r.remaining() != n * 4)
        throw FormatError("speckle payload has " + std::to_string(r.remaining()) + " bytes, header implies " +
                          std::to_string(n * 4));
    seq.data_.resize(n);
    for (float& v : seq.data_) v = r.f32();
    seq.fingerprint_ = sha256(bytes);
    if (verify) {
        std::vector<float> regen(n);
        fill_patterns(regen, seq.seed_, seq.distribution_);
        if (regen != seq.data_)
            throw ValidationError("speckle payload does not match regeneration from its header");
    }
    return seq;
}

void save_speckles(const SpeckleSequence& seq, const std::filesystem::path& path) {
    if (seq.polluted()) throw UsageError("polluted speckle sequences are not regenerable and cannot be saved");
    write_file(path, encode_speckles(seq));
}

SpeckleSequence load_speckles(const std::filesystem::path& path, bool verify) {
    return decode_speckles(read_file(path), verify);
}

}  // namespace ghostrec::sim
