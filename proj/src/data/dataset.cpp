#include "ghostrec/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "ghostrec/common/error.hpp"
#include "ghostrec/common/rng.hpp"

namespace ghostrec::data {

namespace {

constexpr char kMagic[4] = {'G', 'B', 'D', 'S'};

void round_values(sim::BucketArray& arr) {
    for (double& v : arr.values) v = to_stored(v);
}

void require_compatible(const BucketDataset& a, const BucketDataset& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw DimensionError("datasets have different array dimensions");
    if (a.num_classes != b.num_classes) throw LabelError("datasets have different class counts");
    if (a.speckle_fingerprint != b.speckle_fingerprint) throw ContractError("datasets use different speckle sequences");
    if (a.normalized != b.normalized || a.norm_stats != b.norm_stats)
        throw ContractError("datasets differ in normalization");
}

}  // namespace

std::string ChannelConfig::describe() const {
    char buf[128];
    switch (kind) {
        case Kind::None:
            return "none";
        case Kind::Fixed:
            std::snprintf(buf, sizeof buf, "fixed(sigma=%.17g,seed=%llu)", sigma, static_cast<unsigned long long>(seed));
            return buf;
        case Kind::Awgn:
            std::snprintf(buf, sizeof buf, "awgn(snr_db=%.17g,seed=%llu)", snr_db, static_cast<unsigned long long>(seed));
            return buf;
    }
    return "unknown";
}

double to_stored(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<int> BucketDataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<int> BucketDataset::class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (const auto& s : samples)
        if (s.label >= 0 && s.label < num_classes) ++counts[static_cast<std::size_t>(s.label)];
    return counts;
}

void BucketDataset::validate() const {
    if (num_classes < 1) throw LabelError("dataset must declare at least one class");
    for (const auto& s : samples) {
        if (s.label < 0 || s.label >= num_classes)
            throw LabelError("label " + std::to_string(s.label) + " outside [0, " + std::to_string(num_classes) + ")");
        if (s.array.rows != rows || s.array.cols != cols ||
            s.array.values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw DimensionError("sample array dimensions differ from the dataset's");
    }
}

BucketDataset BucketDataset::empty_like() const {
    BucketDataset out = *this;
    out.samples.clear();
    return out;
}

BucketDataset synth_dataset(std::span<const LabeledTarget> targets, const sim::SpeckleSequence& seq,
                            int num_classes, const ChannelConfig& channel, int rows, int cols) {
    if (rows == 0 && cols == 0) {
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(seq.count()))));
        if (side * side != seq.count())
            throw DimensionError(std::to_string(seq.count()) + " measurements do not fold into a square array");
        rows = cols = side;
    }
    if (rows < 1 || cols < 1 || rows * cols != seq.count())
        throw DimensionError("cannot fold " + std::to_string(seq.count()) + " measurements into " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    if (num_classes < 1) throw LabelError("num_classes must be positive");
    for (const auto& t : targets)
        if (t.label < 0 || t.label >= num_classes)
            throw LabelError("target label " + std::to_string(t.label) + " outside [0, " +
                             std::to_string(num_classes) + ")");

    BucketDataset ds;
    ds.num_classes = num_classes;
    ds.rows = rows;
    ds.cols = cols;
    ds.speckle_fingerprint = seq.fingerprint();
    ds.samples.reserve(targets.size());

    constexpr std::size_t kChunk = 512;
    std::vector<sim::TargetImage> images;
    for (std::size_t start = 0; start < targets.size(); start += kChunk) {
        const std::size_t end = std::min(targets.size(), start + kChunk);
        images.clear();
        for (std::size_t i = start; i < end; ++i) images.push_back(targets[i].image);
        Eigen::MatrixXd buckets = sim::measure_batch(seq, images);
        for (std::size_t i = start; i < end; ++i) {
            const auto row = static_cast<Eigen::Index>(i - start);
            std::vector<double> v(static_cast<std::size_t>(buckets.cols()));
            for (Eigen::Index k = 0; k < buckets.cols(); ++k) v[static_cast<std::size_t>(k)] = buckets(row, k);
            auto arr = sim::fold_to_array(v, rows, cols);
            round_values(arr);
            ds.samples.push_back(Sample{std::move(arr), targets[i].label});
        }
    }
    return channel.kind == ChannelConfig::Kind::None ? ds : apply_channel(ds, channel);
}

BucketDataset apply_channel(const BucketDataset& ds, const ChannelConfig& channel) {
    if (ds.normalized) throw ContractError("noise channels apply to raw bucket arrays, not normalized ones");
    BucketDataset out = ds;
    switch (channel.kind) {
        case ChannelConfig::Kind::None:
            return out;
        case ChannelConfig::Kind::Fixed: {
            auto field = sim::TurbulenceField::draw(ds.rows, ds.cols, channel.sigma, channel.seed);
            for (auto& s : out.samples) {
                s.array = sim::add_fixed_noise(s.array, field);
                round_values(s.array);
            }
            break;
        }
        case ChannelConfig::Kind::Awgn:
            for (std::size_t i = 0; i < out.samples.size(); ++i) {
                auto& s = out.samples[i];
                s.array = sim::add_awgn_snr(s.array, channel.snr_db, derive_seed(channel.seed, i));
                round_values(s.array);
            }
            break;
    }
    out.noise_config = ds.noise_config == "none" ? channel.describe() : ds.noise_config + "+" + channel.describe();
    return out;
}

NormStats compute_norm_stats(const BucketDataset& ds) {
    if (ds.empty()) throw DegenerateError("cannot compute normalization statistics of an empty dataset");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ds.samples)
        for (double v : s.array.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) throw DegenerateError("constant dataset: min equals max, normalization undefined");
    return NormStats{lo, hi};
}

std::pair<BucketDataset, NormStats> normalize_dataset(const BucketDataset& ds) {
    if (ds.normalized) throw ContractError("dataset is already normalized");
    auto stats = compute_norm_stats(ds);
    return {apply_normalization(ds, stats), stats};
}

BucketDataset apply_normalization(const BucketDataset& ds, const NormStats& stats) {
    if (ds.normalized) throw ContractError("dataset is already normalized");
    if (!(stats.max > stats.min)) throw DegenerateError("normalization statistics have min >= max");
    BucketDataset out = ds;
    for (auto& s : out.samples)
        for (double& v : s.array.values) v = to_stored(stats.apply(v));
    out.norm_stats = stats;
    out.normalized = true;
    return out;
}

BucketDataset denormalize(const BucketDataset& ds) {
    if (!ds.normalized || !ds.norm_stats) throw ContractError("dataset is not normalized");
    BucketDataset out = ds;
    for (auto& s : out.samples)
        for (double& v : s.array.values) v = to_stored(ds.norm_stats->invert(v));
    out.normalized = false;
    return out;
}

std::pair<BucketDataset, BucketDataset> split(const BucketDataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw UsageError("train fraction must lie strictly between 0 and 1");
    ds.validate();
    std::vector<char> to_train(ds.size(), 0);

    auto take = [&](std::vector<std::size_t> idx, std::uint64_t seed, bool keep_both) {
        Rng rng(seed);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        auto n = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
        if (keep_both) n = std::clamp<std::size_t>(n, 1, idx.size() - 1);
        for (std::size_t k = 0; k < n; ++k) to_train[idx[k]] = 1;
    };

    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
        for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            if (by_class[c].size() < 2)
                throw DegenerateError("stratified split needs at least two samples in class " + std::to_string(c) +
                                      " (found " + std::to_string(by_class[c].size()) + ")");
            take(by_class[c], derive_seed(spec.seed, c), true);
        }
    } else {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(all, spec.seed, false);
    }

    BucketDataset train = ds.empty_like(), test = ds.empty_like();
    for (std::size_t i = 0; i < ds.size(); ++i) (to_train[i] ? train : test).samples.push_back(ds.samples[i]);
    return {std::move(train), std::move(test)};
}

BucketDataset select_labels(const BucketDataset& ds, std::span<const int> keep) {
    if (keep.empty()) throw UsageError("label selection is empty");
    std::vector<int> remap(static_cast<std::size_t>(ds.num_classes), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        if (keep[k] < 0 || keep[k] >= ds.num_classes)
            throw LabelError("selected label " + std::to_string(keep[k]) + " is not in the dataset");
        if (remap[static_cast<std::size_t>(keep[k])] != -1) throw UsageError("label selected twice");
        remap[static_cast<std::size_t>(keep[k])] = static_cast<int>(k);
    }
    BucketDataset out = ds.empty_like();
    out.num_classes = static_cast<int>(keep.size());
    for (const auto& s : ds.samples) {
        const int to = remap[static_cast<std::size_t>(s.label)];
        if (to >= 0) out.samples.push_back(Sample{s.array, to});
    }
    return out;
}

BucketDataset concat(const BucketDataset& a, const BucketDataset& b) {
    require_compatible(a, b);
    BucketDataset out = a;
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    if (a.noise_config != b.noise_config) out.noise_config = a.noise_config + "|" + b.noise_config;
    return out;
}

Bytes encode_dataset(const BucketDataset& ds) {
    ds.validate();
    if (ds.num_classes > 0xffff || ds.rows > 0xffff || ds.cols > 0xffff)
        throw DimensionError("dataset dimensions exceed the file format's 16-bit fields");
    ByteWriter w;
    w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u16(kDatasetFormatVersion);
    w.u16(static_cast<std::uint16_t>(ds.num_classes));
    w.u16(static_cast<std::uint16_t>(ds.rows));
    w.u16(static_cast<std::uint16_t>(ds.cols));
    w.bytes(ds.speckle_fingerprint);
    w.u8(ds.norm_stats ? 1 : 0);
    w.f64(ds.norm_stats ? ds.norm_stats->min : 0.0);
    w.f64(ds.norm_stats ? ds.norm_stats->max : 0.0);
    w.u8(ds.normalized ? 1 : 0);
    w.string32(ds.noise_config);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    for (const auto& s : ds.samples) {
        w.u16(static_cast<std::uint16_t>(s.label));
        w.u8(static_cast<std::uint8_t>(s.array.provenance.kind));
        w.f64(s.array.provenance.snr_db);
        for (double v : s.array.values) w.f32(static_cast<float>(v));
    }
    w.u32(crc32(w.data()));
    return w.take();
}

BucketDataset decode_dataset(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a GBDS dataset file");
    ByteReader r(bytes);
    r.bytes(4);
    const auto version = r.u16();
    if (version > kDatasetFormatVersion)
        throw VersionError("dataset format version " + std::to_string(version) + " is newer than supported version " +
                           std::to_string(kDatasetFormatVersion));
    if (version == 0) throw VersionError("dataset format version 0 is invalid");
    if (bytes.size() < 4) throw FormatError("truncated dataset file");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader trailer(bytes.subspan(bytes.size() - 4));
    if (crc32(body) != trailer.u32()) throw ChecksumError("dataset checksum mismatch: file is corrupted");

    BucketDataset ds;
    ds.num_classes = r.u16();
    ds.rows = r.u16();
    ds.cols = r.u16();
    auto fp = r.bytes(32);
    std::copy(fp.begin(), fp.end(), ds.speckle_fingerprint.begin());
    const bool has_stats = r.u8() != 0;
    const double lo = r.f64(), hi = r.f64();
    if (has_stats) ds.norm_stats = NormStats{lo, hi};
    ds.normalized = r.u8() != 0;
    ds.noise_config = r.string32();
    const auto count = r.u32();
    const std::size_t n = static_cast<std::size_t>(ds.rows) * static_cast<std::size_t>(ds.cols);
    const std::size_t record = 2 + 1 + 8 + 4 * n;
    if (r.remaining() < 4 || (r.remaining() - 4) != record * count)
        throw FormatError("dataset payload size does not match its sample count");
    ds.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Sample s;
        s.label = r.u16();
        const auto kind = r.u8();
        if (kind > 2) throw FormatError("unknown provenance tag " + std::to_string(kind));
        s.array.provenance.kind = static_cast<sim::Provenance::Kind>(kind);
        s.array.provenance.snr_db = r.f64();
        s.array.rows = ds.rows;
        s.array.cols = ds.cols;
        s.array.values.resize(n);
        for (double& v : s.array.values) v = r.f32();
        ds.samples.push_back(std::move(s));
    }
    try {
        ds.validate();
    } catch (const DomainError& e) {
        throw ValidationError(std::string("invalid dataset file: ") + e.what());
    }
    return ds;
}

void save_dataset(const BucketDataset& ds, const std::filesystem::path& path) { write_file(path, encode_dataset(ds)); }

BucketDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace ghostrec::data
