#include "ghostrec/data/idx.hpp"

#include <algorithm>
#include <cmath>

#include "ghostrec/common/error.hpp"

namespace ghostrec::data {

namespace {

void put_u32_be(ByteWriter& w, std::uint32_t v) {
    w.u8(static_cast<std::uint8_t>(v >> 24));
    w.u8(static_cast<std::uint8_t>(v >> 16));
    w.u8(static_cast<std::uint8_t>(v >> 8));
    w.u8(static_cast<std::uint8_t>(v));
}

std::uint32_t expect_magic(ByteReader& r, std::uint32_t magic, const char* what) {
    const auto got = r.u32_be();
    if (got != magic) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "bad IDX %s magic 0x%08x (expected 0x%08x)", what, got, magic);
        throw FormatError(buf);
    }
    return got;
}

}  // namespace

std::vector<sim::TargetImage> decode_idx_images(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, kIdxImageMagic, "image");
    const auto count = r.u32_be();
    const auto rows = r.u32_be();
    const auto cols = r.u32_be();
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) throw FormatError("implausible IDX image dimensions");
    const std::size_t per = static_cast<std::size_t>(rows) * cols;
    if (r.remaining() < per * count)
        throw FormatError("truncated IDX image payload: need " + std::to_string(per * count) + " bytes, have " +
                          std::to_string(r.remaining()));
    std::vector<sim::TargetImage> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto px = r.bytes(per);
        sim::TargetImage img{static_cast<int>(rows), static_cast<int>(cols), std::vector<double>(per), std::nullopt};
        for (std::size_t k = 0; k < per; ++k) img.pixels[k] = px[k] / 255.0;
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<int> decode_idx_labels(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    expect_magic(r, kIdxLabelMagic, "label");
    const auto count = r.u32_be();
    if (r.remaining() < count)
        throw FormatError("truncated IDX label payload: need " + std::to_string(count) + " bytes, have " +
                          std::to_string(r.remaining()));
    auto raw = r.bytes(count);
    return std::vector<int>(raw.begin(), raw.end());
}

std::vector<sim::TargetImage> load_idx_images(const std::filesystem::path& path) {
    return decode_idx_images(read_file(path));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) { return decode_idx_labels(read_file(path)); }

Bytes encode_idx_images(std::span<const sim::TargetImage> images) {
    ByteWriter w;
    put_u32_be(w, kIdxImageMagic);
    put_u32_be(w, static_cast<std::uint32_t>(images.size()));
    const int rows = images.empty() ? 28 : images.front().height;
    const int cols = images.empty() ? 28 : images.front().width;
    put_u32_be(w, static_cast<std::uint32_t>(rows));
    put_u32_be(w, static_cast<std::uint32_t>(cols));
    for (const auto& img : images) {
        if (img.height != rows || img.width != cols) throw DimensionError("IDX images must share dimensions");
        for (double v : img.pixels) w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    return w.take();
}

Bytes encode_idx_labels(std::span<const int> labels) {
    ByteWriter w;
    put_u32_be(w, kIdxLabelMagic);
    put_u32_be(w, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 255) throw LabelError("IDX labels must fit in one byte");
        w.u8(static_cast<std::uint8_t>(l));
    }
    return w.take();
}

void save_idx_images(std::span<const sim::TargetImage> images, const std::filesystem::path& path) {
    write_file(path, encode_idx_images(images));
}

void save_idx_labels(std::span<const int> labels, const std::filesystem::path& path) {
    write_file(path, encode_idx_labels(labels));
}

}  // namespace ghostrec::data
