#include "ghostrec/common/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ghostrec/common/error.hpp"

namespace ghostrec {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

template <class T>
void append_raw(Bytes& buf, T v) {
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.insert(buf.end(), tmp, tmp + sizeof(T));
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { append_raw(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { append_raw(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { append_raw(buf_, v); }
void ByteWriter::f32(float v) { append_raw(buf_, v); }
void ByteWriter::f64(double v) { append_raw(buf_, v); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void ByteWriter::text(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteWriter::string32(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    text(s);
}

void ByteReader::need(std::size_t n) const {
    if (n > data_.size() - pos_)
        throw FormatError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", have " + std::to_string(data_.size() - pos_));
}

namespace {

template <class T>
T read_raw(std::span<const std::uint8_t> data, std::size_t pos) {
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    return v;
}

}  // namespace

std::uint8_t ByteReader::u8() {
    need(1);
    return data_[pos_++];
}

#define GHOSTREC_READ(type, name)            \
    type ByteReader::name() {                \
        need(sizeof(type));                  \
        auto v = read_raw<type>(data_, pos_); \
        pos_ += sizeof(type);                \
        return v;                            \
    }
GHOSTREC_READ(std::uint16_t, u16)
GHOSTREC_READ(std::uint32_t, u32)
GHOSTREC_READ(std::uint64_t, u64)
GHOSTREC_READ(float, f32)
GHOSTREC_READ(double, f64)
#undef GHOSTREC_READ

std::uint32_t ByteReader::u32_be() {
    need(4);
    std::uint32_t v = (std::uint32_t{data_[pos_]} << 24) | (std::uint32_t{data_[pos_ + 1]} << 16) |
                      (std::uint32_t{data_[pos_ + 2]} << 8) | std::uint32_t{data_[pos_ + 3]};
    pos_ += 4;
    return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::string ByteReader::text(std::size_t n) {
    auto b = bytes(n);
    return std::string(b.begin(), b.end());
}

std::string ByteReader::string32() { return text(u32()); }

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw UsageError("write failed: " + path.string());
}

}  // namespace ghostrec
