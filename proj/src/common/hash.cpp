#include "ghostrec/common/hash.hpp"

#include <openssl/sha.h>
#include <zlib.h>

#include "ghostrec/common/error.hpp"

namespace ghostrec {

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Digest sha256(std::string_view text) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large buffers.
    std::size_t pos = 0;
    while (pos < data.size()) {
        auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - pos, 1u << 30));
        crc = ::crc32(crc, data.data() + pos, n);
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

Digest digest_from_hex(std::string_view hex) {
    if (hex.size() != 64) throw FormatError("fingerprint must be 64 hex characters");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw FormatError("invalid hex character in fingerprint");
    };
    Digest d{};
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return d;
}

}  // namespace ghostrec
