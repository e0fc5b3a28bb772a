#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ghostrec {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);
std::uint32_t crc32(std::span<const std::uint8_t> data);

std::string to_hex(std::span<const std::uint8_t> bytes);
// Parses 64 hex characters; throws FormatError otherwise.
Digest digest_from_hex(std::string_view hex);

inline bool is_zero(const Digest& d) {
    for (auto b : d)
        if (b != 0) return false;
    return true;
}

}  // namespace ghostrec
